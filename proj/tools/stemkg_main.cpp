#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stem/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stemkg: schema-guided knowledge-graph evidence retrieval"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Path to the JSON config file")
      ->required();
  std::optional<uint64_t> seed_override;
  app.add_option("--seed", seed_override, "Override the config seed");
  bool trace = false;
  app.add_flag("--trace", trace, "Write per-step candidate traces");
  std::optional<int> jobs_override;
  app.add_option("--jobs", jobs_override, "Worker count for cmd_run");

  auto* index = app.add_subcommand("index", "Build the entity vector cache");
  auto* run = app.add_subcommand("run", "Run the full pipeline per question");
  std::vector<std::string> question_ids;
  run->add_option("--ids", question_ids, "Only run these question ids");
  auto* eval = app.add_subcommand("eval", "Score a finished run");
  std::string run_dir;
  eval->add_option("--run-dir", run_dir,
                   "Run output directory (defaults to paths.output_dir)");
  auto* train = app.add_subcommand("train-gnn", "Train the guidance network");
  auto* datagen =
      app.add_subcommand("datagen", "Reverse-generate synthetic questions");

  CLI11_PARSE(app, argc, argv);

  try {
    stem::config::RunConfig cfg = stem::config::load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (jobs_override) cfg.jobs = *jobs_override;
    if (trace) cfg.trace = true;

    if (index->parsed()) return stem::pipeline::cmd_index(cfg);
    if (run->parsed()) return stem::pipeline::cmd_run(cfg, question_ids);
    if (eval->parsed()) return stem::pipeline::cmd_eval(cfg, run_dir);
    if (train->parsed()) return stem::pipeline::cmd_train_gnn(cfg);
    if (datagen->parsed()) return stem::pipeline::cmd_datagen(cfg);
  } catch (const stem::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == stem::Error::Kind::config ||
                   e.kind() == stem::Error::Kind::parse
               ? stem::pipeline::kExitValidation
               : stem::pipeline::kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return stem::pipeline::kExitRuntime;
  }
  return stem::pipeline::kExitValidation;
}

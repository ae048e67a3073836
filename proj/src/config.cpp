#include "stem/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"

namespace stem::config {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw Error(Error::Kind::config,
                  "unknown config key '" + key + "' in " + where);
    }
  }
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Error::Kind::config,
                "cannot open config file: " + path.string());
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw Error(Error::Kind::config,
                "config file is not valid JSON: " + path.string());
  }
  check_keys(j,
             {"paths", "bias", "gnn", "encoder", "chat", "eval", "datagen",
              "train", "beam", "jobs", "seed", "trace"},
             "top level");

  RunConfig cfg;
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p,
               {"graph", "questions", "fixtures", "checkpoint",
                "vector_cache", "prompts_dir", "output_dir",
                "training_manifest"},
               "paths");
    auto get = [&p](const char* key, std::filesystem::path fallback) {
      return p.contains(key) ? std::filesystem::path(p[key].get<std::string>())
                             : fallback;
    };
    cfg.paths.graph = get("graph", {});
    cfg.paths.questions = get("questions", {});
    cfg.paths.fixtures = get("fixtures", {});
    cfg.paths.checkpoint = get("checkpoint", {});
    cfg.paths.vector_cache = get("vector_cache", {});
    cfg.paths.prompts_dir = get("prompts_dir", cfg.paths.prompts_dir);
    cfg.paths.output_dir = get("output_dir", cfg.paths.output_dir);
    cfg.paths.training_manifest = get("training_manifest", {});
  }
  if (j.contains("bias")) {
    const json& b = j["bias"];
    check_keys(b, {"entity_bias", "triple_bias", "threshold", "anchor_top_n"},
               "bias");
    cfg.bias.entity_bias = b.value("entity_bias", cfg.bias.entity_bias);
    cfg.bias.triple_bias = b.value("triple_bias", cfg.bias.triple_bias);
    cfg.bias.threshold = b.value("threshold", cfg.bias.threshold);
    cfg.bias.anchor_top_n = b.value("anchor_top_n", cfg.bias.anchor_top_n);
  }
  if (j.contains("gnn")) {
    const json& g = j["gnn"];
    check_keys(g,
               {"d_pem", "d_gnn", "layers", "symmetric_bce", "learning_rate",
                "init_seed"},
               "gnn");
    cfg.gnn.d_pem = g.value("d_pem", cfg.gnn.d_pem);
    cfg.gnn.d_gnn = g.value("d_gnn", cfg.gnn.d_gnn);
    cfg.gnn.layers = g.value("layers", cfg.gnn.layers);
    cfg.gnn.symmetric_bce = g.value("symmetric_bce", cfg.gnn.symmetric_bce);
    cfg.gnn.learning_rate = g.value("learning_rate", cfg.gnn.learning_rate);
    cfg.gnn.init_seed = g.value("init_seed", cfg.gnn.init_seed);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e,
               {"backend", "dimension", "seed", "endpoint", "path", "model",
                "api_key", "timeout_seconds", "max_retries"},
               "encoder");
    cfg.encoder.backend = e.value("backend", cfg.encoder.backend);
    cfg.encoder.dimension = e.value("dimension", cfg.encoder.dimension);
    cfg.encoder.seed = e.value("seed", cfg.encoder.seed);
    cfg.encoder.endpoint = e.value("endpoint", cfg.encoder.endpoint);
    cfg.encoder.path = e.value("path", cfg.encoder.path);
    cfg.encoder.model = e.value("model", cfg.encoder.model);
    cfg.encoder.api_key = e.value("api_key", cfg.encoder.api_key);
    cfg.encoder.timeout_seconds =
        e.value("timeout_seconds", cfg.encoder.timeout_seconds);
    cfg.encoder.max_retries = e.value("max_retries", cfg.encoder.max_retries);
  }
  if (j.contains("chat")) {
    const json& c = j["chat"];
    check_keys(c,
               {"backend", "endpoint", "path", "model", "api_key",
                "timeout_seconds", "max_retries"},
               "chat");
    cfg.chat.backend = c.value("backend", cfg.chat.backend);
    cfg.chat.endpoint = c.value("endpoint", cfg.chat.endpoint);
    cfg.chat.path = c.value("path", cfg.chat.path);
    cfg.chat.model = c.value("model", cfg.chat.model);
    cfg.chat.api_key = c.value("api_key", cfg.chat.api_key);
    cfg.chat.timeout_seconds =
        c.value("timeout_seconds", cfg.chat.timeout_seconds);
    cfg.chat.max_retries = c.value("max_retries", cfg.chat.max_retries);
  }
  if (j.contains("eval")) {
    check_keys(j["eval"], {"coverage_mode"}, "eval");
    cfg.eval.coverage_mode =
        j["eval"].value("coverage_mode", cfg.eval.coverage_mode);
  }
  if (j.contains("datagen")) {
    const json& d = j["datagen"];
    check_keys(d, {"samples", "walk_min", "walk_max", "mask_count",
                   "llm_strategy"},
               "datagen");
    cfg.datagen.samples = d.value("samples", cfg.datagen.samples);
    cfg.datagen.walk_min = d.value("walk_min", cfg.datagen.walk_min);
    cfg.datagen.walk_max = d.value("walk_max", cfg.datagen.walk_max);
    cfg.datagen.mask_count = d.value("mask_count", cfg.datagen.mask_count);
    cfg.datagen.llm_strategy =
        d.value("llm_strategy", cfg.datagen.llm_strategy);
  }
  if (j.contains("train")) {
    check_keys(j["train"], {"steps", "grad_check_gate"}, "train");
    cfg.train.steps = j["train"].value("steps", cfg.train.steps);
    cfg.train.grad_check_gate =
        j["train"].value("grad_check_gate", cfg.train.grad_check_gate);
  }
  cfg.beam = j.value("beam", cfg.beam);
  cfg.jobs = j.value("jobs", cfg.jobs);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.trace = j.value("trace", cfg.trace);

  // Environment overrides for endpoints and secrets.
  cfg.chat.endpoint = env_or("STEMKG_CHAT_ENDPOINT", cfg.chat.endpoint);
  cfg.chat.api_key = env_or("STEMKG_CHAT_API_KEY", cfg.chat.api_key);
  cfg.chat.model = env_or("STEMKG_CHAT_MODEL", cfg.chat.model);
  cfg.encoder.endpoint = env_or("STEMKG_EMBED_ENDPOINT", cfg.encoder.endpoint);
  cfg.encoder.api_key = env_or("STEMKG_EMBED_API_KEY", cfg.encoder.api_key);
  cfg.encoder.model = env_or("STEMKG_EMBED_MODEL", cfg.encoder.model);
  return cfg;
}

void validate(const RunConfig& cfg, unsigned needs) {
  cfg.bias.validate();
  if (cfg.beam < 1) {
    throw Error(Error::Kind::config, "beam must be >= 1");
  }
  if (cfg.jobs < 1) {
    throw Error(Error::Kind::config, "jobs must be >= 1");
  }
  if (cfg.gnn.d_pem < 1 || cfg.gnn.d_gnn < 1 || cfg.gnn.layers < 1) {
    throw Error(Error::Kind::config, "gnn dimensions must be positive");
  }
  if (cfg.encoder.dimension != cfg.gnn.d_pem) {
    throw Error(Error::Kind::config,
                "encoder dimension must equal gnn.d_pem");
  }
  if (cfg.eval.coverage_mode != "exact" &&
      cfg.eval.coverage_mode != "undirected") {
    throw Error(Error::Kind::config,
                "coverage_mode must be 'exact' or 'undirected'");
  }
  if (cfg.encoder.backend != "deterministic" &&
      cfg.encoder.backend != "http") {
    throw Error(Error::Kind::config, "encoder backend unknown");
  }
  if (cfg.chat.backend != "fixture" && cfg.chat.backend != "http") {
    throw Error(Error::Kind::config, "chat backend unknown");
  }

  auto require = [](const std::filesystem::path& p, const char* what) {
    if (p.empty()) {
      throw Error(Error::Kind::config,
                  std::string("config is missing paths.") + what);
    }
    if (!std::filesystem::exists(p)) {
      throw Error(Error::Kind::config,
                  std::string(what) + " path does not exist: " + p.string());
    }
  };
  if (needs & kNeedsQuestions) require(cfg.paths.questions, "questions");
  if (needs & kNeedsGraph) require(cfg.paths.graph, "graph");
  if (needs & kNeedsPrompts) require(cfg.paths.prompts_dir, "prompts_dir");
  if ((needs & kNeedsFixtures) && cfg.chat.backend == "fixture") {
    require(cfg.paths.fixtures, "fixtures");
  }
  if (needs & kNeedsManifest) {
    require(cfg.paths.training_manifest, "training_manifest");
  }
}

}  // namespace stem::config

#pragma once
// Orchestration shared by the CLI and the python module: runtime assembly
// from config, the per-question pipeline (decompose -> ground -> guidance ->
// retrieve -> answer), output writing and the subcommand entry points.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stem/answerer.hpp"
#include "stem/config.hpp"
#include "stem/datagen.hpp"
#include "stem/embedding.hpp"
#include "stem/eval.hpp"
#include "stem/guidance.hpp"
#include "stem/kg_store.hpp"
#include "stem/projection.hpp"
#include "stem/tracer.hpp"

namespace stem::pipeline {

// Exit codes shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

struct Runtime {
  config::RunConfig cfg;
  std::unique_ptr<embedding::Encoder> base_encoder;
  std::unique_ptr<embedding::VectorCache> vector_cache;
  std::unique_ptr<embedding::CachingEncoder> encoder;
  std::unique_ptr<projection::ChatClient> chat;
  projection::PromptSet prompts;
  std::optional<gnn::GnnParams> gnn_params;
  bool guidance_fallback = false;  // no usable checkpoint

  embedding::Encoder& enc() { return *encoder; }
};

Runtime make_runtime(const config::RunConfig& cfg);

struct PlanRecord {
  projection::PlanCandidate candidate;
  std::vector<projection::SchemaTriple> schema_triples;
  bool ground_failed = false;
  std::string ground_error;
};

struct QuestionResult {
  std::string id;
  std::vector<PlanRecord> plans;
  tracer::EvidenceGraph evidence;
  answer::AnswerResult answer;
  tracer::StepTrace trace;
  bool failed = false;
  std::string error;
  bool guidance_fallback = false;
};

QuestionResult run_question(Runtime& rt, const kg::QuestionInstance& q);

// Guidance for a question from the union of grounded schema triples; falls
// back to the uniform all-selected graph when no trained parameters exist
// or when no plan grounded.
gnn::GuidanceGraph build_guidance(Runtime& rt, const kg::QuestionInstance& q,
                                  const std::vector<PlanRecord>& plans,
                                  bool* used_fallback = nullptr);

// Deterministic output files: evidence.jsonl, answers.jsonl, plans.jsonl,
// and traces.jsonl when tracing is enabled.
void write_outputs(const std::filesystem::path& dir,
                   const std::vector<QuestionResult>& results,
                   const std::vector<kg::QuestionInstance>& questions,
                   bool write_traces);

// --- subcommands -----------------------------------------------------------

int cmd_index(const config::RunConfig& cfg);
int cmd_run(const config::RunConfig& cfg,
            const std::vector<std::string>& question_ids);
int cmd_eval(const config::RunConfig& cfg,
             const std::filesystem::path& run_dir);
int cmd_train_gnn(const config::RunConfig& cfg);
int cmd_datagen(const config::RunConfig& cfg);

}  // namespace stem::pipeline

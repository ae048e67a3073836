#pragma once
// Hand-built end-to-end replay cases: one mini-KG per case plus recorded
// decomposition/grounding/generation completions, with the expected evidence
// set and answers. Used by the integration tests and the acceptance suite.

#include <filesystem>
#include <string>
#include <vector>

#include "stem/config.hpp"
#include "stem/kg_store.hpp"
#include "stem/pipeline.hpp"
#include "stem/projection.hpp"

namespace stem::cases {

struct ReplayCase {
  std::string name;
  kg::QuestionInstance question;
  // Completions keyed by rendered prompt; the generator fixture is attached
  // during build by running the pipeline up to the answer prompt.
  projection::FixtureChatClient fixtures;
  // The generator completion ("Output Answer" text) to record.
  std::string output_answer;
  // Expected evidence as label records, sorted.
  std::vector<kg::TripleRecord> expected_retrieved;
  tracer::BiasConfig bias;
  int beam = 4;
};

// The prompt assets directory inside the source tree.
std::filesystem::path prompts_dir();

// The seven replay cases.
std::vector<ReplayCase> build_replay_cases();

// A two-answer fixture pair for the strategy behavior split: the same
// question run once with a Precision plan and once with a Breadth plan.
struct StrategySplit {
  ReplayCase precision;
  ReplayCase breadth;
  std::vector<std::string> gold;
};
StrategySplit build_strategy_split();

// Materializes a runnable case directory: questions.jsonl, fixtures.jsonl
// and config.json wired for the deterministic encoder and fixture chat
// backend. Returns the config path. The generator fixture is recorded by
// executing the pipeline up to the answer prompt, so the fixture file on
// disk is complete before any CLI run.
std::filesystem::path materialize_case(const std::filesystem::path& dir,
                                       ReplayCase& c);

// In-process run of one case (shares the CLI code path underneath).
pipeline::QuestionResult run_case(ReplayCase& c);

// Sorted label records of an evidence graph.
std::vector<kg::TripleRecord> evidence_records(
    const tracer::EvidenceGraph& evidence, const kg::KnowledgeGraph& g);

}  // namespace stem::cases

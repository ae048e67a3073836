#pragma once
// Structure-to-query reverse generation: seeded random-walk subgraph
// sampling, entity masking with shared [ENTX] identifiers, LLM-driven
// question/assertion synthesis and strategy labeling. Emitted records follow
// the question-file schema so synthesized data feeds the eval loop directly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stem/kg_store.hpp"
#include "stem/projection.hpp"

namespace stem::datagen {

struct WalkSample {
  std::vector<kg::Triple> triples;    // distinct, in visit order
  std::vector<kg::EntityId> entities; // distinct, in visit order
};

// Seeded walk over the undirected adjacency collecting up to `length`
// distinct triples; dead ends restart from an already-visited entity, and
// after repeated dead ends from a fresh random entity. An edgeless graph is
// a sampling error.
WalkSample sample_walk(const kg::KnowledgeGraph& g, size_t length,
                       uint64_t seed);

struct MaskResult {
  std::vector<projection::SchemaTriple> masked;
  // placeholder -> original entity label
  std::map<std::string, std::string> answer_map;
  std::string answer_placeholder;  // the designated answer entity
};

// Replaces `answer_count` sampled entities with [ENT1..k]; the same entity
// always maps to the same identifier and distinct entities never share one.
// At least one concrete entity must survive as an anchor; selections that
// mask everything retry a bounded number of times.
MaskResult mask(const kg::KnowledgeGraph& g,
                const std::vector<kg::Triple>& triples, size_t answer_count,
                uint64_t seed);

// All entity labels that instantiate the answer placeholder such that every
// masked triple exists in g (other placeholders restored from the answer
// map). The true masked entity is always included.
std::vector<std::string> expand_answers(const kg::KnowledgeGraph& g,
                                        const MaskResult& masked);

struct ReverseGenOutcome {
  bool no_solution = false;
  std::string question;
  std::vector<std::string> assertions;
};

// One reverse-generation call; the completion must carry exactly one
// sentence per masked triple or it is rejected as a parse error.
ReverseGenOutcome reverse_generate(projection::ChatClient& client,
                                   const projection::PromptSet& prompts,
                                   const std::vector<projection::SchemaTriple>& masked,
                                   const std::string& answer_placeholder);

// Precision iff exactly one answer.
projection::Strategy label_strategy(const std::vector<std::string>& answers);

// LLM-labeled strategy via the strategy prompt (flag-gated alternative).
projection::Strategy label_strategy_llm(projection::ChatClient& client,
                                        const projection::PromptSet& prompts,
                                        const std::string& question,
                                        const std::vector<std::string>& assertions);

struct SyntheticRecord {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
  std::vector<std::string> assertions;
  std::vector<projection::SchemaTriple> masked_triples;
  projection::Strategy strategy = projection::Strategy::precision;
  std::vector<kg::Triple> source_triples;  // the unmasked sampled subgraph
  std::vector<std::string> question_entities;  // surviving concrete labels
};

struct Options {
  size_t samples = 5;
  size_t walk_min = 1;
  size_t walk_max = 3;
  size_t mask_count = 1;
  bool llm_strategy = false;
  int retry_budget = 3;
  uint64_t seed = 42;
};

struct Stats {
  size_t requested = 0;
  size_t emitted = 0;
  size_t skipped_no_solution = 0;
  size_t parse_failures = 0;
  std::map<size_t, size_t> hop_histogram;  // triple count -> records
  size_t precision_count = 0;
  size_t breadth_count = 0;
};

std::vector<SyntheticRecord> generate(const kg::KnowledgeGraph& g,
                                      projection::ChatClient& client,
                                      const projection::PromptSet& prompts,
                                      const Options& options, Stats* stats);

// Question-file schema (see kg_store::load_questions): the per-record
// subgraph is the sampled triples plus the 1-hop neighborhood of their
// entities.
void save_records(const std::filesystem::path& path,
                  const std::vector<SyntheticRecord>& records,
                  const kg::KnowledgeGraph& g);

std::string render_stats(const Stats& stats);

}  // namespace stem::datagen

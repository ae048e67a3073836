#pragma once
// Structure-tracing subgraph retrieval: bias-rectified anchoring, globally
// aware T-Score edge matching, greedy (Precision) and threshold (Breadth)
// recursion over the schema adjacency, and evidence-graph assembly.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stem/embedding.hpp"
#include "stem/guidance.hpp"
#include "stem/kg_store.hpp"
#include "stem/projection.hpp"

namespace stem::tracer {

struct BiasConfig {
  double entity_bias = 1.5;  // multiplicative boost for guidance entities
  double triple_bias = 0.5;  // additive boost for guidance triples
  double threshold = 0.6;    // Breadth commitment threshold
  int anchor_top_n = 50;

  void validate() const;  // entity_bias >= 1, triple_bias >= 0, threshold <= 2
};

// Candidate scores multiplied by the entity bias when the entity sits in the
// guidance selection; re-sorted descending, ties by entity id.
std::vector<std::pair<kg::EntityId, double>> rectify_entity_scores(
    std::vector<std::pair<kg::EntityId, double>> candidates,
    const gnn::GuidanceGraph& guidance, const BiasConfig& cfg);

struct Anchor {
  std::string schema_node;
  kg::EntityId kg_entity = kg::kNoEntity;
  double initial_score = 0.0;
};

// Starting pair: KG side is the argmax of rectified top-N index scores for
// the question entity label; schema side is the concrete node with the
// highest fuzzy-match ratio to that label. A schema with no concrete node
// or an empty candidate list raises a lookup error.
Anchor anchor(const projection::SchemaGraph& schema,
              const std::string& question_entity_label,
              const kg::KnowledgeGraph& g, const embedding::EntityIndex& idx,
              embedding::Encoder& enc, const gnn::GuidanceGraph& guidance,
              const BiasConfig& cfg);

struct TScoreParts {
  double raw_sim = 0.0;
  double bias = 0.0;
  double total = 0.0;
};

// Cosine of the verbalized triple encodings plus the triple-level bias when
// the KG triple belongs to the guidance subgraph.
TScoreParts t_score_parts(const projection::SchemaTriple& schema_t,
                          const kg::Triple& kg_t, const kg::KnowledgeGraph& g,
                          const gnn::GuidanceGraph& guidance,
                          embedding::Encoder& enc, const BiasConfig& cfg);
double t_score(const projection::SchemaTriple& schema_t, const kg::Triple& kg_t,
               const kg::KnowledgeGraph& g, const gnn::GuidanceGraph& guidance,
               embedding::Encoder& enc, const BiasConfig& cfg);

struct MatchStep {
  size_t schema_edge = 0;  // index into schema.triples
  kg::Triple kg_triple;
  double step_score = 0.0;  // T-Score of this commitment
  double cumulative = 0.0;  // S_i along the committing branch
};

// Search state: `matched`/`used` accumulate across the whole run (the
// Contradict set), while bindings, the visited-edge guard and the cumulative
// score are branch-local and are snapshot-restored around Breadth fan-outs.
struct MatchState {
  std::vector<MatchStep> matched;
  std::unordered_set<kg::Triple, kg::TripleHash> used;
  std::map<std::string, kg::EntityId> binding;           // schema -> kg
  std::unordered_map<kg::EntityId, std::string> bound_by; // kg -> schema
  std::set<size_t> visited_edges;
  double cumulative = 0.0;
};

// Per-step candidate log for the optional trace output.
struct StepTrace {
  struct Candidate {
    kg::TripleRecord triple;
    double raw_sim = 0.0;
    double bias = 0.0;
    double total = 0.0;
    bool admissible = false;
    bool committed = false;
  };
  struct Step {
    std::string schema_edge;
    std::string frontier_node;
    std::string frontier_entity;
    std::vector<Candidate> candidates;
  };
  std::vector<Step> steps;
};

class Matcher {
 public:
  Matcher(const projection::SchemaGraph& schema, const kg::KnowledgeGraph& g,
          const gnn::GuidanceGraph& guidance, embedding::Encoder& enc,
          const BiasConfig& cfg, projection::Strategy strategy,
          StepTrace* trace = nullptr);

  // Full recursion from the anchor pair; the anchor binds its schema node
  // and seeds the cumulative score.
  MatchState run(const Anchor& anchor);

  // Single-edge entry points (they recurse through the remaining schema).
  // frontier_node must be an endpoint of schema edge `edge` and already be
  // bound to frontier_entity in `state`.
  void step_precision(MatchState& state, size_t edge,
                      const std::string& frontier_node,
                      kg::EntityId frontier_entity);
  void step_breadth(MatchState& state, size_t edge,
                    const std::string& frontier_node,
                    kg::EntityId frontier_entity);

 private:
  struct Candidate {
    kg::Triple triple;
    TScoreParts score;
  };

  std::vector<Candidate> admissible_candidates(MatchState& state, size_t edge,
                                               const std::string& frontier_node,
                                               kg::EntityId frontier_entity,
                                               StepTrace::Step* log);
  void commit_and_recurse(MatchState& state, size_t edge,
                          const std::string& frontier_node,
                          kg::EntityId frontier_entity,
                          const Candidate& candidate);
  void match_from(MatchState& state, const std::string& schema_node,
                  kg::EntityId kg_entity, std::optional<size_t> last_visit);

  const projection::SchemaGraph& schema_;
  const kg::KnowledgeGraph& g_;
  const gnn::GuidanceGraph& guidance_;
  embedding::Encoder& enc_;
  BiasConfig cfg_;
  projection::Strategy strategy_;
  StepTrace* trace_;
};

// Convenience wrapper matching the operation contract.
MatchState match(const projection::SchemaGraph& schema,
                 const kg::KnowledgeGraph& g, const Anchor& anchor,
                 projection::Strategy strategy,
                 const gnn::GuidanceGraph& guidance, embedding::Encoder& enc,
                 const BiasConfig& cfg, StepTrace* trace = nullptr);

struct Plan {
  projection::SchemaGraph schema;
  projection::Strategy strategy = projection::Strategy::precision;
};

struct Provenance {
  size_t plan_idx = 0;
  std::string anchor_entity;
  double step_score = 0.0;
};

struct EvidenceGraph {
  // Union of matched KG triples across plans and anchors, in first-commit
  // order, ids valid against the source graph.
  std::vector<kg::Triple> triples;
  std::vector<Provenance> provenance;  // parallel to triples
  kg::KnowledgeGraph graph;            // re-interned union
  projection::Strategy strategy = projection::Strategy::precision;
  size_t failed_anchors = 0;
};

// Anchors and matches every plan x question entity; failures of a single
// anchor are isolated. All anchors failing yields an empty evidence graph.
EvidenceGraph retrieve(const std::vector<Plan>& plans,
                       const kg::QuestionInstance& question,
                       const gnn::GuidanceGraph& guidance,
                       const embedding::EntityIndex& idx,
                       embedding::Encoder& enc, const BiasConfig& cfg,
                       StepTrace* trace = nullptr);

}  // namespace stem::tracer

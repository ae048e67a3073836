#pragma once
// Test-only reference implementations, kept independent of the library code
// paths they check:
//  - a naive dense re-implementation of the message-passing forward pass,
//  - a brute-force enumerator over all admissible structure-tracing decision
//    sequences that selects the stepwise-maximal trajectory.

#include <optional>
#include <string>
#include <vector>

#include "stem/embedding.hpp"
#include "stem/guidance.hpp"
#include "stem/kg_store.hpp"
#include "stem/projection.hpp"
#include "stem/tracer.hpp"

namespace stem::oracle {

// Straightforward O(L * |T| * d) forward pass that rebuilds everything from
// the triple list; no shared code with gnn::forward.
gnn::Matrix dense_forward(const gnn::GnnParams& params,
                          const kg::KnowledgeGraph& g,
                          const gnn::Matrix& entity_init,
                          const gnn::Matrix& relation_init);

// One enumerated decision: which KG triple matched which schema edge.
struct OracleDecision {
  size_t schema_edge = 0;
  kg::Triple kg_triple;
  double t_score = 0.0;
};

// Exhaustively enumerates every admissible isomorphic decision sequence of
// the Precision-mode traversal (same admissibility rules, same schema-edge
// order) and returns the sequence that is lexicographically maximal by
// (t_score desc, triple labels asc) at each step, i.e. the
// maximum-cumulative-score mapping under the shared tie-breaks.
std::vector<OracleDecision> brute_force_best_mapping(
    const projection::SchemaGraph& schema, const kg::KnowledgeGraph& g,
    const tracer::Anchor& anchor, const gnn::GuidanceGraph& guidance,
    embedding::Encoder& enc, const tracer::BiasConfig& cfg);

// Convenience: the triple set of a mapping, label-sorted for set comparison.
std::vector<kg::TripleRecord> mapping_records(
    const std::vector<OracleDecision>& decisions, const kg::KnowledgeGraph& g);
std::vector<kg::TripleRecord> match_records(const tracer::MatchState& state,
                                            const kg::KnowledgeGraph& g);

}  // namespace stem::oracle

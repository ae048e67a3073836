#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace stem::oracle {

namespace {

std::vector<double> affine(const gnn::Matrix& w, const std::vector<double>& b,
                           const std::vector<double>& x) {
  std::vector<double> out(w.rows, 0.0);
  for (size_t r = 0; r < w.rows; ++r) {
    double acc = b.empty() ? 0.0 : b[r];
    for (size_t c = 0; c < w.cols; ++c) acc += w.at(r, c) * x[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace

gnn::Matrix dense_forward(const gnn::GnnParams& params,
                          const kg::KnowledgeGraph& g,
                          const gnn::Matrix& entity_init,
                          const gnn::Matrix& relation_init) {
  const size_t d = static_cast<size_t>(params.config.d_gnn);
  const size_t n = g.entity_count();
  gnn::Matrix state = entity_init;

  for (const auto& layer : params.layers) {
    // Relation transforms from the static relation features.
    std::vector<std::vector<double>> gamma(g.relation_count());
    for (size_t r = 0; r < g.relation_count(); ++r) {
      std::vector<double> h0(relation_init.row(r), relation_init.row(r) + d);
      std::vector<double> hidden =
          affine(layer.rel_hidden, layer.rel_hidden_bias, h0);
      for (double& x : hidden) x = x > 0.0 ? x : 0.0;
      gamma[r] = affine(layer.rel_out, layer.rel_out_bias, hidden);
    }

    gnn::Matrix next(n, d);
    for (size_t e = 0; e < n; ++e) {
      std::vector<double> sum(d, 0.0);
      size_t count = 0;
      // Scan the whole triple list rather than using the adjacency index.
      for (const kg::Triple& t : g.triples()) {
        kg::EntityId eid = static_cast<kg::EntityId>(e);
        if (t.head != eid && t.tail != eid) continue;
        kg::EntityId other = t.head == eid ? t.tail : t.head;
        for (size_t i = 0; i < d; ++i) {
          sum[i] += state.at(e, i) *
                    gamma[static_cast<size_t>(t.relation)][i] *
                    state.at(static_cast<size_t>(other), i);
        }
        ++count;
      }
      std::vector<double> concat(2 * d, 0.0);
      for (size_t i = 0; i < d; ++i) {
        concat[i] = state.at(e, i);
        concat[d + i] = count ? sum[i] / static_cast<double>(count) : 0.0;
      }
      std::vector<double> updated =
          affine(layer.update, layer.update_bias, concat);
      for (size_t i = 0; i < d; ++i) next.at(e, i) = updated[i];
    }
    state = std::move(next);
  }
  return state;
}

namespace {

struct EnumState {
  std::vector<OracleDecision> decisions;
  std::set<std::tuple<int32_t, int32_t, int32_t>> used;
  std::map<std::string, kg::EntityId> binding;
  std::map<kg::EntityId, std::string> bound_by;
  std::set<size_t> visited;
};

struct Frame {
  std::string node;
  kg::EntityId kg_entity;
  std::optional<size_t> last_visit;
  size_t next_position = 0;  // into schema.adjacency[node]
};

std::tuple<int32_t, int32_t, int32_t> key(const kg::Triple& t) {
  return {t.head, t.relation, t.tail};
}

struct Enumerator {
  const projection::SchemaGraph& schema;
  const kg::KnowledgeGraph& g;
  const gnn::GuidanceGraph& guidance;
  embedding::Encoder& enc;
  const tracer::BiasConfig& cfg;
  std::vector<std::vector<OracleDecision>> leaves;

  void run(EnumState state, std::vector<Frame> stack) {
    while (true) {
      if (stack.empty()) {
        leaves.push_back(state.decisions);
        return;
      }
      Frame& top = stack.back();
      auto adj = schema.adjacency.find(top.node);
      const std::vector<size_t>* edges =
          adj == schema.adjacency.end() ? nullptr : &adj->second;
      size_t edge = SIZE_MAX;
      while (edges && top.next_position < edges->size()) {
        size_t candidate = (*edges)[top.next_position++];
        if (top.last_visit && *top.last_visit == candidate) continue;
        if (state.visited.count(candidate)) continue;
        edge = candidate;
        break;
      }
      if (edge == SIZE_MAX) {
        stack.pop_back();
        continue;
      }
      state.visited.insert(edge);

      const projection::SchemaTriple& st = schema.triples[edge];
      const std::string& tail_node =
          st.head == top.node ? st.tail : st.head;

      struct Candidate {
        kg::Triple t;
        double score;
      };
      std::vector<Candidate> candidates;
      for (const kg::Triple& t : g.incident_edges(top.kg_entity)) {
        if (state.used.count(key(t))) continue;
        kg::EntityId kg_tail = kg::get_tail_entity(t, top.kg_entity);
        auto bound = state.binding.find(tail_node);
        if (bound != state.binding.end()) {
          if (bound->second != kg_tail) continue;
        } else {
          auto taken = state.bound_by.find(kg_tail);
          if (taken != state.bound_by.end() && taken->second != tail_node) {
            continue;
          }
        }
        candidates.push_back(
            {t, tracer::t_score(st, t, g, guidance, enc, cfg)});
      }
      if (candidates.empty()) continue;  // dead edge, no decision

      std::sort(candidates.begin(), candidates.end(),
                [this](const Candidate& a, const Candidate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return g.record(a.t) < g.record(b.t);
                });
      kg::EntityId frontier = top.kg_entity;
      std::vector<Frame> base_stack = stack;  // frame already advanced
      for (const Candidate& c : candidates) {
        EnumState branch = state;
        branch.used.insert(key(c.t));
        branch.decisions.push_back({edge, c.t, c.score});
        kg::EntityId kg_tail = kg::get_tail_entity(c.t, frontier);
        if (!branch.binding.count(tail_node)) {
          branch.binding[tail_node] = kg_tail;
          branch.bound_by[kg_tail] = tail_node;
        }
        std::vector<Frame> next_stack = base_stack;
        next_stack.push_back(Frame{tail_node, kg_tail, edge, 0});
        run(std::move(branch), std::move(next_stack));
      }
      return;  // all continuations handled by the forks above
    }
  }
};

// Lexicographic comparison on the per-step decision keys; the longer
// trajectory wins a shared prefix.
bool better(const std::vector<OracleDecision>& a,
            const std::vector<OracleDecision>& b,
            const kg::KnowledgeGraph& g) {
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    if (a[i].t_score != b[i].t_score) return a[i].t_score > b[i].t_score;
    auto ra = g.record(a[i].kg_triple);
    auto rb = g.record(b[i].kg_triple);
    if (ra != rb) return ra < rb;
    if (a[i].schema_edge != b[i].schema_edge) {
      return a[i].schema_edge < b[i].schema_edge;
    }
  }
  return a.size() > b.size();
}

}  // namespace

std::vector<OracleDecision> brute_force_best_mapping(
    const projection::SchemaGraph& schema, const kg::KnowledgeGraph& g,
    const tracer::Anchor& anchor, const gnn::GuidanceGraph& guidance,
    embedding::Encoder& enc, const tracer::BiasConfig& cfg) {
  Enumerator en{schema, g, guidance, enc, cfg, {}};
  EnumState root;
  root.binding[anchor.schema_node] = anchor.kg_entity;
  root.bound_by[anchor.kg_entity] = anchor.schema_node;
  std::vector<Frame> stack{Frame{anchor.schema_node, anchor.kg_entity,
                                 std::nullopt, 0}};
  en.run(std::move(root), std::move(stack));

  std::vector<OracleDecision> best;
  bool have = false;
  for (const auto& leaf : en.leaves) {
    if (!have || better(leaf, best, g)) {
      best = leaf;
      have = true;
    }
  }
  return best;
}

std::vector<kg::TripleRecord> mapping_records(
    const std::vector<OracleDecision>& decisions,
    const kg::KnowledgeGraph& g) {
  std::vector<kg::TripleRecord> out;
  for (const auto& d : decisions) out.push_back(g.record(d.kg_triple));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<kg::TripleRecord> match_records(const tracer::MatchState& state,
                                            const kg::KnowledgeGraph& g) {
  std::vector<kg::TripleRecord> out;
  for (const auto& step : state.matched) out.push_back(g.record(step.kg_triple));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace stem::oracle

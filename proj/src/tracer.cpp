#include "stem/tracer.hpp"

#include <algorithm>

#include "stem/text.hpp"

namespace stem::tracer {

void BiasConfig::validate() const {
  if (entity_bias < 1.0) {
    throw Error(Error::Kind::config, "entity_bias must be >= 1");
  }
  if (triple_bias < 0.0) {
    throw Error(Error::Kind::config, "triple_bias must be >= 0");
  }
  if (threshold > 2.0) {
    throw Error(Error::Kind::config,
                "threshold above the maximum possible T-Score");
  }
  if (anchor_top_n < 1) {
    throw Error(Error::Kind::config, "anchor_top_n must be >= 1");
  }
}

std::vector<std::pair<kg::EntityId, double>> rectify_entity_scores(
    std::vector<std::pair<kg::EntityId, double>> candidates,
    const gnn::GuidanceGraph& guidance, const BiasConfig& cfg) {
  for (auto& [id, score] : candidates) {
    if (guidance.contains_entity(id)) score *= cfg.entity_bias;
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return candidates;
}

Anchor anchor(const projection::SchemaGraph& schema,
              const std::string& question_entity_label,
              const kg::KnowledgeGraph& g, const embedding::EntityIndex& idx,
              embedding::Encoder& enc, const gnn::GuidanceGraph& guidance,
              const BiasConfig& cfg) {
  (void)g;
  auto concrete = schema.concrete_nodes();
  if (concrete.empty()) {
    throw Error(Error::Kind::lookup,
                "schema graph has no concrete node to anchor at");
  }
  std::string best_node;
  double best_ratio = -1.0;
  for (const auto& node : concrete) {
    double ratio = text::fuzzy_ratio(node, question_entity_label);
    if (ratio > best_ratio ||
        (ratio == best_ratio && node < best_node)) {
      best_ratio = ratio;
      best_node = node;
    }
  }

  auto candidates = embedding::top_n_entities(
      idx, enc, question_entity_label,
      static_cast<size_t>(cfg.anchor_top_n));
  if (candidates.empty()) {
    throw Error(Error::Kind::lookup,
                "no anchor candidates for entity label '" +
                    question_entity_label + "'");
  }
  candidates = rectify_entity_scores(std::move(candidates), guidance, cfg);

  Anchor a;
  a.schema_node = best_node;
  a.kg_entity = candidates.front().first;
  a.initial_score = candidates.front().second;
  return a;
}

TScoreParts t_score_parts(const projection::SchemaTriple& schema_t,
                          const kg::Triple& kg_t, const kg::KnowledgeGraph& g,
                          const gnn::GuidanceGraph& guidance,
                          embedding::Encoder& enc, const BiasConfig& cfg) {
  TScoreParts parts;
  embedding::Vector schema_vec = enc.encode(
      embedding::verbalize(schema_t.head, schema_t.relation, schema_t.tail));
  embedding::Vector kg_vec = enc.encode(embedding::verbalize_triple(kg_t, g));
  parts.raw_sim = embedding::cosine_sim(schema_vec, kg_vec);
  parts.bias = guidance.contains_triple(kg_t) ? cfg.triple_bias : 0.0;
  parts.total = parts.raw_sim + parts.bias;
  return parts;
}

double t_score(const projection::SchemaTriple& schema_t, const kg::Triple& kg_t,
               const kg::KnowledgeGraph& g, const gnn::GuidanceGraph& guidance,
               embedding::Encoder& enc, const BiasConfig& cfg) {
  return t_score_parts(schema_t, kg_t, g, guidance, enc, cfg).total;
}

namespace {

// The other endpoint of a schema edge as seen from `node`.
const std::string& schema_other_endpoint(const projection::SchemaTriple& t,
                                         const std::string& node) {
  if (t.head == node) return t.tail;
  if (t.tail == node) return t.head;
  throw Error(Error::Kind::contract,
              "schema node '" + node + "' is not an endpoint");
}

}  // namespace

Matcher::Matcher(const projection::SchemaGraph& schema,
                 const kg::KnowledgeGraph& g,
                 const gnn::GuidanceGraph& guidance, embedding::Encoder& enc,
                 const BiasConfig& cfg, projection::Strategy strategy,
                 StepTrace* trace)
    : schema_(schema),
      g_(g),
      guidance_(guidance),
      enc_(enc),
      cfg_(cfg),
      strategy_(strategy),
      trace_(trace) {
  cfg_.validate();
}

MatchState Matcher::run(const Anchor& anchor) {
  MatchState state;
  state.binding[anchor.schema_node] = anchor.kg_entity;
  state.bound_by[anchor.kg_entity] = anchor.schema_node;
  state.cumulative = anchor.initial_score;
  match_from(state, anchor.schema_node, anchor.kg_entity, std::nullopt);
  return state;
}

std::vector<Matcher::Candidate> Matcher::admissible_candidates(
    MatchState& state, size_t edge, const std::string& frontier_node,
    kg::EntityId frontier_entity, StepTrace::Step* log) {
  const projection::SchemaTriple& schema_t = schema_.triples[edge];
  const std::string& tail_node = schema_other_endpoint(schema_t, frontier_node);

  std::vector<Candidate> out;
  for (const kg::Triple& t : g_.incident_edges(frontier_entity)) {
    TScoreParts parts = t_score_parts(schema_t, t, g_, guidance_, enc_, cfg_);
    bool admissible = true;
    if (state.used.count(t)) {
      admissible = false;  // Contradict
    } else {
      kg::EntityId kg_tail = kg::get_tail_entity(t, frontier_entity);
      auto bound = state.binding.find(tail_node);
      if (bound != state.binding.end()) {
        // A bound schema node must rebind consistently.
        if (bound->second != kg_tail) admissible = false;
      } else {
        // Fresh schema node: the mapping stays injective.
        auto taken = state.bound_by.find(kg_tail);
        if (taken != state.bound_by.end() && taken->second != tail_node) {
          admissible = false;
        }
      }
    }
    if (log) {
      log->candidates.push_back({g_.record(t), parts.raw_sim, parts.bias,
                                 parts.total, admissible, false});
    }
    if (admissible) out.push_back({t, parts});
  }
  std::sort(out.begin(), out.end(), [this](const Candidate& a,
                                           const Candidate& b) {
    if (a.score.total != b.score.total) return a.score.total > b.score.total;
    return g_.record(a.triple) < g_.record(b.triple);
  });
  return out;
}

void Matcher::commit_and_recurse(MatchState& state, size_t edge,
                                 const std::string& frontier_node,
                                 kg::EntityId frontier_entity,
                                 const Candidate& candidate) {
  const projection::SchemaTriple& schema_t = schema_.triples[edge];
  const std::string& tail_node = schema_other_endpoint(schema_t, frontier_node);
  kg::EntityId kg_tail = kg::get_tail_entity(candidate.triple, frontier_entity);

  state.used.insert(candidate.triple);
  state.cumulative += candidate.score.total;
  state.matched.push_back(
      {edge, candidate.triple, candidate.score.total, state.cumulative});
  if (!state.binding.count(tail_node)) {
    state.binding[tail_node] = kg_tail;
    state.bound_by[kg_tail] = tail_node;
  }
  match_from(state, tail_node, kg_tail, edge);
}

void Matcher::step_precision(MatchState& state, size_t edge,
                             const std::string& frontier_node,
                             kg::EntityId frontier_entity) {
  StepTrace::Step* log = nullptr;
  if (trace_) {
    trace_->steps.emplace_back();
    log = &trace_->steps.back();
    const auto& st = schema_.triples[edge];
    log->schema_edge = embedding::verbalize(st.head, st.relation, st.tail);
    log->frontier_node = frontier_node;
    log->frontier_entity = g_.entity_label(frontier_entity);
  }
  auto candidates =
      admissible_candidates(state, edge, frontier_node, frontier_entity, log);
  size_t log_idx = trace_ ? trace_->steps.size() - 1 : 0;
  if (candidates.empty()) return;  // dead end; earlier commitments stay
  if (trace_) {
    // Mark the winner in the (unsorted) candidate log.
    for (auto& c : trace_->steps[log_idx].candidates) {
      if (c.triple == g_.record(candidates.front().triple)) c.committed = true;
    }
  }
  commit_and_recurse(state, edge, frontier_node, frontier_entity,
                     candidates.front());
}

void Matcher::step_breadth(MatchState& state, size_t edge,
                           const std::string& frontier_node,
                           kg::EntityId frontier_entity) {
  StepTrace::Step* log = nullptr;
  if (trace_) {
    trace_->steps.emplace_back();
    log = &trace_->steps.back();
    const auto& st = schema_.triples[edge];
    log->schema_edge = embedding::verbalize(st.head, st.relation, st.tail);
    log->frontier_node = frontier_node;
    log->frontier_entity = g_.entity_label(frontier_entity);
  }
  auto candidates =
      admissible_candidates(state, edge, frontier_node, frontier_entity, log);
  size_t log_idx = trace_ ? trace_->steps.size() - 1 : 0;

  std::vector<Candidate> passing;
  for (const auto& c : candidates) {
    if (c.score.total >= cfg_.threshold) passing.push_back(c);
  }
  if (trace_) {
    for (auto& logged : trace_->steps[log_idx].candidates) {
      for (const auto& c : passing) {
        if (logged.triple == g_.record(c.triple)) logged.committed = true;
      }
    }
  }
  // All passing candidates commit before any branch recurses, so sibling
  // branches see each other in the Contradict set. Bindings, the
  // visited-edge guard and the cumulative score are branch-local and roll
  // back between branches.
  const projection::SchemaTriple& schema_t = schema_.triples[edge];
  const std::string& tail_node = schema_other_endpoint(schema_t, frontier_node);
  double node_score = state.cumulative;
  for (const auto& c : passing) {
    state.used.insert(c.triple);
    state.matched.push_back(
        {edge, c.triple, c.score.total, node_score + c.score.total});
  }
  for (const auto& c : passing) {
    auto binding_snapshot = state.binding;
    auto bound_by_snapshot = state.bound_by;
    auto visited_snapshot = state.visited_edges;
    kg::EntityId kg_tail = kg::get_tail_entity(c.triple, frontier_entity);
    if (!state.binding.count(tail_node)) {
      state.binding[tail_node] = kg_tail;
      state.bound_by[kg_tail] = tail_node;
    }
    state.cumulative = node_score + c.score.total;
    match_from(state, tail_node, kg_tail, edge);
    state.binding = std::move(binding_snapshot);
    state.bound_by = std::move(bound_by_snapshot);
    state.visited_edges = std::move(visited_snapshot);
    state.cumulative = node_score;
  }
}

void Matcher::match_from(MatchState& state, const std::string& schema_node,
                         kg::EntityId kg_entity,
                         std::optional<size_t> last_visit) {
  auto it = schema_.adjacency.find(schema_node);
  if (it == schema_.adjacency.end()) return;
  for (size_t edge : it->second) {
    if (last_visit && *last_visit == edge) continue;
    if (state.visited_edges.count(edge)) continue;
    state.visited_edges.insert(edge);
    double node_cumulative = state.cumulative;
    if (strategy_ == projection::Strategy::precision) {
      step_precision(state, edge, schema_node, kg_entity);
    } else {
      step_breadth(state, edge, schema_node, kg_entity);
    }
    // Sibling edges at this node extend from the node's own score.
    state.cumulative = node_cumulative;
  }
}

MatchState match(const projection::SchemaGraph& schema,
                 const kg::KnowledgeGraph& g, const Anchor& anchor,
                 projection::Strategy strategy,
                 const gnn::GuidanceGraph& guidance, embedding::Encoder& enc,
                 const BiasConfig& cfg, StepTrace* trace) {
  Matcher matcher(schema, g, guidance, enc, cfg, strategy, trace);
  return matcher.run(anchor);
}

EvidenceGraph retrieve(const std::vector<Plan>& plans,
                       const kg::QuestionInstance& question,
                       const gnn::GuidanceGraph& guidance,
                       const embedding::EntityIndex& idx,
                       embedding::Encoder& enc, const BiasConfig& cfg,
                       StepTrace* trace) {
  if (plans.empty()) {
    throw Error(Error::Kind::argument, "retrieve requires >= 1 plan");
  }
  EvidenceGraph evidence;
  evidence.strategy = plans.front().strategy;

  std::unordered_set<kg::Triple, kg::TripleHash> seen;
  for (size_t plan_idx = 0; plan_idx < plans.size(); ++plan_idx) {
    const Plan& plan = plans[plan_idx];
    if (plan.schema.empty()) continue;
    for (kg::EntityId qe : question.question_entities) {
      const std::string& label = question.graph.entity_label(qe);
      Anchor a;
      try {
        a = anchor(plan.schema, label, question.graph, idx, enc, guidance,
                   cfg);
      } catch (const Error&) {
        ++evidence.failed_anchors;
        continue;
      }
      MatchState state = match(plan.schema, question.graph, a, plan.strategy,
                               guidance, enc, cfg, trace);
      for (const MatchStep& step : state.matched) {
        if (seen.insert(step.kg_triple).second) {
          evidence.triples.push_back(step.kg_triple);
          evidence.provenance.push_back(
              {plan_idx, question.graph.entity_label(a.kg_entity),
               step.step_score});
        }
      }
    }
  }
  evidence.graph = kg::build_graph(question.graph, evidence.triples);
  return evidence;
}

}  // namespace stem::tracer

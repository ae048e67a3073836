#include "stem/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "stem/text.hpp"

namespace stem::gnn {

namespace {

void matvec(const Matrix& m, const double* v, double* out) {
  for (size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double acc = 0.0;
    for (size_t c = 0; c < m.cols; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
}

// out += M^T * v   (v has m.rows entries, out has m.cols)
void matvec_transpose_acc(const Matrix& m, const double* v, double* out) {
  for (size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double vr = v[r];
    if (vr == 0.0) continue;
    for (size_t c = 0; c < m.cols; ++c) out[c] += vr * row[c];
  }
}

// M += outer(u, v)
void outer_acc(Matrix& m, const double* u, const double* v) {
  for (size_t r = 0; r < m.rows; ++r) {
    double ur = u[r];
    if (ur == 0.0) continue;
    double* row = m.row(r);
    for (size_t c = 0; c < m.cols; ++c) row[c] += ur * v[c];
  }
}

void fill_uniform(std::mt19937_64& rng, double bound, double* data,
                  size_t n) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (size_t i = 0; i < n; ++i) data[i] = dist(rng);
}

bool all_finite(const Matrix& m) {
  for (double x : m.data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

GnnParams GnnParams::init(const GnnConfig& config) {
  GnnParams p;
  p.config = config;
  const size_t d = static_cast<size_t>(config.d_gnn);
  const size_t dp = static_cast<size_t>(config.d_pem);
  std::mt19937_64 rng(config.init_seed);

  auto init_matrix = [&rng](Matrix& m, size_t rows, size_t cols) {
    m = Matrix(rows, cols);
    fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(cols)), m.data.data(),
                 m.data.size());
  };
  auto init_bias = [&rng](DVec& b, size_t n, size_t fan_in) {
    b.assign(n, 0.0);
    fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(fan_in)), b.data(),
                 n);
  };

  init_matrix(p.triple_proj, d, 3 * dp);
  init_matrix(p.relation_proj, d, dp);
  p.layers.resize(static_cast<size_t>(config.layers));
  for (auto& layer : p.layers) {
    init_matrix(layer.rel_hidden, d, d);
    init_bias(layer.rel_hidden_bias, d, d);
    init_matrix(layer.rel_out, d, d);
    init_bias(layer.rel_out_bias, d, d);
    init_matrix(layer.update, d, 2 * d);
    init_bias(layer.update_bias, d, 2 * d);
  }
  p.readout.assign(d, 0.0);
  fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(d)), p.readout.data(),
               d);
  return p;
}

std::vector<BlockRef> parameter_blocks(GnnParams& params) {
  std::vector<BlockRef> blocks;
  auto add_matrix = [&blocks](const std::string& name, Matrix& m) {
    blocks.push_back({name, {m.rows, m.cols}, m.data.data(), m.data.size()});
  };
  auto add_vec = [&blocks](const std::string& name, DVec& v) {
    blocks.push_back({name, {v.size()}, v.data(), v.size()});
  };
  add_matrix("triple_proj", params.triple_proj);
  add_matrix("relation_proj", params.relation_proj);
  for (size_t l = 0; l < params.layers.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".";
    add_matrix(prefix + "rel_hidden", params.layers[l].rel_hidden);
    add_vec(prefix + "rel_hidden_bias", params.layers[l].rel_hidden_bias);
    add_matrix(prefix + "rel_out", params.layers[l].rel_out);
    add_vec(prefix + "rel_out_bias", params.layers[l].rel_out_bias);
    add_matrix(prefix + "update", params.layers[l].update);
    add_vec(prefix + "update_bias", params.layers[l].update_bias);
  }
  add_vec("readout", params.readout);
  return blocks;
}

GnnGrads zero_grads(const GnnParams& params) {
  GnnGrads g = params;
  auto blocks = parameter_blocks(g);
  for (auto& b : blocks) std::fill(b.data, b.data + b.size, 0.0);
  return g;
}

DVec embed_triple_feature(const GnnParams& params,
                          const projection::SchemaTriple& t,
                          embedding::Encoder& enc) {
  const size_t dp = static_cast<size_t>(params.config.d_pem);
  if (static_cast<size_t>(enc.dimension()) != dp) {
    throw Error(Error::Kind::config,
                "encoder dimension " + std::to_string(enc.dimension()) +
                    " does not match d_pem " + std::to_string(dp));
  }
  DVec concat(3 * dp);
  auto put = [&concat, dp](size_t slot, const embedding::Vector& v) {
    for (size_t i = 0; i < dp; ++i) concat[slot * dp + i] = v[i];
  };
  put(0, enc.encode(t.head));
  put(1, enc.encode(t.relation));
  put(2, enc.encode(t.tail));
  DVec out(params.triple_proj.rows);
  matvec(params.triple_proj, concat.data(), out.data());
  return out;
}

DVec pool_query(const std::vector<DVec>& features) {
  if (features.empty()) {
    throw Error(Error::Kind::argument, "pool_query requires >= 1 feature");
  }
  DVec out(features[0].size(), 0.0);
  for (const auto& f : features) {
    if (f.size() != out.size()) {
      throw Error(Error::Kind::argument, "pooled features differ in size");
    }
    for (size_t i = 0; i < f.size(); ++i) out[i] += f[i];
  }
  for (double& x : out) x /= static_cast<double>(features.size());
  return out;
}

InitialFeatures init_features(const GnnParams& params,
                              const kg::KnowledgeGraph& g,
                              const std::vector<kg::EntityId>& question_entities,
                              const DVec& pooled_query,
                              embedding::Encoder& enc) {
  const size_t d = static_cast<size_t>(params.config.d_gnn);
  if (pooled_query.size() != d) {
    throw Error(Error::Kind::argument, "pooled query has wrong dimension");
  }
  InitialFeatures init;
  init.entity = Matrix(g.entity_count(), d);
  for (kg::EntityId e : question_entities) {
    if (e < 0 || static_cast<size_t>(e) >= g.entity_count()) {
      throw Error(Error::Kind::lookup,
                  "question entity id out of range: " + std::to_string(e));
    }
    std::memcpy(init.entity.row(static_cast<size_t>(e)), pooled_query.data(),
                d * sizeof(double));
  }
  init.relation = Matrix(g.relation_count(), d);
  for (size_t r = 0; r < g.relation_count(); ++r) {
    embedding::Vector z =
        enc.encode(g.relation_label(static_cast<kg::RelationId>(r)));
    DVec zd(z.begin(), z.end());
    matvec(params.relation_proj, zd.data(), init.relation.row(r));
  }
  return init;
}

Matrix forward(const GnnParams& params, const kg::KnowledgeGraph& g,
               const Matrix& entity_init, const Matrix& relation_init,
               ForwardTrace* trace) {
  const size_t d = static_cast<size_t>(params.config.d_gnn);
  const size_t n_entities = g.entity_count();
  const size_t n_relations = g.relation_count();
  if (entity_init.cols != d || entity_init.rows != n_entities) {
    throw Error(Error::Kind::argument, "entity feature shape mismatch");
  }
  if (relation_init.cols != d || relation_init.rows != n_relations) {
    throw Error(Error::Kind::argument, "relation feature shape mismatch");
  }

  if (trace) {
    trace->entity_states.clear();
    trace->rel_hidden_pre.clear();
    trace->rel_transform.clear();
    trace->aggregates.clear();
    trace->entity_states.push_back(entity_init);
  }

  Matrix state = entity_init;
  DVec message(d), concat(2 * d);
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];

    // Relations are static across layers; each layer applies its own
    // transform to the initial relation features.
    Matrix hidden_pre(n_relations, d);
    Matrix transform(n_relations, d);
    for (size_t r = 0; r < n_relations; ++r) {
      matvec(layer.rel_hidden, relation_init.row(r), hidden_pre.row(r));
      DVec hidden(d);
      for (size_t i = 0; i < d; ++i) {
        hidden_pre.at(r, i) += layer.rel_hidden_bias[i];
        hidden[i] = std::max(0.0, hidden_pre.at(r, i));
      }
      matvec(layer.rel_out, hidden.data(), transform.row(r));
      for (size_t i = 0; i < d; ++i) {
        transform.at(r, i) += layer.rel_out_bias[i];
      }
    }

    Matrix aggregates(n_entities, d);
    Matrix next(n_entities, d);
    for (size_t e = 0; e < n_entities; ++e) {
      const auto& incident =
          g.incident_edges(static_cast<kg::EntityId>(e));
      double* agg = aggregates.row(e);
      for (const kg::Triple& t : incident) {
        kg::EntityId other =
            kg::get_tail_entity(t, static_cast<kg::EntityId>(e));
        const double* he = state.row(e);
        const double* ho = state.row(static_cast<size_t>(other));
        const double* gamma = transform.row(static_cast<size_t>(t.relation));
        for (size_t i = 0; i < d; ++i) {
          message[i] = he[i] * gamma[i] * ho[i];
        }
        for (size_t i = 0; i < d; ++i) agg[i] += message[i];
      }
      if (!incident.empty()) {
        double inv = 1.0 / static_cast<double>(incident.size());
        for (size_t i = 0; i < d; ++i) agg[i] *= inv;
      }
      std::memcpy(concat.data(), state.row(e), d * sizeof(double));
      std::memcpy(concat.data() + d, agg, d * sizeof(double));
      matvec(layer.update, concat.data(), next.row(e));
      for (size_t i = 0; i < d; ++i) {
        next.at(e, i) += layer.update_bias[i];
      }
    }

    if (!all_finite(next)) {
      throw Error(Error::Kind::numeric,
                  "non-finite entity state after layer " + std::to_string(l));
    }
    if (trace) {
      trace->rel_hidden_pre.push_back(std::move(hidden_pre));
      trace->rel_transform.push_back(std::move(transform));
      trace->aggregates.push_back(std::move(aggregates));
      trace->entity_states.push_back(next);
    }
    state = std::move(next);
  }
  return state;
}

std::vector<double> node_probabilities(const GnnParams& params,
                                       const Matrix& entity_states) {
  const size_t d = static_cast<size_t>(params.config.d_gnn);
  if (entity_states.cols != d) {
    throw Error(Error::Kind::argument, "entity state shape mismatch");
  }
  std::vector<double> probs(entity_states.rows);
  for (size_t e = 0; e < entity_states.rows; ++e) {
    const double* row = entity_states.row(e);
    double logit = 0.0;
    for (size_t i = 0; i < d; ++i) logit += row[i] * params.readout[i];
    double p = 1.0 / (1.0 + std::exp(-logit));
    probs[e] = std::clamp(p, 1e-12, 1.0 - 1e-12);
  }
  return probs;
}

double bce_loss(const std::vector<double>& probs,
                const std::vector<uint8_t>& labels, bool symmetric) {
  if (probs.size() != labels.size()) {
    throw Error(Error::Kind::argument,
                "bce_loss needs one label per entity: " +
                    std::to_string(probs.size()) + " probabilities vs " +
                    std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) {
    throw Error(Error::Kind::argument, "bce_loss over zero entities");
  }
  double total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    double p = probs[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw Error(Error::Kind::numeric,
                  "probability outside (0,1): " + std::to_string(p));
    }
    if (labels[i]) total -= std::log(p);
    if (symmetric && !labels[i]) total -= std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

GuidanceGraph select_guidance(const kg::KnowledgeGraph& g,
                              const std::vector<double>& probs,
                              size_t schema_triple_count) {
  if (schema_triple_count < 1) {
    throw Error(Error::Kind::argument,
                "schema_triple_count must be >= 1");
  }
  if (probs.size() != g.entity_count()) {
    throw Error(Error::Kind::argument,
                "one probability per entity required");
  }
  GuidanceGraph out;
  out.node_probs = probs;
  size_t k = std::min(4 * schema_triple_count, g.entity_count());

  std::vector<kg::EntityId> order(g.entity_count());
  for (size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<kg::EntityId>(i);
  }
  std::sort(order.begin(), order.end(),
            [&probs](kg::EntityId a, kg::EntityId b) {
              double pa = probs[static_cast<size_t>(a)];
              double pb = probs[static_cast<size_t>(b)];
              if (pa != pb) return pa > pb;
              return a < b;
            });
  order.resize(k);
  std::sort(order.begin(), order.end());
  out.selected = order;
  out.selected_set.insert(order.begin(), order.end());

  for (const kg::Triple& t : g.triples()) {
    if (out.selected_set.count(t.head) && out.selected_set.count(t.tail)) {
      out.subgraph_triples.push_back(t);
      out.subgraph_set.insert(t);
    }
  }
  out.subgraph = kg::build_graph(g, out.subgraph_triples);
  return out;
}

GuidanceGraph uniform_guidance(const kg::KnowledgeGraph& g) {
  GuidanceGraph out;
  out.node_probs.assign(g.entity_count(), 0.5);
  out.selected.resize(g.entity_count());
  for (size_t i = 0; i < out.selected.size(); ++i) {
    out.selected[i] = static_cast<kg::EntityId>(i);
  }
  out.selected_set.insert(out.selected.begin(), out.selected.end());
  out.subgraph_triples = g.triples();
  out.subgraph_set.insert(out.subgraph_triples.begin(),
                          out.subgraph_triples.end());
  out.subgraph = kg::build_graph(g, out.subgraph_triples);
  return out;
}

double instance_loss(const GnnParams& params, const GnnInstance& instance,
                     embedding::Encoder& enc, InstanceTrace* trace) {
  const kg::KnowledgeGraph& g = *instance.graph;
  if (instance.schema_triples.empty()) {
    throw Error(Error::Kind::argument,
                "instance needs >= 1 schema triple");
  }
  if (instance.labels.size() != g.entity_count()) {
    throw Error(Error::Kind::argument, "one label per entity required");
  }
  const size_t dp = static_cast<size_t>(params.config.d_pem);

  std::vector<DVec> concats;
  std::vector<DVec> features;
  for (const auto& t : instance.schema_triples) {
    DVec concat(3 * dp);
    auto put = [&concat, dp](size_t slot, const embedding::Vector& v) {
      for (size_t i = 0; i < dp; ++i) concat[slot * dp + i] = v[i];
    };
    put(0, enc.encode(t.head));
    put(1, enc.encode(t.relation));
    put(2, enc.encode(t.tail));
    DVec f(params.triple_proj.rows);
    matvec(params.triple_proj, concat.data(), f.data());
    features.push_back(std::move(f));
    concats.push_back(std::move(concat));
  }
  DVec pooled = pool_query(features);

  std::vector<DVec> relation_inputs;
  for (size_t r = 0; r < g.relation_count(); ++r) {
    embedding::Vector z =
        enc.encode(g.relation_label(static_cast<kg::RelationId>(r)));
    relation_inputs.emplace_back(z.begin(), z.end());
  }
  InitialFeatures init;
  init.entity = Matrix(g.entity_count(), static_cast<size_t>(params.config.d_gnn));
  for (kg::EntityId e : instance.question_entities) {
    std::memcpy(init.entity.row(static_cast<size_t>(e)), pooled.data(),
                pooled.size() * sizeof(double));
  }
  init.relation = Matrix(g.relation_count(),
                         static_cast<size_t>(params.config.d_gnn));
  for (size_t r = 0; r < g.relation_count(); ++r) {
    matvec(params.relation_proj, relation_inputs[r].data(),
           init.relation.row(r));
  }

  ForwardTrace fwd;
  Matrix final_states =
      forward(params, g, init.entity, init.relation, trace ? &fwd : nullptr);
  std::vector<double> probs = node_probabilities(params, final_states);
  double loss = bce_loss(probs, instance.labels, params.config.symmetric_bce);

  if (trace) {
    trace->triple_concats = std::move(concats);
    trace->triple_features = std::move(features);
    trace->pooled = std::move(pooled);
    trace->relation_inputs = std::move(relation_inputs);
    trace->init = std::move(init);
    trace->forward = std::move(fwd);
    trace->final_states = std::move(final_states);
    trace->probs = std::move(probs);
    trace->loss = loss;
  }
  return loss;
}

GnnGrads backward(const GnnParams& params, const GnnInstance& instance,
                  const InstanceTrace& trace) {
  const kg::KnowledgeGraph& g = *instance.graph;
  const size_t d = static_cast<size_t>(params.config.d_gnn);
  const size_t n_entities = g.entity_count();
  const size_t n_relations = g.relation_count();
  const size_t n_layers = params.layers.size();
  const double inv_n = 1.0 / static_cast<double>(n_entities);

  GnnGrads grads = zero_grads(params);

  // Loss -> readout and final entity states.
  Matrix d_state(n_entities, d);
  const Matrix& final_states = trace.final_states;
  for (size_t e = 0; e < n_entities; ++e) {
    double p = trace.probs[e];
    double y = instance.labels[e] ? 1.0 : 0.0;
    double d_logit;
    if (params.config.symmetric_bce) {
      d_logit = (p - y) * inv_n;
    } else {
      d_logit = -y * (1.0 - p) * inv_n;
    }
    const double* h = final_states.row(e);
    for (size_t i = 0; i < d; ++i) {
      grads.readout[i] += d_logit * h[i];
      d_state.at(e, i) = d_logit * params.readout[i];
    }
  }

  Matrix d_relation_init(n_relations, d);
  DVec concat(2 * d), d_concat(2 * d), dm(d);

  for (size_t l = n_layers; l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    LayerParams& layer_grads = grads.layers[l];
    const Matrix& input_states = trace.forward.entity_states[l];
    const Matrix& aggregates = trace.forward.aggregates[l];
    const Matrix& transform = trace.forward.rel_transform[l];
    const Matrix& hidden_pre = trace.forward.rel_hidden_pre[l];

    Matrix d_input(n_entities, d);
    Matrix d_transform(n_relations, d);

    for (size_t e = 0; e < n_entities; ++e) {
      // Through the affine update.
      std::memcpy(concat.data(), input_states.row(e), d * sizeof(double));
      std::memcpy(concat.data() + d, aggregates.row(e), d * sizeof(double));
      const double* dnext = d_state.row(e);
      outer_acc(layer_grads.update, dnext, concat.data());
      for (size_t i = 0; i < d; ++i) layer_grads.update_bias[i] += dnext[i];
      std::fill(d_concat.begin(), d_concat.end(), 0.0);
      matvec_transpose_acc(layer.update, dnext, d_concat.data());
      for (size_t i = 0; i < d; ++i) d_input.at(e, i) += d_concat[i];

      // Through the mean aggregation and DistMult messages.
      const auto& incident = g.incident_edges(static_cast<kg::EntityId>(e));
      if (incident.empty()) continue;
      double inv_count = 1.0 / static_cast<double>(incident.size());
      for (const kg::Triple& t : incident) {
        kg::EntityId other =
            kg::get_tail_entity(t, static_cast<kg::EntityId>(e));
        const double* he = input_states.row(e);
        const double* ho = input_states.row(static_cast<size_t>(other));
        const double* gamma = transform.row(static_cast<size_t>(t.relation));
        double* d_gamma = d_transform.row(static_cast<size_t>(t.relation));
        double* d_he = d_input.row(e);
        double* d_ho = d_input.row(static_cast<size_t>(other));
        for (size_t i = 0; i < d; ++i) {
          double dmi = d_concat[d + i] * inv_count;
          d_he[i] += dmi * gamma[i] * ho[i];
          d_gamma[i] += dmi * he[i] * ho[i];
          d_ho[i] += dmi * he[i] * gamma[i];
        }
      }
    }

    // Through the per-layer relation transform (2-layer MLP on the static
    // relation features).
    for (size_t r = 0; r < n_relations; ++r) {
      const double* d_gamma = d_transform.row(r);
      bool live = false;
      for (size_t i = 0; i < d; ++i) {
        if (d_gamma[i] != 0.0) {
          live = true;
          break;
        }
      }
      if (!live) continue;
      DVec hidden(d), d_hidden(d, 0.0), d_hidden_pre(d);
      for (size_t i = 0; i < d; ++i) {
        hidden[i] = std::max(0.0, hidden_pre.at(r, i));
      }
      outer_acc(layer_grads.rel_out, d_gamma, hidden.data());
      for (size_t i = 0; i < d; ++i) {
        layer_grads.rel_out_bias[i] += d_gamma[i];
      }
      matvec_transpose_acc(layer.rel_out, d_gamma, d_hidden.data());
      for (size_t i = 0; i < d; ++i) {
        d_hidden_pre[i] = hidden_pre.at(r, i) > 0.0 ? d_hidden[i] : 0.0;
      }
      outer_acc(layer_grads.rel_hidden, d_hidden_pre.data(),
                trace.init.relation.row(r));
      for (size_t i = 0; i < d; ++i) {
        layer_grads.rel_hidden_bias[i] += d_hidden_pre[i];
      }
      matvec_transpose_acc(layer.rel_hidden, d_hidden_pre.data(),
                           d_relation_init.row(r));
    }

    d_state = std::move(d_input);
  }

  // Entity init: question-entity rows all carry the pooled query.
  DVec d_pooled(d, 0.0);
  for (kg::EntityId e : instance.question_entities) {
    const double* row = d_state.row(static_cast<size_t>(e));
    for (size_t i = 0; i < d; ++i) d_pooled[i] += row[i];
  }
  double inv_triples =
      1.0 / static_cast<double>(instance.schema_triples.size());
  DVec d_feature(d);
  for (size_t t = 0; t < instance.schema_triples.size(); ++t) {
    for (size_t i = 0; i < d; ++i) d_feature[i] = d_pooled[i] * inv_triples;
    outer_acc(grads.triple_proj, d_feature.data(),
              trace.triple_concats[t].data());
  }

  // Relation init rows feed every layer's transform.
  for (size_t r = 0; r < n_relations; ++r) {
    outer_acc(grads.relation_proj, d_relation_init.row(r),
              trace.relation_inputs[r].data());
  }

  return grads;
}

GradCheckReport grad_check(GnnParams params, const GnnInstance& instance,
                           embedding::Encoder& enc, double step) {
  InstanceTrace trace;
  instance_loss(params, instance, enc, &trace);
  GnnGrads analytic = backward(params, instance, trace);

  GradCheckReport report;
  auto param_blocks = parameter_blocks(params);
  auto grad_blocks = parameter_blocks(analytic);
  for (size_t b = 0; b < param_blocks.size(); ++b) {
    for (size_t i = 0; i < param_blocks[b].size; ++i) {
      double saved = param_blocks[b].data[i];
      param_blocks[b].data[i] = saved + step;
      double up = instance_loss(params, instance, enc);
      param_blocks[b].data[i] = saved - step;
      double down = instance_loss(params, instance, enc);
      param_blocks[b].data[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double a = grad_blocks[b].data[i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-4});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_block = param_blocks[b].name;
      }
    }
  }
  return report;
}

TrainResult train(GnnParams& params, const std::vector<GnnInstance>& instances,
                  embedding::Encoder& enc, const TrainOptions& options) {
  if (instances.empty()) {
    throw Error(Error::Kind::argument, "no training instances");
  }
  TrainResult result;
  double inv = 1.0 / static_cast<double>(instances.size());
  for (int s = 0; s <= options.steps; ++s) {
    GnnGrads total = zero_grads(params);
    double loss = 0.0;
    for (const auto& instance : instances) {
      InstanceTrace trace;
      loss += instance_loss(params, instance, enc, &trace) * inv;
      GnnGrads grads = backward(params, instance, trace);
      auto src = parameter_blocks(grads);
      auto dst = parameter_blocks(total);
      for (size_t b = 0; b < src.size(); ++b) {
        for (size_t i = 0; i < src[b].size; ++i) {
          dst[b].data[i] += src[b].data[i] * inv;
        }
      }
    }
    if (!std::isfinite(loss)) {
      throw Error(Error::Kind::numeric,
                  "training loss diverged at step " + std::to_string(s));
    }
    result.loss_curve.push_back(loss);
    if (s == options.steps) break;
    auto grad_view = parameter_blocks(total);
    auto param_view = parameter_blocks(params);
    for (size_t b = 0; b < grad_view.size(); ++b) {
      for (size_t i = 0; i < grad_view[b].size; ++i) {
        param_view[b].data[i] -= options.learning_rate * grad_view[b].data[i];
      }
    }
  }
  return result;
}

std::vector<projection::SchemaTriple> mask_path_for_training(
    const kg::KnowledgeGraph& g, const std::vector<kg::Triple>& path,
    const std::vector<kg::EntityId>& question_entities) {
  std::unordered_set<kg::EntityId> question_set(question_entities.begin(),
                                                question_entities.end());
  std::unordered_map<kg::EntityId, std::string> placeholder;
  int next = 1;
  auto node_label = [&](kg::EntityId e) -> std::string {
    if (question_set.count(e)) return g.entity_label(e);
    auto it = placeholder.find(e);
    if (it != placeholder.end()) return it->second;
    std::string token = "[ENT" + std::to_string(next++) + "]";
    placeholder.emplace(e, token);
    return token;
  };
  std::vector<projection::SchemaTriple> out;
  out.reserve(path.size());
  for (const kg::Triple& t : path) {
    projection::SchemaTriple s;
    s.head = node_label(t.head);
    s.relation = g.relation_label(t.relation);
    s.tail = node_label(t.tail);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {
constexpr char kCheckpointMagic[8] = {'S', 'T', 'E', 'M', 'G', 'N', 'N', '1'};
}

void save_checkpoint(const std::filesystem::path& path,
                     const GnnParams& params) {
  if (!path.parent_path().empty()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(Error::Kind::config,
                "cannot write checkpoint: " + path.string());
  }
  out.write(kCheckpointMagic, 8);
  uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  int32_t dims[3] = {params.config.d_pem, params.config.d_gnn,
                     params.config.layers};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  uint8_t symmetric = params.config.symmetric_bce ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&symmetric), sizeof(symmetric));
  out.write(reinterpret_cast<const char*>(&params.config.learning_rate),
            sizeof(double));
  out.write(reinterpret_cast<const char*>(&params.config.init_seed),
            sizeof(uint64_t));

  GnnParams& mutable_params = const_cast<GnnParams&>(params);
  auto blocks = parameter_blocks(mutable_params);
  uint32_t count = static_cast<uint32_t>(blocks.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& block : blocks) {
    uint32_t name_len = static_cast<uint32_t>(block.name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(block.name.data(), name_len);
    uint32_t ndim = static_cast<uint32_t>(block.shape.size());
    out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (size_t dim : block.shape) {
      uint64_t d = dim;
      out.write(reinterpret_cast<const char*>(&d), sizeof(d));
    }
    for (size_t i = 0; i < block.size; ++i) {
      float f = static_cast<float>(block.data[i]);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
}

GnnParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Error::Kind::config,
                "cannot open checkpoint: " + path.string());
  }
  char magic[8];
  uint32_t version = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0 ||
      !in.read(reinterpret_cast<char*>(&version), sizeof(version)) ||
      version != 1) {
    throw Error(Error::Kind::parse,
                "unrecognized checkpoint format: " + path.string());
  }
  GnnConfig config;
  int32_t dims[3];
  uint8_t symmetric = 0;
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  in.read(reinterpret_cast<char*>(&symmetric), sizeof(symmetric));
  in.read(reinterpret_cast<char*>(&config.learning_rate), sizeof(double));
  in.read(reinterpret_cast<char*>(&config.init_seed), sizeof(uint64_t));
  if (!in) {
    throw Error(Error::Kind::parse,
                "truncated checkpoint header: " + path.string());
  }
  config.d_pem = dims[0];
  config.d_gnn = dims[1];
  config.layers = dims[2];
  config.symmetric_bce = symmetric != 0;

  GnnParams params = GnnParams::init(config);
  auto blocks = parameter_blocks(params);

  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count != blocks.size()) {
    throw Error(Error::Kind::parse,
                "checkpoint block count mismatch: " + path.string());
  }
  for (uint32_t b = 0; b < count; ++b) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (!in || name_len > 256) {
      throw Error(Error::Kind::parse, "corrupt checkpoint: " + path.string());
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    size_t total = 1;
    std::vector<size_t> shape;
    for (uint32_t i = 0; i < ndim; ++i) {
      uint64_t d = 0;
      in.read(reinterpret_cast<char*>(&d), sizeof(d));
      shape.push_back(static_cast<size_t>(d));
      total *= static_cast<size_t>(d);
    }
    if (name != blocks[b].name || shape != blocks[b].shape) {
      throw Error(Error::Kind::parse,
                  "checkpoint tensor '" + name + "' does not match layout");
    }
    for (size_t i = 0; i < total; ++i) {
      float f = 0.0f;
      in.read(reinterpret_cast<char*>(&f), sizeof(f));
      blocks[b].data[i] = static_cast<double>(f);
    }
    if (!in) {
      throw Error(Error::Kind::parse,
                  "truncated checkpoint tensor: " + path.string());
    }
  }
  return params;
}

}  // namespace stem::gnn

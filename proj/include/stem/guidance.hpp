#pragma once
// Triple-dependent GNN guidance: schema-conditioned message passing over the
// per-question KG, per-entity relevance probabilities, top-K selection and
// the induced guidance subgraph. Training is plain gradient descent on a
// positives-only BCE with a hand-rolled backward pass verified by finite
// differences.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "stem/embedding.hpp"
#include "stem/kg_store.hpp"
#include "stem/projection.hpp"

namespace stem::gnn {

using DVec = std::vector<double>;

struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }
  double* row(size_t r) { return data.data() + r * cols; }
  const double* row(size_t r) const { return data.data() + r * cols; }
};

struct GnnConfig {
  int d_pem = 1024;
  int d_gnn = 512;
  int layers = 6;
  bool symmetric_bce = false;
  double learning_rate = 1e-5;
  uint64_t init_seed = 7;
};

// One message-passing layer: a 2-layer relation transform (ReLU hidden) and
// an affine update over [state; aggregate].
struct LayerParams {
  Matrix rel_hidden;     // d_gnn x d_gnn
  DVec rel_hidden_bias;  // d_gnn
  Matrix rel_out;        // d_gnn x d_gnn
  DVec rel_out_bias;     // d_gnn
  Matrix update;         // d_gnn x 2*d_gnn
  DVec update_bias;      // d_gnn
};

struct GnnParams {
  GnnConfig config;
  Matrix triple_proj;    // d_gnn x 3*d_pem, bias-free
  Matrix relation_proj;  // d_gnn x d_pem, bias-free
  std::vector<LayerParams> layers;
  DVec readout;          // d_gnn, bias-free scalar head

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, seeded.
  static GnnParams init(const GnnConfig& config);
};

// Named view over every trainable block; shared by the optimizer, the
// checkpoint writer and the gradient checker.
struct BlockRef {
  std::string name;
  std::vector<size_t> shape;
  double* data;
  size_t size;
};
std::vector<BlockRef> parameter_blocks(GnnParams& params);

// Gradients share the parameter layout.
using GnnGrads = GnnParams;
GnnGrads zero_grads(const GnnParams& params);

// --- elementary ops ---------------------------------------------------

// Concatenated (head, relation, tail) encodings projected to d_gnn.
DVec embed_triple_feature(const GnnParams& params,
                          const projection::SchemaTriple& t,
                          embedding::Encoder& enc);

// Componentwise arithmetic mean; empty input is an argument error.
DVec pool_query(const std::vector<DVec>& features);

struct InitialFeatures {
  Matrix entity;    // |N| x d_gnn; pooled query rows on question entities
  Matrix relation;  // |R| x d_gnn; projected relation-label encodings
};

InitialFeatures init_features(const GnnParams& params,
                              const kg::KnowledgeGraph& g,
                              const std::vector<kg::EntityId>& question_entities,
                              const DVec& pooled_query,
                              embedding::Encoder& enc);

// Cached intermediate state for the backward pass.
struct ForwardTrace {
  std::vector<Matrix> entity_states;  // layers+1 matrices of |N| x d_gnn
  // Per layer, per relation: hidden pre-activation and transform output.
  std::vector<Matrix> rel_hidden_pre;  // layers x (|R| x d_gnn)
  std::vector<Matrix> rel_transform;   // layers x (|R| x d_gnn)
  std::vector<Matrix> aggregates;      // layers x (|N| x d_gnn)
};

// L rounds of DistMult-composed messages over the undirected adjacency:
//   m = h_e ⊙ g_l(h_r) ⊙ h_other   per incident triple,
//   agg = mean of incident messages (zero vector for isolated nodes),
//   h'  = update([h ; agg]).
// Relations stay static across layers: every g_l consumes the initial
// relation features. Raises a numeric error naming the layer on NaN/Inf.
Matrix forward(const GnnParams& params, const kg::KnowledgeGraph& g,
               const Matrix& entity_init, const Matrix& relation_init,
               ForwardTrace* trace = nullptr);

// Sigmoid of the scalar readout, clamped into (0,1) by 1e-12.
std::vector<double> node_probabilities(const GnnParams& params,
                                       const Matrix& entity_states);

// Positives-only BCE by default: mean over entities of -y*log(p). The
// symmetric variant adds -(1-y)*log(1-p). p outside (0,1) is a numeric
// error. `labels` holds one 0/1 entry per entity id.
double bce_loss(const std::vector<double>& probs,
                const std::vector<uint8_t>& labels, bool symmetric = false);

// --- guidance selection -------------------------------------------------

struct GuidanceGraph {
  std::vector<double> node_probs;        // by entity id
  std::vector<kg::EntityId> selected;    // ascending id
  std::unordered_set<kg::EntityId> selected_set;
  // Source-graph triples whose endpoints are both selected.
  std::vector<kg::Triple> subgraph_triples;
  std::unordered_set<kg::Triple, kg::TripleHash> subgraph_set;
  kg::KnowledgeGraph subgraph;  // induced, re-interned

  bool contains_entity(kg::EntityId e) const {
    return selected_set.count(e) > 0;
  }
  bool contains_triple(const kg::Triple& t) const {
    return subgraph_set.count(t) > 0;
  }
};

// K = 4 * schema_triple_count capped at |entities|; ties break by entity id.
GuidanceGraph select_guidance(const kg::KnowledgeGraph& g,
                              const std::vector<double>& probs,
                              size_t schema_triple_count);

// Degenerate guidance when no trained checkpoint exists: every entity
// selected at probability 0.5, so biases stay uniform.
GuidanceGraph uniform_guidance(const kg::KnowledgeGraph& g);

// --- full-instance training path ----------------------------------------

struct GnnInstance {
  const kg::KnowledgeGraph* graph = nullptr;
  std::vector<kg::EntityId> question_entities;
  std::vector<projection::SchemaTriple> schema_triples;
  std::vector<uint8_t> labels;  // one per entity id
};

struct InstanceTrace {
  std::vector<DVec> triple_concats;  // per schema triple, 3*d_pem inputs
  std::vector<DVec> triple_features; // projected features
  DVec pooled;
  std::vector<DVec> relation_inputs; // per relation id, d_pem encodings
  InitialFeatures init;
  ForwardTrace forward;
  Matrix final_states;
  std::vector<double> probs;
  double loss = 0.0;
};

double instance_loss(const GnnParams& params, const GnnInstance& instance,
                     embedding::Encoder& enc, InstanceTrace* trace = nullptr);

// Analytic gradients of instance_loss w.r.t. every parameter block.
GnnGrads backward(const GnnParams& params, const GnnInstance& instance,
                  const InstanceTrace& trace);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_block;
};

// Central finite differences (step 1e-4 by default) against the analytic
// gradient over every coordinate of every block.
GradCheckReport grad_check(GnnParams params, const GnnInstance& instance,
                           embedding::Encoder& enc, double step = 1e-4);

struct TrainOptions {
  int steps = 0;
  double learning_rate = 1e-5;
};

struct TrainResult {
  std::vector<double> loss_curve;  // loss before each step, then final
};

// Full-batch gradient descent over the instances.
TrainResult train(GnnParams& params, const std::vector<GnnInstance>& instances,
                  embedding::Encoder& enc, const TrainOptions& options);

// Masks every ground-truth-path entity outside the question set with shared
// [ENTk] placeholders, yielding the schema triples used for training.
std::vector<projection::SchemaTriple> mask_path_for_training(
    const kg::KnowledgeGraph& g, const std::vector<kg::Triple>& path,
    const std::vector<kg::EntityId>& question_entities);

// --- checkpoint io --------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path,
                     const GnnParams& params);
GnnParams load_checkpoint(const std::filesystem::path& path);

}  // namespace stem::gnn

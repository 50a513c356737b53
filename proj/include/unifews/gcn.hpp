#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unifews/bundle.hpp"
#include "unifews/graph_core.hpp"
#include "unifews/metrics.hpp"
#include "unifews/propagation.hpp"
#include "unifews/sparsify.hpp"

namespace unifews {

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  DenseMatrix w;                              ///< in_dim x out_dim
  std::optional<std::vector<double>> bias;    ///< never pruned
};

/// Stack of graph-convolution (or plain dense) layers. Hidden layers use
/// ReLU; the last layer emits pre-softmax logits.
struct GcnModel {
  std::vector<LayerSpec> layers;
  SkipMode skip = SkipMode::Residual;

  /// Glorot-uniform weights for the dimension chain dims[0] -> ... -> dims.back().
  static GcnModel glorot(std::span<const std::size_t> dims, std::uint64_t seed, bool bias = false,
                         SkipMode skip = SkipMode::Residual);

  std::vector<std::size_t> dims() const;
  void validate() const;
};

/// Masks captured from a forward pass, replayed verbatim when frozen.
struct MaskSnapshot {
  std::vector<EdgeMask> edges;     ///< empty for MLP models
  std::vector<EntryMask> weights;
};

struct LayerTrace {
  std::size_t q_a = 0;
  double eta_a = 0.0;
  std::size_t q_w = 0;
  double eta_w = 0.0;
  std::uint64_t prop_flops = 0;
  std::uint64_t trans_flops = 0;
};

/// Intermediates kept for backpropagation.
struct LayerCache {
  std::shared_ptr<const DenseMatrix> propagated;  ///< P_hat_l (H_l for MLP layers)
  DenseMatrix pre;                                ///< Z_l = P_hat_l W_hat_l (+ bias)
  DenseMatrix w_hat;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  DenseMatrix logits;
  MaskChain edge_masks;
  std::vector<EntryMask> weight_masks;
  std::vector<LayerCache> cache;

  std::uint64_t prop_flops() const;
  std::uint64_t trans_flops() const;
  double mean_eta_a() const;
  double mean_eta_w() const;
  MaskSnapshot masks() const { return {edge_masks.layers, weight_masks}; }
  std::vector<LayerReport> layer_reports() const;
};

/// Layer-0 propagation. It depends only on T, X and delta_a, so training
/// computes it once and hands it to every forward pass.
struct FirstLayerInput {
  EdgeMask mask;
  std::shared_ptr<const DenseMatrix> propagated;
  std::vector<double> column_norms;
  std::uint64_t prop_flops = 0;
};

struct ForwardOptions {
  const MaskSnapshot* frozen = nullptr;
  const FirstLayerInput* first_layer = nullptr;
  bool keep_cache = false;
  std::uint64_t flops_per_mac = 2;
};

/// Iterative GCN forward with entry-wise edge and weight pruning per layer:
/// tighten the inherited edge mask against H, propagate with the model's skip
/// mode, prune W against the column norms of the propagated embedding, then
/// transform. Throws NumericalError naming the layer on non-finite values.
ForwardTrace forward_sparsified(const GcnModel& model, const CsrGraph& t, const DenseMatrix& x,
                                const ThresholdPolicy& policy, const ForwardOptions& options = {});

/// `t` null means an MLP: the "propagated" input is X itself.
FirstLayerInput prepare_first_layer(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x,
                                    const ThresholdPolicy& policy, std::uint64_t flops_per_mac = 2);

/// Dense transform stage only (decoupled models), with weight pruning.
ForwardTrace mlp_forward(const GcnModel& model, const DenseMatrix& h0, double delta_w,
                         const ForwardOptions& options = {});

/// P W_hat where W_hat's zero entries are skipped. FLOPs are charged for
/// every row against every kept weight.
DenseMatrix sparse_weight_matmul(const DenseMatrix& p, const DenseMatrix& w_hat, const EntryMask& kept,
                                 FlopCounter* counter = nullptr);

struct Gradients {
  double loss = 0.0;
  std::vector<DenseMatrix> w;
  std::vector<std::vector<double>> bias;
  ForwardTrace trace;
};

/// Mean softmax cross-entropy over `ids` plus (weight_decay / 2) * ||W_hat||^2,
/// with gradients by backpropagation through the masked structures. Pruned
/// weights and edges carry zero gradient. `t` null means an MLP model.
Gradients loss_and_gradients(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x,
                             std::span<const int> labels, std::span<const NodeId> ids,
                             const ThresholdPolicy& policy, double weight_decay,
                             const MaskSnapshot* frozen = nullptr, const FirstLayerInput* first_layer = nullptr);

/// Loss only, same definition as loss_and_gradients.
double loss_value(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x, std::span<const int> labels,
                  std::span<const NodeId> ids, const ThresholdPolicy& policy, double weight_decay,
                  const MaskSnapshot* frozen = nullptr);

enum class Optimizer { Adam, SGD };

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 512;
  int layer_depth = 2;
  bool bias = false;
  Optimizer optimizer = Optimizer::Adam;
  SkipMode skip = SkipMode::Residual;
  /// Weight pruning is active from start_epoch; masks are frozen from
  /// freeze_epoch on (-1 = recompute every forward pass).
  struct {
    int start_epoch = 0;
    int freeze_epoch = -1;
  } weight_prune;
  /// Edge masks frozen from this epoch on (-1 = recompute every epoch).
  int edge_freeze_epoch = -1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::vector<double> eta_a;
  std::vector<double> eta_w;
  std::uint64_t flops = 0;
};

struct TrainResult {
  GcnModel model;  ///< best-validation snapshot
  RunReport report;
  ForwardTrace final_trace;  ///< evaluation pass of the snapshot, no cache
  std::vector<EpochLog> epochs;
};

/// Full-batch training. `t` null trains the model as an MLP on `x`.
TrainResult train(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x, std::span<const int> labels,
                  const Splits& splits, const TrainConfig& cfg, const ThresholdPolicy& policy);

nlohmann::json epoch_log_json(const std::vector<EpochLog>& epochs);

/// Flat checkpoint: u32 layer count, u32 dims[L+1], then every layer's
/// weights as f32 row-major; biases (if any) follow as f32.
void save_checkpoint(const GcnModel& model, const std::string& path);
GcnModel load_checkpoint(const std::string& path);

}  // namespace unifews

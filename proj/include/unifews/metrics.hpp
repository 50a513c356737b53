#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unifews/graph_core.hpp"
#include "unifews/sparsify.hpp"

namespace unifews {

/// Sum over layers of 2 * |kept edges| * f, plus `identity_rows * f` per layer
/// for hops that add an identity term (residual skip, teleport).
std::uint64_t count_prop_flops(const MaskChain& chain, std::size_t f, std::size_t identity_rows = 0,
                               std::uint64_t flops_per_mac = 2);

/// 2 * rows * (kept weight entries).
std::uint64_t count_trans_flops(std::size_t rows, const EntryMask& weight_mask, std::uint64_t flops_per_mac = 2);

/// Fraction of split nodes whose argmax logit (ties to the lowest class)
/// equals the label. Throws InputError on an empty split.
double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const NodeId> split);

/// Index of the largest entry in a row; ties resolve to the lowest index.
std::size_t argmax_row(const DenseMatrix& logits, std::size_t row);

/// One report row. Decoupled runs list propagation hops and transform
/// layers separately; iterative layers carry both stages.
struct LayerReport {
  double eta_a = 0.0;
  double eta_w = 0.0;
  std::uint64_t prop_flops = 0;
  std::uint64_t trans_flops = 0;
  bool graph_stage = true;
  bool weight_stage = true;
};

struct AccuracyReport {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

struct RunReport {
  std::string dataset;
  nlohmann::json config;
  std::vector<LayerReport> layers;
  AccuracyReport accuracy;
  double wall_time_ms = 0.0;
  std::uint64_t seed = 0;
  /// Optional extra payloads (per-epoch log, serialized masks).
  nlohmann::json extras;

  std::uint64_t total_prop_flops() const;
  std::uint64_t total_trans_flops() const;
  std::uint64_t total_flops() const { return total_prop_flops() + total_trans_flops(); }
  /// Mean over the layers that have the stage, the usual convention for
  /// layer-dependent sparsity.
  double mean_eta_a() const;
  double mean_eta_w() const;

  nlohmann::json to_json() const;
};

}  // namespace unifews

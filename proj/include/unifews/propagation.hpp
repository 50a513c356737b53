#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unifews/graph_core.hpp"
#include "unifews/sparsify.hpp"

namespace unifews {

enum class SchemeKind { SGC, APPNP, GenericSmoothing };

/// How a hop keeps node identity when edges are pruned.
enum class SkipMode {
  None,
  Residual,  ///< accumulator starts from the previous hop's row (default)
  Fallback,  ///< previous row is kept only when every edge of the row is pruned
};

struct PropagationScheme {
  SchemeKind kind = SchemeKind::SGC;
  int hops = 2;
  double alpha = 0.1;  // APPNP teleport
  double b = 0.5;      // GenericSmoothing step
  double c = 1.0;      // GenericSmoothing regularization
  SkipMode skip = SkipMode::Residual;

  void validate() const;
};

struct HopRecord {
  int hop = 0;
  std::size_t kept_edges = 0;
  double eta_a = 0.0;
  std::uint64_t flops = 0;
  PruneStats stats;
};

struct PropagationTrace {
  std::vector<HopRecord> hops;
  DenseMatrix embedding;
  MaskChain masks;
  /// Embedding after each hop, hop 0 = input. Filled only on request.
  std::vector<DenseMatrix> history;

  std::uint64_t total_flops() const;
  /// Mean of per-hop eta_a.
  double mean_eta_a() const;
  /// {"hops": [{hop, kept_edges, eta_a, flops}, ...], "total_flops": ...}
  std::string to_json() const;
};

struct PropagateOptions {
  bool keep_history = false;
  std::uint64_t flops_per_mac = 2;
};

/// Multi-hop sparsified propagation. Each hop first tightens the inherited
/// edge mask against the current embedding, then propagates over the kept
/// entries. T must be a normalized self-looped diffusion.
PropagationTrace propagate(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme,
                           const ThresholdPolicy& policy, const PropagateOptions& options = {});

/// One hop of T_hat * P under the given skip mode.
DenseMatrix propagate_hop(const CsrGraph& t, const EdgeMask& mask, const DenseMatrix& p, SkipMode skip,
                          FlopCounter* counter = nullptr);

/// (1-b) p - b c L_hat p + b x, where L_hat drops masked off-diagonal
/// entries of L and keeps its diagonal.
DenseMatrix smoothing_iteration(const CsrGraph& l, const DenseMatrix& p, const DenseMatrix& x, double b,
                                double c, const EdgeMask& mask, FlopCounter* counter = nullptr);

/// Writes an embedding in the bundle feature layout (little-endian f32, row-major).
void write_embedding_f32(const DenseMatrix& m, const std::string& path);

}  // namespace unifews

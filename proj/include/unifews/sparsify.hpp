#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unifews/graph_core.hpp"

namespace unifews {

/// Fixed-length bitset over matrix entries; bit set = entry kept.
class EntryMask {
 public:
  EntryMask() = default;

  static EntryMask full(std::size_t length);
  static EntryMask empty(std::size_t length);

  std::size_t length() const { return length_; }
  bool kept(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void keep(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void drop(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  std::size_t count() const;
  std::size_t dropped() const { return length_ - count(); }
  bool is_subset_of(const EntryMask& other) const;

  /// Length-prefixed serialization: "<length>:<hex words, little-endian bit order>".
  std::string encode() const;
  static EntryMask decode(const std::string& text);

  friend bool operator==(const EntryMask&, const EntryMask&) = default;

 private:
  explicit EntryMask(std::size_t length, bool value);

  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

using EdgeMask = EntryMask;

enum class GraphMode {
  MessageExact,  ///< threshold each message |T[u,v] p[v]| (single feature only)
  NodewisePre,   ///< threshold |T[u,v]| against delta_a / ||P[v,:]||
};

struct ThresholdPolicy {
  double delta_a = 0.0;
  double delta_w = 0.0;
  GraphMode graph_mode = GraphMode::NodewisePre;
  bool exempt_self_loops = false;

  void validate() const;
};

/// Pruning statistics; the edge and weight halves are filled by the
/// respective rule, the other half stays zero.
struct PruneStats {
  std::size_t q_a = 0;
  double eta_a = 0.0;
  std::size_t q_w = 0;
  double eta_w = 0.0;
};

/// Per-layer edge masks, each a subset of its predecessor.
struct MaskChain {
  std::vector<EdgeMask> layers;

  bool monotone() const;
  std::size_t total_kept() const;
};

enum class PruneDecision { Keep, Drop };

/// Keep iff |x| > delta; the boundary |x| == delta drops.
inline PruneDecision prune_threshold(double x, double delta) {
  return std::abs(x) > delta ? PruneDecision::Keep : PruneDecision::Drop;
}

/// Node-wise edge rule: keep (u,v) iff kept in prev and
/// |T[u,v]| * ||P[v,:]||_2 > delta_a (self-loops optionally exempt).
std::pair<EdgeMask, PruneStats> sparsify_edges_nodewise(const CsrGraph& t, const DenseMatrix& p,
                                                        double delta_a, const EdgeMask& prev,
                                                        bool exempt_self_loops = false);

/// Exact message rule for a single feature column: keep (u,v) iff kept in
/// prev and |T[u,v] * p[v]| > delta_a.
std::pair<EdgeMask, PruneStats> sparsify_edges_message(const CsrGraph& t, std::span<const double> p,
                                                       double delta_a, const EdgeMask& prev,
                                                       bool exempt_self_loops = false);

/// Row u of the result is sum over kept (u,v) of T[u,v] * P[v,:], plus P[u,:]
/// when skip_connection is set. Accumulation order matches spmm.
DenseMatrix masked_spmm(const CsrGraph& t, const EdgeMask& mask, const DenseMatrix& p,
                        bool skip_connection, FlopCounter* counter = nullptr);

struct WeightPruneResult {
  DenseMatrix pruned;
  EntryMask kept;  ///< over W's row-major positions
  PruneStats stats;
};

/// W_hat[j,i] = W[j,i] iff |W[j,i]| * ||P[:,j]||_2 > delta_w, else 0.
WeightPruneResult sparsify_weights(const DenseMatrix& w, const DenseMatrix& p, double delta_w);
/// Same rule with precomputed column norms of P.
WeightPruneResult sparsify_weights(const DenseMatrix& w, std::span<const double> column_norms,
                                   double delta_w);

/// Drops exactly round(eta * nnz) positions chosen uniformly without replacement.
EdgeMask random_mask(const CsrGraph& t, double eta, std::uint64_t seed);

/// T with the entries outside `mask` removed from the pattern.
CsrGraph apply_mask(const CsrGraph& t, const EdgeMask& mask);

}  // namespace unifews

#include "unifews/sparsify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "unifews/errors.hpp"
#include "unifews/random.hpp"

namespace unifews {

EntryMask::EntryMask(std::size_t length, bool value)
    : length_(length), words_((length + 63) / 64, value ? ~std::uint64_t{0} : 0) {
  if (value && (length & 63) != 0) words_.back() = (std::uint64_t{1} << (length & 63)) - 1;
}

EntryMask EntryMask::full(std::size_t length) { return EntryMask(length, true); }
EntryMask EntryMask::empty(std::size_t length) { return EntryMask(length, false); }

std::size_t EntryMask::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

bool EntryMask::is_subset_of(const EntryMask& other) const {
  if (length_ != other.length_) return false;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if ((words_[i] & ~other.words_[i]) != 0) return false;
  }
  return true;
}

std::string EntryMask::encode() const {
  std::string out = std::to_string(length_) + ":";
  char buf[17];
  for (auto w : words_) {
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(w));
    out += buf;
  }
  return out;
}

EntryMask EntryMask::decode(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InputError("EntryMask::decode: missing length prefix");
  std::size_t length = 0;
  try {
    length = std::stoull(text.substr(0, colon));
  } catch (const std::exception&) {
    throw InputError("EntryMask::decode: bad length prefix");
  }
  EntryMask mask(length, false);
  const std::string hex = text.substr(colon + 1);
  if (hex.size() != mask.words_.size() * 16) throw InputError("EntryMask::decode: payload length mismatch");
  for (std::size_t i = 0; i < mask.words_.size(); ++i) {
    std::uint64_t w = 0;
    for (std::size_t c = 0; c < 16; ++c) {
      const char ch = hex[i * 16 + c];
      int v;
      if (ch >= '0' && ch <= '9') v = ch - '0';
      else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
      else throw InputError("EntryMask::decode: invalid hex digit");
      w = (w << 4) | static_cast<std::uint64_t>(v);
    }
    mask.words_[i] = w;
  }
  if ((length & 63) != 0 && !mask.words_.empty() &&
      (mask.words_.back() >> (length & 63)) != 0) {
    throw InputError("EntryMask::decode: bits set beyond length");
  }
  return mask;
}

void ThresholdPolicy::validate() const {
  if (!(delta_a >= 0.0)) throw InputError("ThresholdPolicy: delta_a must be >= 0");
  if (!(delta_w >= 0.0)) throw InputError("ThresholdPolicy: delta_w must be >= 0");
}

bool MaskChain::monotone() const {
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (!layers[l].is_subset_of(layers[l - 1])) return false;
  }
  return true;
}

std::size_t MaskChain::total_kept() const {
  std::size_t total = 0;
  for (const auto& m : layers) total += m.count();
  return total;
}

namespace {

PruneStats edge_stats(const EdgeMask& mask) {
  PruneStats s;
  s.q_a = mask.dropped();
  s.eta_a = mask.length() == 0 ? 0.0 : static_cast<double>(s.q_a) / static_cast<double>(mask.length());
  return s;
}

void check_prev(const CsrGraph& t, const EdgeMask& prev) {
  if (prev.length() != t.nnz()) throw InputError("edge mask length does not match graph nnz");
}

}  // namespace

std::pair<EdgeMask, PruneStats> sparsify_edges_nodewise(const CsrGraph& t, const DenseMatrix& p,
                                                        double delta_a, const EdgeMask& prev,
                                                        bool exempt_self_loops) {
  check_prev(t, prev);
  if (p.rows() != t.n()) throw InputError("sparsify_edges_nodewise: P.rows must equal T.n");
  std::vector<double> norms(p.rows());
  for (std::size_t v = 0; v < p.rows(); ++v) norms[v] = p.row_norm(v);

  EdgeMask out = prev;
  const auto ci = t.col_idx();
  const auto vals = t.values();
  for (std::size_t u = 0; u < t.n(); ++u) {
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      if (!out.kept(k)) continue;
      if (exempt_self_loops && ci[k] == u) continue;
      if (!(std::abs(vals[k]) * norms[ci[k]] > delta_a)) out.drop(k);
    }
  }
  PruneStats stats = edge_stats(out);
  return {std::move(out), stats};
}

std::pair<EdgeMask, PruneStats> sparsify_edges_message(const CsrGraph& t, std::span<const double> p,
                                                       double delta_a, const EdgeMask& prev,
                                                       bool exempt_self_loops) {
  check_prev(t, prev);
  if (p.size() != t.n()) throw InputError("sparsify_edges_message: p length must equal T.n");
  EdgeMask out = prev;
  const auto ci = t.col_idx();
  const auto vals = t.values();
  for (std::size_t u = 0; u < t.n(); ++u) {
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      if (!out.kept(k)) continue;
      if (exempt_self_loops && ci[k] == u) continue;
      if (prune_threshold(vals[k] * p[ci[k]], delta_a) == PruneDecision::Drop) out.drop(k);
    }
  }
  PruneStats stats = edge_stats(out);
  return {std::move(out), stats};
}

DenseMatrix masked_spmm(const CsrGraph& t, const EdgeMask& mask, const DenseMatrix& p,
                        bool skip_connection, FlopCounter* counter) {
  check_prev(t, mask);
  if (t.n() != p.rows()) throw InputError("masked_spmm: T.n must equal P.rows");
  const std::size_t f = p.cols();
  DenseMatrix out = skip_connection ? p : DenseMatrix(t.n(), f);
  const auto ci = t.col_idx();
  const auto vals = t.values();
  std::uint64_t macs = 0;
  for (std::size_t u = 0; u < t.n(); ++u) {
    auto dst = out.row(u);
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      if (!mask.kept(k)) continue;
      const double w = vals[k];
      const auto src = p.row(ci[k]);
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
      macs += f;
    }
  }
  if (counter) {
    counter->mac(macs);
    if (skip_connection) counter->add(static_cast<std::uint64_t>(t.n()) * f);
  }
  return out;
}

WeightPruneResult sparsify_weights(const DenseMatrix& w, std::span<const double> column_norms,
                                   double delta_w) {
  if (column_norms.size() != w.rows()) {
    throw InputError("sparsify_weights: W.rows must equal the embedding width");
  }
  WeightPruneResult res{w, EntryMask::full(w.size()), {}};
  for (std::size_t j = 0; j < w.rows(); ++j) {
    const double norm = column_norms[j];
    for (std::size_t i = 0; i < w.cols(); ++i) {
      if (!(std::abs(w(j, i)) * norm > delta_w)) {
        res.pruned(j, i) = 0.0;
        res.kept.drop(j * w.cols() + i);
      }
    }
  }
  res.stats.q_w = res.kept.dropped();
  res.stats.eta_w = w.size() == 0 ? 0.0 : static_cast<double>(res.stats.q_w) / static_cast<double>(w.size());
  return res;
}

WeightPruneResult sparsify_weights(const DenseMatrix& w, const DenseMatrix& p, double delta_w) {
  if (p.cols() != w.rows()) throw InputError("sparsify_weights: W.rows must equal P.cols");
  const auto norms = p.column_norms();
  return sparsify_weights(w, norms, delta_w);
}

EdgeMask random_mask(const CsrGraph& t, double eta, std::uint64_t seed) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw InputError("random_mask: eta must lie in [0,1]");
  const std::size_t nnz = t.nnz();
  const auto drop = static_cast<std::size_t>(std::llround(eta * static_cast<double>(nnz)));
  std::vector<std::size_t> order(nnz);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `drop` slots are a uniform sample.
  for (std::size_t i = 0; i < drop; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(nnz - i));
    std::swap(order[i], order[j]);
  }
  EdgeMask mask = EdgeMask::full(nnz);
  for (std::size_t i = 0; i < drop; ++i) mask.drop(order[i]);
  return mask;
}

CsrGraph apply_mask(const CsrGraph& t, const EdgeMask& mask) {
  check_prev(t, mask);
  std::vector<std::size_t> row_ptr(t.n() + 1, 0);
  std::vector<NodeId> cols;
  std::vector<double> vals;
  const auto ci = t.col_idx();
  const auto tv = t.values();
  for (std::size_t u = 0; u < t.n(); ++u) {
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      if (!mask.kept(k)) continue;
      cols.push_back(ci[k]);
      vals.push_back(tv[k]);
    }
    row_ptr[u + 1] = cols.size();
  }
  return CsrGraph(t.n(), std::move(row_ptr), std::move(cols), std::move(vals));
}

}  // namespace unifews

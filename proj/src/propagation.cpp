#include "unifews/propagation.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "unifews/errors.hpp"
#include "unifews/io.hpp"

namespace unifews {

void PropagationScheme::validate() const {
  if (hops < 1) throw InputError("PropagationScheme: hops must be positive");
  switch (kind) {
    case SchemeKind::SGC:
      break;
    case SchemeKind::APPNP:
      if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("PropagationScheme: APPNP requires 0 < alpha <= 1");
      break;
    case SchemeKind::GenericSmoothing:
      if (!(b > 0.0 && b <= 1.0)) throw InputError("PropagationScheme: smoothing requires 0 < b <= 1");
      if (!(c >= 0.0)) throw InputError("PropagationScheme: smoothing requires c >= 0");
      break;
  }
}

std::uint64_t PropagationTrace::total_flops() const {
  std::uint64_t total = 0;
  for (const auto& h : hops) total += h.flops;
  return total;
}

double PropagationTrace::mean_eta_a() const {
  if (hops.empty()) return 0.0;
  double s = 0.0;
  for (const auto& h : hops) s += h.eta_a;
  return s / static_cast<double>(hops.size());
}

std::string PropagationTrace::to_json() const {
  nlohmann::json j;
  j["hops"] = nlohmann::json::array();
  for (const auto& h : hops) {
    j["hops"].push_back({{"hop", h.hop}, {"kept_edges", h.kept_edges}, {"eta_a", h.eta_a}, {"flops", h.flops}});
  }
  j["total_flops"] = total_flops();
  j["mean_eta_a"] = mean_eta_a();
  return j.dump(2);
}

DenseMatrix propagate_hop(const CsrGraph& t, const EdgeMask& mask, const DenseMatrix& p, SkipMode skip,
                          FlopCounter* counter) {
  switch (skip) {
    case SkipMode::None:
      return masked_spmm(t, mask, p, false, counter);
    case SkipMode::Residual:
      return masked_spmm(t, mask, p, true, counter);
    case SkipMode::Fallback: {
      DenseMatrix out = masked_spmm(t, mask, p, false, counter);
      for (std::size_t u = 0; u < t.n(); ++u) {
        bool any = false;
        for (std::size_t k = t.row_begin(u); k < t.row_end(u) && !any; ++k) any = mask.kept(k);
        if (!any) {
          const auto src = p.row(u);
          std::copy(src.begin(), src.end(), out.row(u).begin());
        }
      }
      return out;
    }
  }
  return {};
}

DenseMatrix smoothing_iteration(const CsrGraph& l, const DenseMatrix& p, const DenseMatrix& x, double b,
                                double c, const EdgeMask& mask, FlopCounter* counter) {
  if (p.rows() != l.n() || x.rows() != l.n() || p.cols() != x.cols()) {
    throw InputError("smoothing_iteration: shape mismatch");
  }
  if (mask.length() != l.nnz()) throw InputError("smoothing_iteration: mask length does not match L");
  const std::size_t f = p.cols();
  const auto ci = l.col_idx();
  const auto vals = l.values();
  DenseMatrix out(l.n(), f);
  std::vector<double> lp(f);
  std::uint64_t macs = 0;
  for (std::size_t u = 0; u < l.n(); ++u) {
    std::fill(lp.begin(), lp.end(), 0.0);
    for (std::size_t k = l.row_begin(u); k < l.row_end(u); ++k) {
      if (ci[k] != u && !mask.kept(k)) continue;
      const double w = vals[k];
      const auto src = p.row(ci[k]);
      for (std::size_t j = 0; j < f; ++j) lp[j] += w * src[j];
      macs += f;
    }
    const auto pu = p.row(u);
    const auto xu = x.row(u);
    auto dst = out.row(u);
    for (std::size_t j = 0; j < f; ++j) dst[j] = (1.0 - b) * pu[j] - b * c * lp[j] + b * xu[j];
  }
  if (counter) {
    counter->mac(macs);
    counter->add(static_cast<std::uint64_t>(l.n()) * f);
  }
  return out;
}

PropagationTrace propagate(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme,
                           const ThresholdPolicy& policy, const PropagateOptions& options) {
  scheme.validate();
  policy.validate();
  if (x.rows() != t.n()) throw InputError("propagate: X.rows must equal T.n");
  if (!t.has_self_loops()) throw InputError("propagate: diffusion matrix must be self-looped");
  if (policy.graph_mode == GraphMode::MessageExact && x.cols() != 1) {
    throw InputError("propagate: exact message thresholding needs a single feature column");
  }

  const bool smoothing = scheme.kind == SchemeKind::GenericSmoothing;
  const CsrGraph lap = smoothing ? laplacian(t) : CsrGraph{};
  // The Laplacian diagonal is never pruned, so the mask bit for it stays set.
  const bool exempt = policy.exempt_self_loops || smoothing;

  PropagationTrace trace;
  DenseMatrix p = x;
  if (options.keep_history) trace.history.push_back(p);
  EdgeMask mask = EdgeMask::full(t.nnz());

  for (int hop = 0; hop < scheme.hops; ++hop) {
    PruneStats stats;
    if (policy.graph_mode == GraphMode::MessageExact) {
      const auto col = p.column(0);
      std::tie(mask, stats) = sparsify_edges_message(t, col, policy.delta_a, mask, exempt);
    } else {
      std::tie(mask, stats) = sparsify_edges_nodewise(t, p, policy.delta_a, mask, exempt);
    }

    FlopCounter counter{0, options.flops_per_mac};
    switch (scheme.kind) {
      case SchemeKind::SGC:
        p = propagate_hop(t, mask, p, scheme.skip, &counter);
        break;
      case SchemeKind::APPNP: {
        // The teleport term alpha * X carries node identity; no residual.
        DenseMatrix next = masked_spmm(t, mask, p, false, &counter);
        const double keep = 1.0 - scheme.alpha;
        auto nd = next.data();
        const auto xd = x.data();
        for (std::size_t i = 0; i < nd.size(); ++i) nd[i] = keep * nd[i] + scheme.alpha * xd[i];
        counter.add(static_cast<std::uint64_t>(t.n()) * x.cols());
        p = std::move(next);
        break;
      }
      case SchemeKind::GenericSmoothing:
        p = smoothing_iteration(lap, p, x, scheme.b, scheme.c, mask, &counter);
        break;
    }

    if (!p.all_finite()) {
      std::ostringstream msg;
      msg << "propagate: non-finite embedding after hop " << hop;
      throw NumericalError(msg.str());
    }

    trace.hops.push_back({hop, mask.count(), stats.eta_a, counter.flops, stats});
    trace.masks.layers.push_back(mask);
    if (options.keep_history) trace.history.push_back(p);
  }
  trace.embedding = std::move(p);
  return trace;
}

void write_embedding_f32(const DenseMatrix& m, const std::string& path) {
  std::vector<float> buf(m.size());
  const auto d = m.data();
  for (std::size_t i = 0; i < d.size(); ++i) buf[i] = static_cast<float>(d[i]);
  write_f32_file(path, buf);
}

}  // namespace unifews

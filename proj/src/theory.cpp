#include "unifews/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include <Eigen/Dense>

#include "unifews/errors.hpp"
#include "unifews/random.hpp"

namespace unifews {

namespace {

Eigen::MatrixXd to_eigen(const CsrGraph& g) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.n()), static_cast<Eigen::Index>(g.n()));
  const auto ci = g.col_idx();
  const auto vals = g.values();
  for (std::size_t u = 0; u < g.n(); ++u)
    for (std::size_t k = g.row_begin(u); k < g.row_end(u); ++k) m(u, ci[k]) += vals[k];
  return m;
}

bool is_symmetric(const CsrGraph& g) {
  const auto ci = g.col_idx();
  const auto vals = g.values();
  for (std::size_t u = 0; u < g.n(); ++u) {
    for (std::size_t k = g.row_begin(u); k < g.row_end(u); ++k) {
      if (g.at(ci[k], u) != vals[k]) return false;
    }
  }
  return true;
}

std::vector<double> csr_apply(const CsrGraph& g, std::span<const double> v) {
  std::vector<double> out(g.n(), 0.0);
  const auto ci = g.col_idx();
  const auto vals = g.values();
  for (std::size_t u = 0; u < g.n(); ++u) {
    double s = 0.0;
    for (std::size_t k = g.row_begin(u); k < g.row_end(u); ++k) s += vals[k] * v[ci[k]];
    out[u] = s;
  }
  return out;
}

std::vector<double> csr_apply_transpose(const CsrGraph& g, std::span<const double> v) {
  std::vector<double> out(g.n(), 0.0);
  const auto ci = g.col_idx();
  const auto vals = g.values();
  for (std::size_t u = 0; u < g.n(); ++u)
    for (std::size_t k = g.row_begin(u); k < g.row_end(u); ++k) out[ci[k]] += vals[k] * v[u];
  return out;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct PowerResult {
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Rayleigh-quotient power iteration for the top eigenvalue of a PSD operator.
template <class Apply>
PowerResult power_iteration(std::size_t n, Apply apply, const SpectralOptions& opt) {
  PowerResult res;
  Rng rng(opt.seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  double nv = norm2(v);
  for (double& x : v) x /= nv;
  double prev = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    std::vector<double> w = apply(v);
    const double lambda = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
    res.lambda = lambda;
    res.iterations = it;
    res.residual = std::sqrt(r);
    const double nw = norm2(w);
    if (nw == 0.0) {
      res.lambda = 0.0;
      res.converged = true;
      return res;
    }
    if (it > 1 && std::abs(lambda - prev) <= opt.tolerance * std::abs(lambda)) {
      res.converged = true;
      return res;
    }
    prev = lambda;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return res;
}

}  // namespace

DenseMatrix closed_form_solution(const CsrGraph& l, const DenseMatrix& x, double c) {
  if (!(c >= 0.0)) throw InputError("closed_form_solution: c must be non-negative");
  if (l.n() > kDenseSolveLimit) {
    throw InputError("closed_form_solution: n = " + std::to_string(l.n()) + " exceeds the dense limit");
  }
  if (x.rows() != l.n()) throw InputError("closed_form_solution: x.rows must equal L.n");
  DenseMatrix a = DenseMatrix::identity(l.n());
  const auto ci = l.col_idx();
  const auto vals = l.values();
  for (std::size_t u = 0; u < l.n(); ++u)
    for (std::size_t k = l.row_begin(u); k < l.row_end(u); ++k) a(u, ci[k]) += c * vals[k];
  return dense_solve(a, x);
}

nlohmann::json SimilarityReport::to_json() const {
  return {{"epsilon", epsilon},     {"quad_form_sup", quad_form_sup}, {"symmetric", symmetric},
          {"q_a", q_a},             {"delta_a", delta_a},             {"bound_holds", bound_holds},
          {"converged", converged}, {"iterations", iterations},       {"residual", residual},
          {"quad_form", quad_form}, {"chain_middle", chain_middle},   {"chain_bound", chain_bound},
          {"epsilon_claim", epsilon_claim}};
}

CsrGraph laplacian_difference(const CsrGraph& l, const CsrGraph& l_hat) {
  if (l.n() != l_hat.n()) throw InputError("laplacian_difference: node counts differ");
  const std::size_t n = l.n();
  std::vector<std::size_t> row_ptr{0};
  std::vector<NodeId> cols;
  std::vector<double> vals;
  const auto ac = l.col_idx();
  const auto av = l.values();
  const auto bc = l_hat.col_idx();
  const auto bv = l_hat.values();
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t i = l.row_begin(u), j = l_hat.row_begin(u);
    const std::size_t ie = l.row_end(u), je = l_hat.row_end(u);
    while (i < ie || j < je) {
      NodeId col;
      double v;
      if (j == je || (i < ie && ac[i] < bc[j])) {
        col = ac[i];
        v = av[i++];
      } else if (i == ie || bc[j] < ac[i]) {
        col = bc[j];
        v = -bv[j++];
      } else {
        col = ac[i];
        v = av[i++] - bv[j++];
      }
      if (v != 0.0) {
        cols.push_back(col);
        vals.push_back(v);
      }
    }
    row_ptr.push_back(cols.size());
  }
  return CsrGraph(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

SimilarityReport spectral_epsilon(const CsrGraph& l, const CsrGraph& l_hat, const SpectralOptions& options) {
  const CsrGraph diff = laplacian_difference(l, l_hat);
  SimilarityReport rep;
  rep.symmetric = is_symmetric(diff);
  if (diff.nnz() == 0) return rep;
  const std::size_t n = diff.n();

  if (!options.force_power && n <= options.dense_limit) {
    const Eigen::MatrixXd u = to_eigen(diff);
    const Eigen::MatrixXd sym = 0.5 * (u + u.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    rep.quad_form_sup = es.eigenvalues().cwiseAbs().maxCoeff();
    if (rep.symmetric) {
      rep.epsilon = rep.quad_form_sup;
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(u);
      rep.epsilon = svd.singularValues()(0);
    }
    return rep;
  }

  const CsrGraph diff_t = [&] {
    // Explicit transpose keeps the power iteration to CSR row sweeps.
    std::vector<double> v;
    const auto ci = diff.col_idx();
    const auto vals = diff.values();
    std::vector<std::tuple<NodeId, NodeId, double>> entries;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t k = diff.row_begin(u); k < diff.row_end(u); ++k)
        entries.emplace_back(ci[k], static_cast<NodeId>(u), vals[k]);
    std::sort(entries.begin(), entries.end());
    std::vector<std::size_t> rp(n + 1, 0);
    std::vector<NodeId> cols;
    for (const auto& [r, c, val] : entries) {
      ++rp[r + 1];
      cols.push_back(c);
      v.push_back(val);
    }
    for (std::size_t i = 0; i < n; ++i) rp[i + 1] += rp[i];
    return CsrGraph(n, std::move(rp), std::move(cols), std::move(v));
  }();

  const PowerResult gram = power_iteration(
      n, [&](const std::vector<double>& v) { return csr_apply(diff_t, csr_apply(diff, v)); }, options);
  rep.epsilon = std::sqrt(std::max(0.0, gram.lambda));
  rep.converged = gram.converged;
  rep.iterations = gram.iterations;
  rep.residual = gram.residual;
  if (rep.symmetric) {
    rep.quad_form_sup = rep.epsilon;
  } else {
    // Spectral radius of S = (U + U^T)/2 via the top eigenvalue of S^2.
    auto apply_s = [&](std::span<const double> v) {
      std::vector<double> a = csr_apply(diff, v);
      const std::vector<double> b = csr_apply_transpose(diff, v);
      for (std::size_t i = 0; i < n; ++i) a[i] = 0.5 * (a[i] + b[i]);
      return a;
    };
    const PowerResult sq =
        power_iteration(n, [&](const std::vector<double>& v) { return apply_s(apply_s(v)); }, options);
    rep.quad_form_sup = std::sqrt(std::max(0.0, sq.lambda));
    rep.converged = rep.converged && sq.converged;
    rep.iterations = std::max(rep.iterations, sq.iterations);
    rep.residual = std::max(rep.residual, sq.residual);
  }
  return rep;
}

SimilarityReport check_theorem_4_3(const CsrGraph& t, std::span<const double> p, double delta_a) {
  if (p.size() != t.n()) throw InputError("check_theorem_4_3: p length must equal T.n");
  if (!(delta_a >= 0.0)) throw InputError("check_theorem_4_3: delta_a must be non-negative");
  if (std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; })) {
    throw InputError("check_theorem_4_3: p is zero, the bound is vacuous");
  }
  const auto [mask, stats] = sparsify_edges_message(t, p, delta_a, EdgeMask::full(t.nnz()));

  // U = L - L_hat = T_hat - T holds the negated pruned entries. The chain is
  // evaluated in extended precision and compared without slack.
  using Real = long double;
  const auto ci = t.col_idx();
  const auto vals = t.values();
  std::vector<Real> up(t.n(), 0.0L);
  for (std::size_t u = 0; u < t.n(); ++u) {
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      if (mask.kept(k)) continue;
      up[u] -= static_cast<Real>(vals[k] * p[ci[k]]);
    }
  }
  Real pnorm2 = 0.0L, quad = 0.0L, l1 = 0.0L;
  for (std::size_t u = 0; u < t.n(); ++u) {
    pnorm2 += static_cast<Real>(p[u]) * p[u];
    quad += static_cast<Real>(p[u]) * up[u];
    l1 += std::fabs(up[u]);
  }
  const Real pnorm = std::sqrt(pnorm2);
  const Real lhs = std::fabs(quad);
  const Real mid = pnorm * l1;
  const Real rhs = static_cast<Real>(stats.q_a) * delta_a * pnorm;

  SimilarityReport rep;
  rep.q_a = stats.q_a;
  rep.delta_a = delta_a;
  rep.quad_form = static_cast<double>(lhs);
  rep.chain_middle = static_cast<double>(mid);
  rep.chain_bound = static_cast<double>(rhs);
  rep.epsilon_claim = static_cast<double>(static_cast<Real>(stats.q_a) * delta_a / pnorm);
  rep.quad_form_sup = static_cast<double>(lhs / pnorm2);
  rep.epsilon = rep.epsilon_claim;
  rep.bound_holds = lhs <= mid && mid <= rhs;
  return rep;
}

nlohmann::json ApproxReport::to_json() const {
  return {{"c", c},         {"epsilon", epsilon}, {"err", err},
          {"bound", bound}, {"within_bound", within_bound}, {"p_star", p_star},
          {"p_hat_star", p_hat_star}};
}

ApproxReport check_theorem_4_2(const CsrGraph& l, const CsrGraph& l_hat, std::span<const double> x, double c,
                               const SpectralOptions& options) {
  if (x.size() != l.n()) throw InputError("check_theorem_4_2: x length must equal L.n");
  const DenseMatrix xm(x.size(), 1, std::vector<double>(x.begin(), x.end()));
  const DenseMatrix ps = closed_form_solution(l, xm, c);
  const DenseMatrix phs = closed_form_solution(l_hat, xm, c);
  ApproxReport rep;
  rep.c = c;
  rep.p_star = ps.column(0);
  rep.p_hat_star = phs.column(0);
  rep.epsilon = spectral_epsilon(l, l_hat, options).epsilon;
  rep.err = (phs - ps).frobenius_norm();
  rep.bound = c * rep.epsilon * ps.frobenius_norm();
  rep.within_bound = rep.err <= rep.bound + 1e-9;
  return rep;
}

CsrGraph pruned_laplacian(const CsrGraph& t, const EdgeMask& mask) {
  return laplacian(apply_mask(t, mask));
}

std::string curve_csv(std::span<const CurvePoint> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "delta_a,hop,value\n";
  for (const auto& r : rows) out << r.delta_a << ',' << r.hop << ',' << r.value << '\n';
  return out.str();
}

std::vector<DenseMatrix> exact_history(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme) {
  scheme.validate();
  const EdgeMask full = EdgeMask::full(t.nnz());
  const CsrGraph lap = scheme.kind == SchemeKind::GenericSmoothing ? laplacian(t) : CsrGraph{};
  std::vector<DenseMatrix> hist{x};
  DenseMatrix p = x;
  for (int hop = 0; hop < scheme.hops; ++hop) {
    switch (scheme.kind) {
      case SchemeKind::SGC:
        p = propagate_hop(t, full, p, scheme.skip);
        break;
      case SchemeKind::APPNP: {
        DenseMatrix next = spmm(t, p);
        auto nd = next.data();
        const auto xd = x.data();
        for (std::size_t i = 0; i < nd.size(); ++i) nd[i] = (1.0 - scheme.alpha) * nd[i] + scheme.alpha * xd[i];
        p = std::move(next);
        break;
      }
      case SchemeKind::GenericSmoothing:
        p = smoothing_iteration(lap, p, x, scheme.b, scheme.c, EdgeMask::full(lap.nnz()));
        break;
    }
    hist.push_back(p);
  }
  return hist;
}

std::vector<CurvePoint> multi_hop_error_curve(const CsrGraph& t, const DenseMatrix& x,
                                              const PropagationScheme& scheme,
                                              std::span<const double> delta_grid) {
  if (t.n() > kDenseSolveLimit) throw InputError("multi_hop_error_curve: graph too large");
  const auto exact = exact_history(t, x, scheme);
  std::vector<CurvePoint> rows;
  PropagateOptions opts;
  opts.keep_history = true;
  for (double delta : delta_grid) {
    ThresholdPolicy policy;
    policy.delta_a = delta;
    const PropagationTrace tr = propagate(t, x, scheme, policy, opts);
    for (std::size_t h = 0; h < tr.history.size(); ++h) {
      rows.push_back({delta, static_cast<int>(h), relative_frobenius_error(tr.history[h], exact[h])});
    }
  }
  return rows;
}

std::vector<CurvePoint> distance_curve(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme,
                                       std::span<const double> delta_grid, const DenseMatrix& target) {
  if (target.rows() != x.rows() || target.cols() != x.cols()) throw InputError("distance_curve: target shape");
  std::vector<CurvePoint> rows;
  PropagateOptions opts;
  opts.keep_history = true;
  for (double delta : delta_grid) {
    ThresholdPolicy policy;
    policy.delta_a = delta;
    const PropagationTrace tr = propagate(t, x, scheme, policy, opts);
    for (std::size_t h = 0; h < tr.history.size(); ++h) {
      rows.push_back({delta, static_cast<int>(h), (tr.history[h] - target).frobenius_norm()});
    }
  }
  return rows;
}

std::vector<CurvePoint> smoothing_distance(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme,
                                           std::span<const double> delta_grid, double c) {
  const DenseMatrix p_star = closed_form_solution(laplacian(t), x, c);
  return distance_curve(t, x, scheme, delta_grid, p_star);
}

double smoothing_objective(const CsrGraph& l, const DenseMatrix& p, const DenseMatrix& x, double c) {
  const DenseMatrix lp = spmm(l, p);
  double fit = 0.0, reg = 0.0;
  const auto pd = p.data();
  const auto xd = x.data();
  const auto ld = lp.data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    fit += (pd[i] - xd[i]) * (pd[i] - xd[i]);
    reg += pd[i] * ld[i];
  }
  return fit + c * reg;
}

DenseMatrix oversmoothing_limit(const CsrGraph& adjacency, const DenseMatrix& x, double r) {
  if (!adjacency.has_self_loops()) throw InputError("oversmoothing_limit: adjacency must be self-looped");
  if (x.rows() != adjacency.n()) throw InputError("oversmoothing_limit: x.rows must equal n");
  const std::size_t n = adjacency.n();
  const auto d = DegreeVector::of(adjacency).d;
  std::vector<std::size_t> comp(n, n);
  std::size_t ncomp = 0;
  const auto ci = adjacency.col_idx();
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != n) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t k = adjacency.row_begin(u); k < adjacency.row_end(u); ++k) {
        if (comp[ci[k]] == n) {
          comp[ci[k]] = ncomp;
          stack.push_back(ci[k]);
        }
      }
    }
    ++ncomp;
  }
  const std::size_t f = x.cols();
  DenseMatrix proj(ncomp, f);
  std::vector<double> dsum(ncomp, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    const double w = std::pow(d[u], 1.0 - r);
    dsum[comp[u]] += d[u];
    const auto xu = x.row(u);
    auto dst = proj.row(comp[u]);
    for (std::size_t j = 0; j < f; ++j) dst[j] += w * xu[j];
  }
  DenseMatrix out(n, f);
  for (std::size_t u = 0; u < n; ++u) {
    const double s = std::pow(d[u], r) / dsum[comp[u]];
    const auto src = proj.row(comp[u]);
    auto dst = out.row(u);
    for (std::size_t j = 0; j < f; ++j) dst[j] = s * src[j];
  }
  return out;
}

CsrGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("erdos_renyi: p must lie in [0, 1]");
  Rng rng(seed);
  std::vector<Arc> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  return CsrGraph::from_undirected_edges(n, edges);
}

TheoryInstance random_instance(std::size_t n, double edge_prob, std::uint64_t seed, double r, bool nonnegative) {
  TheoryInstance inst;
  inst.adjacency = add_self_loops(erdos_renyi(n, edge_prob, seed));
  inst.t = normalize_adjacency(inst.adjacency, r);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  inst.x.resize(n);
  for (double& v : inst.x) v = nonnegative ? rng.uniform() : rng.uniform(-1.0, 1.0);
  return inst;
}

double max_eigenvalue(const CsrGraph& sym) {
  const Eigen::MatrixXd m = to_eigen(sym);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace unifews

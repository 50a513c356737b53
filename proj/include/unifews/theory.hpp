#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unifews/graph_core.hpp"
#include "unifews/propagation.hpp"
#include "unifews/sparsify.hpp"

namespace unifews {

/// Largest dense size accepted by closed_form_solution.
inline constexpr std::size_t kDenseSolveLimit = 4096;

/// p* = (I + cL)^{-1} x by dense LU. Throws InputError above kDenseSolveLimit
/// nodes or for negative c.
DenseMatrix closed_form_solution(const CsrGraph& l, const DenseMatrix& x, double c);

struct SpectralOptions {
  std::size_t dense_limit = 512;  ///< above this, power iteration
  bool force_power = false;
  double tolerance = 1e-8;
  int max_iterations = 10000;
  std::uint64_t seed = 7;  ///< start vector of the power iteration
};

struct SimilarityReport {
  double epsilon = 0.0;        ///< ||Upsilon||_2
  double quad_form_sup = 0.0;  ///< sup |x^T Upsilon x| / ||x||^2, i.e. spectral radius of the symmetric part
  bool symmetric = true;
  std::size_t q_a = 0;
  double delta_a = 0.0;
  bool bound_holds = true;

  // Power-iteration bookkeeping (dense path: converged, 0 iterations).
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;

  // Sparsifier-chain witnesses, filled by check_theorem_4_3.
  double quad_form = 0.0;      ///< |p^T Upsilon p|
  double chain_middle = 0.0;   ///< ||p|| * ||Upsilon p||_1
  double chain_bound = 0.0;    ///< q_a * delta_a * ||p||
  double epsilon_claim = 0.0;  ///< q_a * delta_a / ||p||

  nlohmann::json to_json() const;
};

/// Upsilon = L - L_hat on the union pattern; exact zeros are dropped.
CsrGraph laplacian_difference(const CsrGraph& l, const CsrGraph& l_hat);

/// Operator norm of L - L_hat. Symmetric differences use max |eigenvalue|;
/// asymmetric ones report the largest singular value as epsilon and the
/// symmetric part's spectral radius as quad_form_sup.
SimilarityReport spectral_epsilon(const CsrGraph& l, const CsrGraph& l_hat, const SpectralOptions& options = {});

/// Prunes T against single-feature p with the exact message rule and checks
/// |p^T U p| <= ||p|| ||U p||_1 <= q_a delta_a ||p|| on the computed values,
/// where U = L - L_hat = T_hat - T. Throws InputError for p == 0.
SimilarityReport check_theorem_4_3(const CsrGraph& t, std::span<const double> p, double delta_a);

struct ApproxReport {
  double c = 0.0;
  std::vector<double> p_star;
  std::vector<double> p_hat_star;
  double epsilon = 0.0;
  double err = 0.0;    ///< ||p_hat* - p*||
  double bound = 0.0;  ///< c * epsilon * ||p*||
  bool within_bound = true;

  nlohmann::json to_json() const;
};

/// Solves both smoothing problems in closed form and compares the gap with
/// c * epsilon * ||p*|| (+1e-9 slack), epsilon from spectral_epsilon.
ApproxReport check_theorem_4_2(const CsrGraph& l, const CsrGraph& l_hat, std::span<const double> x, double c,
                               const SpectralOptions& options = {});

/// L_hat for a pruned diffusion: I - T restricted to the kept entries.
CsrGraph pruned_laplacian(const CsrGraph& t, const EdgeMask& mask);

/// One row of a {delta_a, hop, value} table.
struct CurvePoint {
  double delta_a = 0.0;
  int hop = 0;
  double value = 0.0;
};

std::string curve_csv(std::span<const CurvePoint> rows);

/// Embeddings after every hop (hop 0 = X) with nothing pruned.
std::vector<DenseMatrix> exact_history(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme);

/// Relative error ||P_hat_l - P_l||_F / ||P_l||_F between sparsified and
/// unpruned propagation, for every delta_a and hop 0..L.
std::vector<CurvePoint> multi_hop_error_curve(const CsrGraph& t, const DenseMatrix& x,
                                              const PropagationScheme& scheme,
                                              std::span<const double> delta_grid);

/// ||P_hat_l - target||_F for every delta_a and hop 0..L.
std::vector<CurvePoint> distance_curve(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme,
                                       std::span<const double> delta_grid, const DenseMatrix& target);

/// distance_curve against the closed-form optimum (I + cL)^{-1} X.
std::vector<CurvePoint> smoothing_distance(const CsrGraph& t, const DenseMatrix& x, const PropagationScheme& scheme,
                                           std::span<const double> delta_grid, double c);

/// ||p - x||^2 + c p^T L p, summed over feature columns.
double smoothing_objective(const CsrGraph& l, const DenseMatrix& p, const DenseMatrix& x, double c);

/// Limit of A_norm^k X for the r-normalization of a self-looped adjacency:
/// per connected component, d^r (d^{1-r}^T X) / sum(d).
DenseMatrix oversmoothing_limit(const CsrGraph& adjacency, const DenseMatrix& x, double r);

/// Undirected G(n, p) without self-loops, both arcs stored.
CsrGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

/// Seeded desk-scale instance: G(n, p) plus self-loops, its r-normalized
/// diffusion and a signal drawn from [-1, 1) (or [0, 1) when nonnegative).
struct TheoryInstance {
  CsrGraph adjacency;
  CsrGraph t;
  std::vector<double> x;
};

TheoryInstance random_instance(std::size_t n, double edge_prob, std::uint64_t seed, double r = 0.5,
                               bool nonnegative = false);

/// Largest eigenvalue of a symmetric CSR matrix (dense, small n).
double max_eigenvalue(const CsrGraph& sym);

}  // namespace unifews

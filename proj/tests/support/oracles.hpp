#pragma once

// Reference implementations used as test oracles. They work on plain
// row-major vectors and never call the engine's kernels.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "unifews/graph_core.hpp"

namespace oracle {

struct Dense {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Dense() = default;
  Dense(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

Dense from(const unifews::DenseMatrix& m);
unifews::DenseMatrix to_matrix(const Dense& d);

/// Triple loop, no zero skipping.
Dense matmul(const Dense& a, const Dense& b);
Dense add(const Dense& a, const Dense& b);
Dense scale(const Dense& a, double s);
double frob(const Dense& a);
double rel_err(const Dense& got, const Dense& want);

/// D^{r-1} (A + I) D^{-r} for an undirected edge list, built densely.
Dense normalized_adjacency(std::size_t n, const std::vector<unifews::Arc>& undirected, double r);

/// Dense copy of a CSR matrix with the entries outside keep[] zeroed.
Dense masked_dense(const unifews::CsrGraph& t, const std::vector<bool>& keep);

/// Gauss-Jordan inverse with full pivoting.
Dense inverse(const Dense& a);

/// ReLU GCN forward on dense matrices: H <- act(T_eff H W), last layer linear.
/// residual adds H before the transform (T_eff = T + I).
Dense gcn_forward(const Dense& t, const Dense& x, const std::vector<Dense>& weights, bool residual);

}  // namespace oracle

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace unifews {

using NodeId = std::uint32_t;
using Arc = std::pair<NodeId, NodeId>;

/// Operation counter threaded through the kernels. One multiply-add counts
/// as `flops_per_mac` FLOPs (2 by default); plain additions count as 1.
struct FlopCounter {
  std::uint64_t flops = 0;
  std::uint64_t flops_per_mac = 2;

  void mac(std::uint64_t count) { flops += flops_per_mac * count; }
  void add(std::uint64_t count) { flops += count; }
};

/// Row-major real matrix. Used for features, embeddings, representations
/// and weights.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Column j as a vector copy.
  std::vector<double> column(std::size_t j) const;

  double frobenius_norm() const;
  /// Euclidean norm of row r.
  double row_norm(std::size_t r) const;
  /// Euclidean norm of every column.
  std::vector<double> column_norms() const;
  bool all_finite() const;

  DenseMatrix transpose() const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

/// ||a - b||_F / ||b||_F, or ||a - b||_F when b is zero.
double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& b);

/// Compressed sparse row matrix over n nodes. Immutable once constructed;
/// the constructor enforces the structural invariants (sorted unique columns
/// per row, consistent offsets, diagonal present when flagged self-looped).
class CsrGraph {
 public:
  CsrGraph() = default;
  CsrGraph(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx,
           std::vector<double> values);

  /// Unit-weight graph from directed arcs. Duplicate arcs are rejected.
  static CsrGraph from_arcs(std::size_t n, std::span<const Arc> arcs);
  /// Unit-weight graph with both directions of every undirected edge.
  static CsrGraph from_undirected_edges(std::size_t n, std::span<const Arc> edges);

  std::size_t n() const { return n_; }
  std::size_t nnz() const { return col_idx_.size(); }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const NodeId> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  std::size_t row_begin(std::size_t u) const { return row_ptr_[u]; }
  std::size_t row_end(std::size_t u) const { return row_ptr_[u + 1]; }

  bool has_self_loops() const { return has_self_loops_; }
  /// Pattern and values symmetric.
  bool symmetric() const { return symmetric_; }

  /// Position of (u, v) in the nnz arrays, or nnz() when absent.
  std::size_t find(std::size_t u, std::size_t v) const;
  double at(std::size_t u, std::size_t v) const;

  /// Same pattern, new values.
  CsrGraph with_values(std::vector<double> values) const;

  /// Re-runs the structural checks; throws InputError on violation.
  void validate() const;

  /// Dense n x n copy (tests and small-n oracles).
  DenseMatrix to_dense() const;

 private:
  void compute_flags();

  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_idx_;
  std::vector<double> values_;
  bool has_self_loops_ = false;
  bool symmetric_ = true;
};

/// Per-node degree (row sum of stored weights, self-loop included).
struct DegreeVector {
  std::vector<double> d;

  static DegreeVector of(const CsrGraph& g);
};

CsrGraph add_self_loops(const CsrGraph& g);

/// D^{r-1} A D^{-r}. Requires a self-looped graph and r in [0, 1].
CsrGraph normalize_adjacency(const CsrGraph& g, double r);

/// I - A_norm with an explicit diagonal.
CsrGraph laplacian(const CsrGraph& g_norm);

/// T * P accumulated row-major, columns ascending within a row.
DenseMatrix spmm(const CsrGraph& t, const DenseMatrix& p, FlopCounter* counter = nullptr);

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Solves A X = B by LU with partial pivoting. Throws NumericalError when a
/// pivot magnitude drops below 1e-12.
DenseMatrix dense_solve(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace unifews

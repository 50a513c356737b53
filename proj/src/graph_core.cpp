#include "unifews/graph_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "unifews/errors.hpp"

namespace unifews {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InputError("DenseMatrix: data length does not match rows*cols");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) throw InputError("DenseMatrix::from_rows: ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

std::vector<double> DenseMatrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

double DenseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double DenseMatrix::row_norm(std::size_t r) const {
  double s = 0.0;
  for (double v : row(r)) s += v * v;
  return std::sqrt(s);
}

std::vector<double> DenseMatrix::column_norms() const {
  std::vector<double> sq(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto r = row(i);
    for (std::size_t j = 0; j < cols_; ++j) sq[j] += r[j] * r[j];
  }
  for (double& v : sq) v = std::sqrt(v);
  return sq;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw InputError("DenseMatrix +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw InputError("DenseMatrix -=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& b) {
  const double diff = (a - b).frobenius_norm();
  const double ref = b.frobenius_norm();
  return ref == 0.0 ? diff : diff / ref;
}

// ---------------------------------------------------------------------------

CsrGraph::CsrGraph(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx,
                   std::vector<double> values)
    : n_(n), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
  validate();
  compute_flags();
}

void CsrGraph::validate() const {
  if (row_ptr_.size() != n_ + 1) throw InputError("CsrGraph: row_ptr must have n+1 entries");
  if (row_ptr_.front() != 0) throw InputError("CsrGraph: row_ptr[0] must be 0");
  if (row_ptr_.back() != col_idx_.size()) throw InputError("CsrGraph: row_ptr[n] must equal nnz");
  if (values_.size() != col_idx_.size()) throw InputError("CsrGraph: values/col_idx length mismatch");
  for (std::size_t u = 0; u < n_; ++u) {
    if (row_ptr_[u] > row_ptr_[u + 1]) throw InputError("CsrGraph: row_ptr decreasing");
    for (std::size_t k = row_ptr_[u]; k < row_ptr_[u + 1]; ++k) {
      if (col_idx_[k] >= n_) throw InputError("CsrGraph: column index out of range");
      if (k > row_ptr_[u] && col_idx_[k] <= col_idx_[k - 1]) {
        std::ostringstream msg;
        msg << "CsrGraph: row " << u << " columns not strictly increasing (duplicate edge?)";
        throw InputError(msg.str());
      }
    }
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw InputError("CsrGraph: non-finite edge weight");
  }
}

void CsrGraph::compute_flags() {
  has_self_loops_ = true;
  for (std::size_t u = 0; u < n_ && has_self_loops_; ++u) {
    if (find(u, u) == nnz()) has_self_loops_ = false;
  }
  symmetric_ = true;
  for (std::size_t u = 0; u < n_ && symmetric_; ++u) {
    for (std::size_t k = row_ptr_[u]; k < row_ptr_[u + 1]; ++k) {
      const std::size_t back = find(col_idx_[k], u);
      if (back == nnz() || values_[back] != values_[k]) {
        symmetric_ = false;
        break;
      }
    }
  }
}

std::size_t CsrGraph::find(std::size_t u, std::size_t v) const {
  const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[u]);
  const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[u + 1]);
  const auto it = std::lower_bound(first, last, static_cast<NodeId>(v));
  if (it != last && *it == v) return static_cast<std::size_t>(it - col_idx_.begin());
  return nnz();
}

double CsrGraph::at(std::size_t u, std::size_t v) const {
  const std::size_t k = find(u, v);
  return k == nnz() ? 0.0 : values_[k];
}

CsrGraph CsrGraph::with_values(std::vector<double> values) const {
  return CsrGraph(n_, row_ptr_, col_idx_, std::move(values));
}

DenseMatrix CsrGraph::to_dense() const {
  DenseMatrix m(n_, n_);
  for (std::size_t u = 0; u < n_; ++u)
    for (std::size_t k = row_ptr_[u]; k < row_ptr_[u + 1]; ++k) m(u, col_idx_[k]) = values_[k];
  return m;
}

CsrGraph CsrGraph::from_arcs(std::size_t n, std::span<const Arc> arcs) {
  std::vector<Arc> sorted(arcs.begin(), arcs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<NodeId> cols;
  cols.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto [u, v] = sorted[i];
    if (u >= n || v >= n) throw InputError("CsrGraph::from_arcs: node id out of range");
    if (i > 0 && sorted[i - 1] == sorted[i]) {
      std::ostringstream msg;
      msg << "CsrGraph::from_arcs: duplicate arc (" << u << "," << v << ")";
      throw InputError(msg.str());
    }
    ++row_ptr[u + 1];
    cols.push_back(v);
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  std::vector<double> values(cols.size(), 1.0);
  return CsrGraph(n, std::move(row_ptr), std::move(cols), std::move(values));
}

CsrGraph CsrGraph::from_undirected_edges(std::size_t n, std::span<const Arc> edges) {
  std::vector<Arc> arcs;
  arcs.reserve(2 * edges.size());
  for (const auto& [u, v] : edges) {
    arcs.emplace_back(u, v);
    if (u != v) arcs.emplace_back(v, u);
  }
  return from_arcs(n, arcs);
}

// ---------------------------------------------------------------------------

DegreeVector DegreeVector::of(const CsrGraph& g) {
  DegreeVector deg{std::vector<double>(g.n(), 0.0)};
  const auto vals = g.values();
  for (std::size_t u = 0; u < g.n(); ++u)
    for (std::size_t k = g.row_begin(u); k < g.row_end(u); ++k) deg.d[u] += vals[k];
  return deg;
}

CsrGraph add_self_loops(const CsrGraph& g) {
  if (g.has_self_loops()) return g;
  const auto rp = g.row_ptr();
  const auto ci = g.col_idx();
  const auto vals = g.values();
  std::vector<std::size_t> row_ptr(g.n() + 1, 0);
  std::vector<NodeId> cols;
  std::vector<double> values;
  cols.reserve(g.nnz() + g.n());
  values.reserve(g.nnz() + g.n());
  for (std::size_t u = 0; u < g.n(); ++u) {
    bool placed = false;
    for (std::size_t k = rp[u]; k < rp[u + 1]; ++k) {
      if (!placed && ci[k] >= u) {
        if (ci[k] != u) {
          cols.push_back(static_cast<NodeId>(u));
          values.push_back(1.0);
        }
        placed = true;
      }
      cols.push_back(ci[k]);
      values.push_back(vals[k]);
    }
    if (!placed) {
      cols.push_back(static_cast<NodeId>(u));
      values.push_back(1.0);
    }
    row_ptr[u + 1] = cols.size();
  }
  return CsrGraph(g.n(), std::move(row_ptr), std::move(cols), std::move(values));
}

CsrGraph normalize_adjacency(const CsrGraph& g, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw InputError("normalize_adjacency: r must lie in [0,1]");
  const DegreeVector deg = DegreeVector::of(g);
  for (double d : deg.d) {
    if (!(d > 0.0)) throw InputError("normalize_adjacency: zero degree node (graph not self-looped?)");
  }
  std::vector<double> left(g.n()), right(g.n());
  for (std::size_t u = 0; u < g.n(); ++u) {
    left[u] = std::pow(deg.d[u], r - 1.0);
    right[u] = std::pow(deg.d[u], -r);
  }
  const auto ci = g.col_idx();
  const auto vals = g.values();
  std::vector<double> out(g.nnz());
  for (std::size_t u = 0; u < g.n(); ++u)
    for (std::size_t k = g.row_begin(u); k < g.row_end(u); ++k)
      out[k] = vals[k] * left[u] * right[ci[k]];
  return g.with_values(std::move(out));
}

CsrGraph laplacian(const CsrGraph& g_norm) {
  // Rows lacking a diagonal get one inserted with A[u,u] = 0.
  const CsrGraph base = add_self_loops(g_norm);
  const bool inserted = !g_norm.has_self_loops();
  const auto ci = base.col_idx();
  const auto vals = base.values();
  std::vector<double> out(base.nnz());
  for (std::size_t u = 0; u < base.n(); ++u) {
    for (std::size_t k = base.row_begin(u); k < base.row_end(u); ++k) {
      const bool diag = ci[k] == u;
      double a = vals[k];
      if (diag && inserted && g_norm.find(u, u) == g_norm.nnz()) a = 0.0;
      out[k] = (diag ? 1.0 : 0.0) - a;
    }
  }
  return base.with_values(std::move(out));
}

DenseMatrix spmm(const CsrGraph& t, const DenseMatrix& p, FlopCounter* counter) {
  if (t.n() != p.rows()) throw InputError("spmm: T.n must equal P.rows");
  const std::size_t f = p.cols();
  DenseMatrix out(t.n(), f);
  const auto ci = t.col_idx();
  const auto vals = t.values();
  for (std::size_t u = 0; u < t.n(); ++u) {
    auto dst = out.row(u);
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      const double w = vals[k];
      const auto src = p.row(ci[k]);
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
  }
  if (counter) counter->mac(static_cast<std::uint64_t>(t.nnz()) * f);
  return out;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw InputError("dense_matmul: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

DenseMatrix dense_solve(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InputError("dense_solve: matrix must be square");
  if (b.rows() != n) throw InputError("dense_solve: right-hand side row count mismatch");
  DenseMatrix lu = a;
  DenseMatrix x = b;
  const std::size_t m = x.cols();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        piv = i;
      }
    }
    if (best < 1e-12) {
      std::ostringstream msg;
      msg << "dense_solve: singular matrix (pivot " << best << " at column " << k << ")";
      throw NumericalError(msg.str());
    }
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = lu(i, k) / lu(k, k);
      if (factor == 0.0) continue;
      lu(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= factor * lu(k, j);
      for (std::size_t j = 0; j < m; ++j) x(i, j) -= factor * x(k, j);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(k, j);
      for (std::size_t i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
      x(k, j) = s / lu(k, k);
    }
  }
  return x;
}

}  // namespace unifews

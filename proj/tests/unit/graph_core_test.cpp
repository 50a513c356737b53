#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "unifews/errors.hpp"
#include "unifews/graph_core.hpp"

using namespace unifews;

TEST_SUITE("graph_core") {

TEST_CASE("add_self_loops inserts missing diagonals") {
  const std::vector<Arc> arcs{{0, 1}, {1, 0}};
  const CsrGraph g = add_self_loops(CsrGraph::from_arcs(2, arcs));
  CHECK(g.nnz() == 4);
  CHECK(g.has_self_loops());
  CHECK(g.at(0, 0) == 1.0);
  CHECK(g.at(1, 1) == 1.0);

  SUBCASE("idempotent") {
    const CsrGraph again = add_self_loops(g);
    CHECK(again.nnz() == g.nnz());
    CHECK(std::equal(again.col_idx().begin(), again.col_idx().end(), g.col_idx().begin()));
    CHECK(std::equal(again.values().begin(), again.values().end(), g.values().begin()));
  }

  SUBCASE("edgeless graph") {
    const CsrGraph e = add_self_loops(CsrGraph::from_arcs(3, {}));
    CHECK(e.nnz() == 3);
    for (std::size_t u = 0; u < 3; ++u) CHECK(e.at(u, u) == 1.0);
  }
}

TEST_CASE("self-loops land in sorted position") {
  const std::vector<Arc> arcs{{1, 0}, {1, 2}, {2, 1}, {0, 1}};
  const CsrGraph g = add_self_loops(CsrGraph::from_arcs(3, arcs));
  const auto ci = g.col_idx();
  CHECK(std::vector<NodeId>(ci.begin(), ci.end()) == std::vector<NodeId>{0, 1, 0, 1, 2, 1, 2});
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("normalize_adjacency on small fixtures") {
  const CsrGraph clique = add_self_loops(CsrGraph::from_undirected_edges(2, std::vector<Arc>{{0, 1}}));
  const CsrGraph t = normalize_adjacency(clique, 0.5);
  for (double v : t.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  const CsrGraph path = add_self_loops(CsrGraph::from_undirected_edges(3, std::vector<Arc>{{0, 1}, {1, 2}}));
  const CsrGraph tp = normalize_adjacency(path, 0.5);
  CHECK(tp.at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(tp.at(0, 1) == doctest::Approx(0.408248).epsilon(1e-6));
  CHECK(tp.nnz() == path.nnz());
}

TEST_CASE("normalization matches the dense definition and its invariants") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 5 + seed * 3;
    const auto edges = fixtures::random_edges(n, 0.2, seed);
    for (double r : {0.0, 0.3, 0.5, 1.0}) {
      const CsrGraph t = fixtures::diffusion(n, edges, r);
      const auto want = oracle::normalized_adjacency(n, edges, r);
      CHECK(oracle::rel_err(oracle::from(t.to_dense()), want) < 1e-14);
      if (r == 0.5) CHECK(t.symmetric());
      if (r == 0.0) {
        for (std::size_t u = 0; u < n; ++u) {
          double s = 0.0;
          for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) s += t.values()[k];
          CHECK(std::abs(s - 1.0) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("normalize_adjacency rejects bad input") {
  const CsrGraph g = add_self_loops(CsrGraph::from_arcs(2, {}));
  CHECK_THROWS_AS(normalize_adjacency(g, -0.1), InputError);
  CHECK_THROWS_AS(normalize_adjacency(g, 1.5), InputError);
  const CsrGraph bare = CsrGraph::from_arcs(2, std::vector<Arc>{{0, 1}});
  CHECK_THROWS_AS(normalize_adjacency(bare, 0.5), InputError);
}

TEST_CASE("laplacian of the 2-node clique") {
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  const DenseMatrix l = laplacian(t).to_dense();
  CHECK(l(0, 0) == doctest::Approx(0.5));
  CHECK(l(0, 1) == doctest::Approx(-0.5));
  CHECK(l(1, 0) == doctest::Approx(-0.5));
  CHECK(l(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("laplacian adds a unit diagonal where the input has none") {
  const CsrGraph a = CsrGraph::from_arcs(2, std::vector<Arc>{{0, 1}}).with_values({0.25});
  const DenseMatrix l = laplacian(a).to_dense();
  CHECK(l(0, 0) == 1.0);
  CHECK(l(1, 1) == 1.0);
  CHECK(l(0, 1) == -0.25);
}

TEST_CASE("spmm on the clique fixture") {
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  const DenseMatrix p = DenseMatrix::from_rows({{1.0}, {0.0}});
  FlopCounter c;
  const DenseMatrix out = spmm(t, p, &c);
  CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.flops == 2 * 4 * 1);
}

TEST_CASE("spmm matches the dense oracle on random graphs") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 2 + (seed * 7) % 63;
    const auto edges = fixtures::random_edges(n, 0.15, seed);
    const CsrGraph t = fixtures::diffusion(n, edges);
    const DenseMatrix p = fixtures::random_matrix(n, 1 + seed % 5, seed + 100);
    const auto want = oracle::matmul(oracle::normalized_adjacency(n, edges, 0.5), oracle::from(p));
    CHECK(oracle::rel_err(oracle::from(spmm(t, p)), want) <= 1e-12);
  }
}

TEST_CASE("dense_solve") {
  const DenseMatrix a = DenseMatrix::from_rows({{1.5, -0.5}, {-0.5, 1.5}});
  const DenseMatrix x = dense_solve(a, DenseMatrix::from_rows({{1.0}, {0.0}}));
  CHECK(x(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(x(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS_AS(dense_solve(DenseMatrix::from_rows({{1.0, 2.0}, {2.0, 4.0}}), DenseMatrix(2, 1)), NumericalError);
  CHECK_THROWS_AS(dense_solve(DenseMatrix(2, 3), DenseMatrix(2, 1)), InputError);
}

TEST_CASE("dense_matmul agrees with the oracle") {
  const DenseMatrix a = fixtures::random_matrix(7, 5, 1);
  const DenseMatrix b = fixtures::random_matrix(5, 3, 2);
  CHECK(oracle::rel_err(oracle::from(dense_matmul(a, b)), oracle::matmul(oracle::from(a), oracle::from(b))) < 1e-14);
}

TEST_CASE("CsrGraph rejects malformed structure") {
  CHECK_THROWS_AS(CsrGraph(2, {0, 2, 1}, {0, 1}, {1.0, 1.0}), InputError);
  CHECK_THROWS_AS(CsrGraph(2, {0, 2, 2}, {1, 0}, {1.0, 1.0}), InputError);
  CHECK_THROWS_AS(CsrGraph(2, {0, 1, 1}, {5}, {1.0}), InputError);
  CHECK_THROWS_AS(CsrGraph(2, {0, 1}, {0}, {1.0}), InputError);
  CHECK_THROWS_AS(CsrGraph(1, {0, 1}, {0}, {NAN}), InputError);
  const std::vector<Arc> dup{{0, 1}, {0, 1}};
  CHECK_THROWS_AS(CsrGraph::from_arcs(2, dup), InputError);
  const std::vector<Arc> out_of_range{{0, 3}};
  CHECK_THROWS_AS(CsrGraph::from_arcs(2, out_of_range), InputError);
}

TEST_CASE("flags and lookups") {
  const CsrGraph g = CsrGraph::from_arcs(3, std::vector<Arc>{{0, 1}, {2, 0}});
  CHECK_FALSE(g.symmetric());
  CHECK_FALSE(g.has_self_loops());
  CHECK(g.find(0, 1) == 0);
  CHECK(g.find(1, 0) == g.nnz());
  CHECK(g.at(1, 0) == 0.0);
  const auto d = DegreeVector::of(add_self_loops(g)).d;
  CHECK(d == std::vector<double>{2.0, 1.0, 2.0});
}

TEST_CASE("relative_frobenius_error") {
  const DenseMatrix a = DenseMatrix::from_rows({{3.0, 4.0}});
  CHECK(relative_frobenius_error(a, a) == 0.0);
  CHECK(relative_frobenius_error(DenseMatrix(1, 2), a) == doctest::Approx(1.0));
  CHECK(relative_frobenius_error(a, DenseMatrix(1, 2)) == doctest::Approx(5.0));
}

}

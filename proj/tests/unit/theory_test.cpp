#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "unifews/errors.hpp"
#include "unifews/theory.hpp"

using namespace unifews;

TEST_SUITE("theory") {

TEST_CASE("closed form on the 2-clique") {
  const CsrGraph l = laplacian(fixtures::diffusion(2, {{0, 1}}));
  const DenseMatrix p = closed_form_solution(l, DenseMatrix::from_rows({{1.0}, {0.0}}), 1.0);
  CHECK(p(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(p(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS_AS(closed_form_solution(l, DenseMatrix(2, 1), -1.0), InputError);
}

TEST_CASE("closed form agrees with an explicit inverse") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 5 + seed;
    const auto edges = fixtures::random_edges(n, 0.3, seed);
    const auto td = oracle::normalized_adjacency(n, edges, 0.5);
    const double c = 0.5 + 0.1 * seed;
    oracle::Dense m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m.at(i, j) = (i == j ? 1.0 + c : 0.0) - c * td.at(i, j);
    const DenseMatrix x = fixtures::random_matrix(n, 2, seed);
    const auto want = oracle::matmul(oracle::inverse(m), oracle::from(x));
    const auto got = closed_form_solution(laplacian(fixtures::diffusion(n, edges)), x, c);
    CHECK(oracle::rel_err(oracle::from(got), want) <= 1e-12);
  }
}

TEST_CASE("symmetric off-diagonal pruning on the 2-clique gives epsilon 0.5") {
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  EdgeMask m = EdgeMask::full(4);
  m.drop(t.find(0, 1));
  m.drop(t.find(1, 0));
  const auto rep = spectral_epsilon(laplacian(t), pruned_laplacian(t, m));
  CHECK(rep.symmetric);
  CHECK(rep.epsilon == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.quad_form_sup == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("message pruning on the 2-clique is asymmetric") {
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  const std::vector<double> p{1.0, 0.0};
  const auto [mask, stats] = sparsify_edges_message(t, p, 0.4, EdgeMask::full(4));
  const auto rep = spectral_epsilon(laplacian(t), pruned_laplacian(t, mask));
  CHECK_FALSE(rep.symmetric);
  // Upsilon = [[0, -0.5], [0, -0.5]]: one nonzero column of norm 1/sqrt(2).
  CHECK(rep.epsilon == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  // Symmetric part [[0, -0.25], [-0.25, -0.5]].
  CHECK(rep.quad_form_sup == doctest::Approx(0.25 + std::sqrt(0.125)).epsilon(1e-12));
}

TEST_CASE("laplacian_difference drops exact zeros") {
  const CsrGraph t = fixtures::diffusion(3, {{0, 1}, {1, 2}});
  const CsrGraph l = laplacian(t);
  CHECK(laplacian_difference(l, l).nnz() == 0);
  EdgeMask m = EdgeMask::full(t.nnz());
  m.drop(t.find(0, 1));
  const CsrGraph u = laplacian_difference(l, pruned_laplacian(t, m));
  CHECK(u.nnz() == 1);
  CHECK(u.at(0, 1) == doctest::Approx(-t.at(0, 1)));
}

TEST_CASE("power iteration agrees with the dense solver") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = random_instance(24, 0.3, seed);
    const std::vector<double>& x = inst.x;
    for (bool sym : {true, false}) {
      EdgeMask mask;
      if (sym) {
        DenseMatrix p(24, 1, std::vector<double>(x.begin(), x.end()));
        mask = sparsify_edges_nodewise(inst.t, p, 0.05, EdgeMask::full(inst.t.nnz())).first;
        // Node-wise masks are not symmetric in general; symmetrize by hand.
        for (std::size_t u = 0; u < 24; ++u)
          for (std::size_t k = inst.t.row_begin(u); k < inst.t.row_end(u); ++k) {
            const std::size_t v = inst.t.col_idx()[k];
            if (!mask.kept(k)) mask.drop(inst.t.find(v, u));
          }
      } else {
        mask = sparsify_edges_message(inst.t, x, 0.05, EdgeMask::full(inst.t.nnz())).first;
      }
      const CsrGraph l = laplacian(inst.t);
      const CsrGraph lh = pruned_laplacian(inst.t, mask);
      const auto dense = spectral_epsilon(l, lh);
      SpectralOptions opt;
      opt.force_power = true;
      const auto power = spectral_epsilon(l, lh, opt);
      CHECK(dense.symmetric == sym);
      CHECK(power.converged);
      CHECK(power.epsilon == doctest::Approx(dense.epsilon).epsilon(1e-6));
      CHECK(power.quad_form_sup == doctest::Approx(dense.quad_form_sup).epsilon(1e-6));
    }
  }
}

TEST_CASE("sparsifier chain on random instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = random_instance(8 << (seed % 3), 0.3, seed);
    for (double d : {0.0, 0.01, 0.05, 0.1}) {
      const auto rep = check_theorem_4_3(inst.t, inst.x, d);
      CHECK(rep.bound_holds);
      CHECK(rep.quad_form <= rep.chain_middle);
      CHECK(rep.chain_middle <= rep.chain_bound);
      if (d == 0.0) CHECK(rep.q_a == 0);
    }
  }
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(check_theorem_4_3(t, zero, 0.1), InputError);
}

TEST_CASE("chain on the 2-clique by hand") {
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  const std::vector<double> p{1.0, 0.0};
  const auto rep = check_theorem_4_3(t, p, 0.4);
  // Dropped messages T[0,1] p[1] and T[1,1] p[1] are both zero.
  CHECK(rep.q_a == 2);
  CHECK(rep.quad_form == 0.0);
  CHECK(rep.chain_middle == 0.0);
  CHECK(rep.chain_bound == doctest::Approx(0.8));
}

TEST_CASE("approximation bound on random instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = random_instance(8 << (seed % 3), 0.3, seed);
    const CsrGraph l = laplacian(inst.t);
    for (double d : {0.01, 0.05, 0.1}) {
      const auto mask = sparsify_edges_message(inst.t, inst.x, d, EdgeMask::full(inst.t.nnz())).first;
      for (double c : {0.5, 1.0}) {
        const auto rep = check_theorem_4_2(l, pruned_laplacian(inst.t, mask), inst.x, c);
        CHECK(rep.within_bound);
        CHECK(rep.err <= rep.bound + 1e-9);
      }
    }
  }
}

TEST_CASE("unpruned smoothing distance vanishes") {
  const auto inst = random_instance(16, 0.3, 3);
  const DenseMatrix x(16, 1, inst.x);
  PropagationScheme s;
  s.kind = SchemeKind::GenericSmoothing;
  s.hops = 200;
  s.b = 0.5;
  s.c = 1.0;
  const std::vector<double> deltas{0.0, 0.05};
  const auto rows = smoothing_distance(inst.t, x, s, deltas, 1.0);
  CHECK(rows.size() == 2 * 201);
  CHECK(rows[200].value < 1e-10);
  CHECK(rows[0].value > 0.0);
  CHECK(rows[201].delta_a == 0.05);
}

TEST_CASE("multi-hop error curve is zero without pruning") {
  const auto inst = random_instance(16, 0.3, 5);
  const DenseMatrix x(16, 1, inst.x);
  PropagationScheme s;
  s.hops = 5;
  const std::vector<double> deltas{0.0, 0.1};
  const auto rows = multi_hop_error_curve(inst.t, x, s, deltas);
  REQUIRE(rows.size() == 12);
  for (int h = 0; h < 6; ++h) CHECK(rows[h].value == 0.0);
  CHECK(rows[6].value == 0.0);  // hop 0 is the input itself
  CHECK(rows[11].value > 0.0);
  const std::string csv = curve_csv(rows);
  CHECK(csv.rfind("delta_a,hop,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}

TEST_CASE("over-smoothed limit is a fixed point") {
  const auto inst = random_instance(20, 0.2, 9);
  const DenseMatrix x = fixtures::random_matrix(20, 2, 1);
  for (double r : {0.0, 0.5, 1.0}) {
    const CsrGraph t = normalize_adjacency(inst.adjacency, r);
    const DenseMatrix lim = oversmoothing_limit(inst.adjacency, x, r);
    CHECK(relative_frobenius_error(spmm(t, lim), lim) <= 1e-12);
    PropagationScheme s;
    s.hops = 2000;
    s.skip = SkipMode::None;
    const auto deep = propagate(t, x, s, {}).embedding;
    CHECK(relative_frobenius_error(deep, lim) <= 1e-8);
  }
}

TEST_CASE("erdos_renyi is symmetric and loop-free") {
  const CsrGraph g = erdos_renyi(30, 0.2, 4);
  CHECK(g.symmetric());
  for (std::size_t u = 0; u < 30; ++u) CHECK(g.find(u, u) == g.nnz());
  CHECK(erdos_renyi(30, 0.2, 4).nnz() == g.nnz());
  CHECK(max_eigenvalue(fixtures::diffusion(5, fixtures::random_edges(5, 0.5, 1))) == doctest::Approx(1.0));
}

TEST_CASE("smoothing objective by hand") {
  const CsrGraph l = laplacian(fixtures::diffusion(2, {{0, 1}}));
  const DenseMatrix x = DenseMatrix::from_rows({{1.0}, {0.0}});
  // p = x: c * x^T L x = 0.5.
  CHECK(smoothing_objective(l, x, x, 1.0) == doctest::Approx(0.5));
  const DenseMatrix p = DenseMatrix::from_rows({{0.75}, {0.25}});
  CHECK(smoothing_objective(l, p, x, 1.0) == doctest::Approx(0.125 + 0.125));
}

}

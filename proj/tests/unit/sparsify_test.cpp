#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "unifews/errors.hpp"
#include "unifews/random.hpp"
#include "unifews/sparsify.hpp"

using namespace unifews;

namespace {

std::vector<bool> bits(const EntryMask& m) {
  std::vector<bool> out(m.length());
  for (std::size_t i = 0; i < m.length(); ++i) out[i] = m.kept(i);
  return out;
}

}  // namespace

TEST_SUITE("sparsify") {

TEST_CASE("threshold boundary drops") {
  CHECK(prune_threshold(0.5, 0.5) == PruneDecision::Drop);
  CHECK(prune_threshold(-0.5, 0.5) == PruneDecision::Drop);
  CHECK(prune_threshold(std::nextafter(0.5, 1.0), 0.5) == PruneDecision::Keep);
  CHECK(prune_threshold(0.0, 0.0) == PruneDecision::Drop);
  CHECK(prune_threshold(1e-300, 0.0) == PruneDecision::Keep);
}

TEST_CASE("message rule on the 2-clique") {
  const CsrGraph t = fixtures::diffusion(2, {{0, 1}});
  const std::vector<double> p{1.0, 0.0};

  SUBCASE("delta 0.4 keeps only messages from node 0") {
    const auto [mask, stats] = sparsify_edges_message(t, p, 0.4, EdgeMask::full(4));
    CHECK(bits(mask) == std::vector<bool>{true, false, true, false});
    CHECK(stats.q_a == 2);
    CHECK(stats.eta_a == 0.5);
  }
  SUBCASE("delta equal to the message drops it") {
    const auto [mask, stats] = sparsify_edges_message(t, p, t.at(0, 0), EdgeMask::full(4));
    CHECK(mask.count() == 0);
    CHECK(stats.eta_a == 1.0);
  }
  SUBCASE("delta zero keeps nonzero messages only") {
    const auto [mask, stats] = sparsify_edges_message(t, p, 0.0, EdgeMask::full(4));
    CHECK(mask.count() == 2);
  }
}

TEST_CASE("rules agree with a brute-force scan") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t n = 4 + seed % 20;
    const auto edges = fixtures::random_edges(n, 0.3, seed);
    const CsrGraph t = fixtures::diffusion(n, edges);
    const DenseMatrix p = fixtures::random_matrix(n, 3, seed + 7);
    const DenseMatrix p1 = fixtures::random_matrix(n, 1, seed + 9);
    Rng rng(seed);
    const double delta = rng.uniform(0.0, 0.6);
    const EdgeMask prev = random_mask(t, 0.2, seed);

    const auto node = sparsify_edges_nodewise(t, p, delta, prev).first;
    const auto msg = sparsify_edges_message(t, p1.column(0), delta, prev).first;
    const auto tn = t.to_dense();
    std::size_t k = 0;
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        if (t.find(u, v) == t.nnz()) continue;
        double norm = 0.0;
        for (std::size_t j = 0; j < 3; ++j) norm += p(v, j) * p(v, j);
        norm = std::sqrt(norm);
        CHECK(node.kept(k) == (prev.kept(k) && std::abs(tn(u, v)) * norm > delta));
        CHECK(msg.kept(k) == (prev.kept(k) && std::abs(tn(u, v) * p1(v, 0)) > delta));
        ++k;
      }
    }
  }
}

TEST_CASE("self-loop exemption") {
  const CsrGraph t = fixtures::diffusion(3, {{0, 1}, {1, 2}});
  const DenseMatrix p(3, 2, 0.0);
  const auto [mask, stats] = sparsify_edges_nodewise(t, p, 0.1, EdgeMask::full(t.nnz()), true);
  CHECK(mask.count() == 3);
  for (std::size_t u = 0; u < 3; ++u) CHECK(mask.kept(t.find(u, u)));
}

TEST_CASE("masked_spmm matches the dense oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 3 + seed % 30;
    const auto edges = fixtures::random_edges(n, 0.25, seed);
    const CsrGraph t = fixtures::diffusion(n, edges);
    const EdgeMask mask = random_mask(t, 0.4, seed * 3 + 1);
    const DenseMatrix p = fixtures::random_matrix(n, 4, seed);
    for (bool skip : {false, true}) {
      FlopCounter c;
      const DenseMatrix got = masked_spmm(t, mask, p, skip, &c);
      oracle::Dense want = oracle::matmul(oracle::masked_dense(t, bits(mask)), oracle::from(p));
      if (skip) want = oracle::add(want, oracle::from(p));
      CHECK(oracle::rel_err(oracle::from(got), want) <= 1e-12);
      CHECK(c.flops == 2 * mask.count() * 4 + (skip ? n * 4 : 0));
    }
  }
}

TEST_CASE("full mask reproduces spmm bit for bit") {
  const auto edges = fixtures::random_edges(40, 0.2, 3);
  const CsrGraph t = fixtures::diffusion(40, edges);
  const DenseMatrix p = fixtures::random_matrix(40, 5, 4);
  CHECK(masked_spmm(t, EdgeMask::full(t.nnz()), p, false) == spmm(t, p));
}

TEST_CASE("weight rule") {
  const DenseMatrix w = DenseMatrix::from_rows({{0.5, -0.1}, {0.2, 2.0}});
  const DenseMatrix p = DenseMatrix::from_rows({{3.0, 0.0}, {4.0, 1.0}});  // column norms 5, 1
  const auto res = sparsify_weights(w, p, 0.5);
  CHECK(res.pruned(0, 0) == 0.5);
  CHECK(res.pruned(0, 1) == 0.0);  // 0.1 * 5 == 0.5 drops
  CHECK(res.pruned(1, 0) == 0.0);
  CHECK(res.pruned(1, 1) == 2.0);
  CHECK(res.stats.q_w == 2);
  CHECK(res.stats.eta_w == 0.5);
  CHECK_FALSE(res.kept.kept(1));
  CHECK_THROWS_AS(sparsify_weights(w, DenseMatrix(2, 3), 0.1), InputError);
}

TEST_CASE("random_mask drops an exact count") {
  const auto edges = fixtures::random_edges(50, 0.1, 11);
  const CsrGraph t = fixtures::diffusion(50, edges);
  for (double eta : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    const EdgeMask m = random_mask(t, eta, 5);
    CHECK(m.dropped() == static_cast<std::size_t>(std::llround(eta * t.nnz())));
  }
  CHECK(random_mask(t, 0.5, 5) == random_mask(t, 0.5, 5));
  CHECK_FALSE(random_mask(t, 0.5, 5) == random_mask(t, 0.5, 6));
  CHECK_THROWS_AS(random_mask(t, 1.5, 0), InputError);
}

TEST_CASE("mask encode/decode round trip") {
  for (std::size_t len : {0u, 1u, 63u, 64u, 65u, 200u}) {
    EntryMask m = EntryMask::full(len);
    for (std::size_t i = 0; i < len; i += 3) m.drop(i);
    const std::string s = m.encode();
    CHECK(EntryMask::decode(s) == m);
  }
  CHECK(EntryMask::full(5).encode() == "5:000000000000001f");
  CHECK_THROWS_AS(EntryMask::decode("5"), InputError);
  CHECK_THROWS_AS(EntryMask::decode("5:00"), InputError);
  CHECK_THROWS_AS(EntryMask::decode("5:000000000000003f"), InputError);
  CHECK_THROWS_AS(EntryMask::decode("5:00000000000000zz"), InputError);
}

TEST_CASE("apply_mask keeps exactly the kept entries") {
  const CsrGraph t = fixtures::diffusion(3, {{0, 1}, {1, 2}});
  EdgeMask m = EdgeMask::full(t.nnz());
  m.drop(t.find(1, 2));
  const CsrGraph h = apply_mask(t, m);
  CHECK(h.nnz() == t.nnz() - 1);
  CHECK(h.at(1, 2) == 0.0);
  CHECK(h.at(1, 0) == t.at(1, 0));
}

TEST_CASE("policy validation") {
  CHECK_THROWS_AS((ThresholdPolicy{-1.0, 0.0}.validate()), InputError);
  CHECK_THROWS_AS((ThresholdPolicy{0.0, NAN}.validate()), InputError);
  CHECK_NOTHROW((ThresholdPolicy{0.0, 0.0}.validate()));
}

}

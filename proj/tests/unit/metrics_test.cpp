#include <doctest.h>

#include "unifews/errors.hpp"
#include "unifews/metrics.hpp"

using namespace unifews;

TEST_SUITE("metrics") {

TEST_CASE("propagation FLOPs formula") {
  MaskChain chain;
  EntryMask a = EntryMask::full(10);
  EntryMask b = a;
  for (std::size_t i = 0; i < 5; ++i) b.drop(i);
  chain.layers = {a, b};
  CHECK(count_prop_flops(chain, 3) == 2 * 10 * 3 + 2 * 5 * 3);
  CHECK(count_prop_flops(chain, 3, 4) == 2 * 10 * 3 + 2 * 5 * 3 + 2 * 4 * 3);
  CHECK(count_prop_flops(chain, 3, 0, 1) == 10 * 3 + 5 * 3);
  CHECK(count_prop_flops({}, 3) == 0);
}

TEST_CASE("transform FLOPs formula") {
  EntryMask m = EntryMask::full(12);
  m.drop(3);
  CHECK(count_trans_flops(7, m) == 2 * 7 * 11);
  CHECK(count_trans_flops(7, EntryMask::empty(12)) == 0);
}

TEST_CASE("accuracy and ties") {
  const DenseMatrix logits = DenseMatrix::from_rows({{0.5, 0.5}, {0.1, 0.9}, {2.0, -1.0}, {0.0, 0.0}});
  const std::vector<int> labels{0, 1, 1, -1};
  CHECK(argmax_row(logits, 0) == 0);
  const std::vector<NodeId> all{0, 1, 2};
  CHECK(accuracy(logits, labels, all) == doctest::Approx(2.0 / 3.0));
  const std::vector<NodeId> unlabeled{3};
  CHECK(accuracy(logits, labels, unlabeled) == 0.0);
  CHECK_THROWS_AS(accuracy(logits, labels, std::vector<NodeId>{}), InputError);
  CHECK_THROWS_AS(accuracy(logits, labels, std::vector<NodeId>{9}), InputError);
}

TEST_CASE("report totals skip absent stages") {
  RunReport r;
  r.layers = {{0.4, 0.0, 100, 0, true, false}, {0.6, 0.0, 50, 0, true, false}, {0.0, 0.3, 0, 70, false, true}};
  CHECK(r.total_prop_flops() == 150);
  CHECK(r.total_trans_flops() == 70);
  CHECK(r.total_flops() == 220);
  CHECK(r.mean_eta_a() == doctest::Approx(0.5));
  CHECK(r.mean_eta_w() == doctest::Approx(0.3));
  const auto j = r.to_json();
  CHECK(j["layers"][0]["stage"] == "propagation");
  CHECK(j["layers"][2]["stage"] == "transform");
  CHECK(j["totals"]["flops"] == 220);
  RunReport joint;
  joint.layers = {{0.2, 0.4, 1, 2}};
  CHECK(joint.to_json()["layers"][0]["stage"] == "joint");
  CHECK(RunReport{}.mean_eta_a() == 0.0);
}

}

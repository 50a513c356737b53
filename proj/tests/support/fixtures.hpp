#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unifews/bundle.hpp"
#include "unifews/graph_core.hpp"

namespace fixtures {

unifews::DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0);

/// Undirected G(n, p) edge list, u < v.
std::vector<unifews::Arc> random_edges(std::size_t n, double p, std::uint64_t seed);

/// Self-looped r-normalized diffusion over an undirected edge list.
unifews::CsrGraph diffusion(std::size_t n, const std::vector<unifews::Arc>& edges, double r = 0.5);

/// 2-node clique and 3-node path bundles (f = 1, 2 classes).
unifews::GraphBundle clique2();
unifews::GraphBundle path3();

/// Two 4-node cliques joined by one edge; class = clique, features carry a
/// weak class signal. Linearly separable after one propagation hop.
unifews::GraphBundle toy_two_class();

/// Citation-like graph at cora scale: 2708 nodes in 7 classes, ~5.3k
/// undirected edges with high homophily, 1433 sparse binary features drawn
/// from class topics, 20 train nodes per class, 500 val, 1000 test.
struct CoraLikeParams {
  double homophily = 0.65;
  double topic_prob = 0.27;
  double closure = 0.5;  ///< share of edges that close a triangle
};
unifews::GraphBundle cora_like(std::uint64_t seed, const CoraLikeParams& params = {});

/// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& tag);

}  // namespace fixtures

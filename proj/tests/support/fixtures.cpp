#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "unifews/random.hpp"

namespace fixtures {

using namespace unifews;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

std::vector<Arc> random_edges(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Arc> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  return edges;
}

CsrGraph diffusion(std::size_t n, const std::vector<Arc>& edges, double r) {
  return normalize_adjacency(add_self_loops(CsrGraph::from_undirected_edges(n, edges)), r);
}

namespace {

GraphBundle make_bundle(std::string name, std::size_t n, const std::vector<Arc>& undirected, DenseMatrix features,
                        std::vector<int> labels, std::size_t classes, Splits splits) {
  GraphBundle b;
  for (const auto& [u, v] : undirected) {
    b.arcs.emplace_back(u, v);
    b.arcs.emplace_back(v, u);
  }
  std::sort(b.arcs.begin(), b.arcs.end());
  b.meta.n = n;
  b.meta.m = b.arcs.size() + n;
  b.meta.f = features.cols();
  b.meta.num_classes = classes;
  b.meta.name = std::move(name);
  b.features = std::move(features);
  b.labels = std::move(labels);
  b.splits = std::move(splits);
  return b;
}

}  // namespace

GraphBundle clique2() {
  return make_bundle("clique2", 2, {{0, 1}}, DenseMatrix(2, 1, std::vector<double>{1.0, 0.0}), {0, 1}, 2,
                     Splits{{0}, {}, {1}});
}

GraphBundle path3() {
  return make_bundle("path3", 3, {{0, 1}, {1, 2}}, DenseMatrix(3, 1, std::vector<double>{1.0, 0.0, -1.0}),
                     {0, 0, 1}, 2, Splits{{0, 2}, {1}, {}});
}

GraphBundle toy_two_class() {
  std::vector<Arc> edges;
  for (NodeId base : {0u, 4u})
    for (NodeId u = 0; u < 4; ++u)
      for (NodeId v = u + 1; v < 4; ++v) edges.emplace_back(base + u, base + v);
  edges.emplace_back(3, 4);
  DenseMatrix x(8, 2);
  const double signal[8] = {1.0, 0.2, 0.6, -0.1, 0.1, -0.6, -0.2, -1.0};
  for (std::size_t u = 0; u < 8; ++u) {
    x(u, 0) = signal[u];
    x(u, 1) = 1.0;
  }
  std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
  return make_bundle("toy8", 8, edges, std::move(x), labels, 2, Splits{{0, 2, 5, 7}, {1, 6}, {3, 4}});
}

GraphBundle cora_like(std::uint64_t seed, const CoraLikeParams& params) {
  constexpr std::size_t n = 2708, f = 1433, classes = 7;
  constexpr std::size_t class_sizes[classes] = {351, 217, 418, 818, 426, 298, 180};
  constexpr std::size_t target_edges = 5278;
  const double homophily = params.homophily;
  constexpr std::size_t words_per_node = 18;
  constexpr std::size_t topic_words = 120;
  const double topic_prob = params.topic_prob;

  Rng rng(seed);
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<int> labels(n);
  std::vector<std::vector<NodeId>> members(classes);
  {
    std::size_t pos = 0;
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t k = 0; k < class_sizes[c]; ++k) {
        labels[perm[pos]] = static_cast<int>(c);
        members[c].push_back(perm[pos]);
        ++pos;
      }
  }

  // Heavy-tailed activity makes the degree distribution citation-like.
  std::vector<double> activity(n);
  for (double& a : activity) a = std::pow(1.0 - rng.uniform(), -1.0 / 2.5);
  auto pick_weighted = [&](const std::vector<NodeId>& pool, const std::vector<double>& cum) {
    const double r = rng.uniform() * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), r);
    return pool[std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), pool.size() - 1)];
  };
  std::vector<NodeId> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  auto cumulative = [&](const std::vector<NodeId>& pool) {
    std::vector<double> cum(pool.size());
    double s = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) cum[i] = (s += activity[pool[i]]);
    return cum;
  };
  const auto cum_all = cumulative(everyone);
  std::vector<std::vector<double>> cum_class;
  for (const auto& m : members) cum_class.push_back(cumulative(m));

  std::set<Arc> edge_set;
  // Every node gets one edge first so nothing is isolated.
  for (NodeId u = 0; u < n && edge_set.size() < target_edges; ++u) {
    const int c = labels[u];
    NodeId v = rng.bernoulli(homophily) ? pick_weighted(members[c], cum_class[c]) : pick_weighted(everyone, cum_all);
    if (v == u) continue;
    edge_set.insert({std::min(u, v), std::max(u, v)});
  }
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& [u, v] : edge_set) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  while (edge_set.size() < target_edges) {
    const NodeId u = pick_weighted(everyone, cum_all);
    const int c = labels[u];
    NodeId v;
    if (!adj[u].empty() && rng.bernoulli(params.closure)) {
      // Close a triangle through a random neighbor.
      const NodeId w = adj[u][rng.below(adj[u].size())];
      v = adj[w][rng.below(adj[w].size())];
    } else {
      v = rng.bernoulli(homophily) ? pick_weighted(members[c], cum_class[c]) : pick_weighted(everyone, cum_all);
    }
    if (v == u) continue;
    if (edge_set.insert({std::min(u, v), std::max(u, v)}).second) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
  }
  const std::vector<Arc> edges(edge_set.begin(), edge_set.end());

  // Each class owns a block of topic words; the rest of the vocabulary is shared.
  DenseMatrix x(n, f);
  for (NodeId u = 0; u < n; ++u) {
    const std::size_t c = static_cast<std::size_t>(labels[u]);
    for (std::size_t k = 0; k < words_per_node; ++k) {
      std::size_t w;
      if (rng.bernoulli(topic_prob)) w = c * topic_words + rng.below(topic_words);
      else w = rng.below(f);
      x(u, w) = 1.0;
    }
  }

  Splits splits;
  std::vector<std::size_t> taken(classes, 0);
  std::vector<NodeId> rest;
  for (NodeId u : perm) {  // perm is already a random order
    const std::size_t c = static_cast<std::size_t>(labels[u]);
    if (taken[c] < 20) {
      splits.train.push_back(u);
      ++taken[c];
    } else {
      rest.push_back(u);
    }
  }
  for (std::size_t i = rest.size() - 1; i > 0; --i) std::swap(rest[i], rest[rng.below(i + 1)]);
  splits.val.assign(rest.begin(), rest.begin() + 500);
  splits.test.assign(rest.begin() + 500, rest.begin() + 1500);
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.val.begin(), splits.val.end());
  std::sort(splits.test.begin(), splits.test.end());
  return make_bundle("cora-like", n, edges, std::move(x), std::move(labels), classes, std::move(splits));
}

std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("unifews_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace fixtures

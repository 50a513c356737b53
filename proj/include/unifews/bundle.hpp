#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unifews/graph_core.hpp"

namespace unifews {

struct Splits {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
};

struct BundleMeta {
  std::size_t n = 0;
  std::size_t m = 0;  ///< directed arcs including the self-loops added at load
  std::size_t f = 0;
  std::size_t num_classes = 0;
  std::string name;
};

/// On-disk graph bundle: meta.json, edges.bin (u32 pairs, no self-loops),
/// features.bin (f32 n x f), labels.bin (i32, -1 unlabeled), splits.json.
struct GraphBundle {
  BundleMeta meta;
  std::vector<Arc> arcs;
  DenseMatrix features;
  std::vector<int> labels;
  Splits splits;

  /// Unit-weight adjacency with self-loops added.
  CsrGraph adjacency() const;
};

/// Every problem found in the bundle directory; empty when valid.
std::vector<std::string> validate_bundle(const std::string& dir);

/// Loads and validates; throws InputError listing the first problem.
GraphBundle load_bundle(const std::string& dir);

void write_bundle(const GraphBundle& bundle, const std::string& dir);

}  // namespace unifews

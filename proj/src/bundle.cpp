#include "unifews/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "unifews/errors.hpp"
#include "unifews/io.hpp"

namespace unifews {

namespace fs = std::filesystem;
using nlohmann::json;

CsrGraph GraphBundle::adjacency() const {
  return add_self_loops(CsrGraph::from_arcs(meta.n, arcs));
}

namespace {

struct Loaded {
  GraphBundle bundle;
  std::vector<std::string> problems;
};

Loaded read_bundle(const std::string& dir) {
  Loaded out;
  auto& b = out.bundle;
  auto& problems = out.problems;
  auto fail = [&](std::string msg) { problems.push_back(std::move(msg)); };

  const fs::path root(dir);
  if (!fs::is_directory(root)) {
    fail("bundle directory does not exist: " + dir);
    return out;
  }
  for (const char* name : {"meta.json", "edges.bin", "features.bin", "labels.bin", "splits.json"}) {
    if (!fs::exists(root / name)) fail(std::string("missing ") + name);
  }
  if (!problems.empty()) return out;

  try {
    const json meta = json::parse(read_text_file((root / "meta.json").string()));
    b.meta.n = meta.at("n").get<std::size_t>();
    b.meta.m = meta.at("m").get<std::size_t>();
    b.meta.f = meta.at("f").get<std::size_t>();
    b.meta.num_classes = meta.at("num_classes").get<std::size_t>();
    b.meta.name = meta.at("name").get<std::string>();
  } catch (const json::exception& e) {
    fail(std::string("meta.json: ") + e.what());
    return out;
  }
  const std::size_t n = b.meta.n;
  const std::size_t f = b.meta.f;
  if (n == 0) fail("meta.json: n must be positive");
  if (n > UINT32_MAX) fail("meta.json: n exceeds u32 node ids");

  const auto edges = read_u32_file((root / "edges.bin").string());
  if (edges.size() % 2 != 0) fail("edges.bin: odd number of u32 values");
  b.arcs.reserve(edges.size() / 2);
  bool range_ok = true;
  bool self_loop = false;
  for (std::size_t i = 0; i + 1 < edges.size(); i += 2) {
    if (edges[i] >= n || edges[i + 1] >= n) range_ok = false;
    if (edges[i] == edges[i + 1]) self_loop = true;
    b.arcs.emplace_back(edges[i], edges[i + 1]);
  }
  if (!range_ok) fail("edges.bin: node id out of range");
  if (self_loop) fail("edges.bin: contains self-loops (the engine adds them)");
  {
    auto sorted = b.arcs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("edges.bin: duplicate arcs");
  }
  if (b.meta.m != b.arcs.size() + n) {
    fail("meta.json: m=" + std::to_string(b.meta.m) + " but edges.bin has " + std::to_string(b.arcs.size()) +
         " arcs plus " + std::to_string(n) + " self-loops");
  }

  const auto feats = read_f32_file((root / "features.bin").string());
  if (feats.size() != n * f) {
    fail("features.bin: expected " + std::to_string(n * f) + " f32 values, found " + std::to_string(feats.size()));
  } else {
    std::vector<double> wide(feats.begin(), feats.end());
    if (!std::all_of(wide.begin(), wide.end(), [](double v) { return std::isfinite(v); })) {
      fail("features.bin: non-finite values");
    }
    b.features = DenseMatrix(n, f, std::move(wide));
  }

  const auto labels = read_i32_file((root / "labels.bin").string());
  if (labels.size() != n) fail("labels.bin: expected n labels");
  for (auto l : labels) {
    if (l < -1 || (l >= 0 && static_cast<std::size_t>(l) >= b.meta.num_classes)) {
      fail("labels.bin: label out of range");
      break;
    }
  }
  b.labels.assign(labels.begin(), labels.end());

  try {
    const json splits = json::parse(read_text_file((root / "splits.json").string()));
    b.splits.train = splits.at("train").get<std::vector<NodeId>>();
    b.splits.val = splits.at("val").get<std::vector<NodeId>>();
    b.splits.test = splits.at("test").get<std::vector<NodeId>>();
  } catch (const json::exception& e) {
    fail(std::string("splits.json: ") + e.what());
    return out;
  }
  std::set<NodeId> seen;
  for (const auto* part : {&b.splits.train, &b.splits.val, &b.splits.test}) {
    for (NodeId id : *part) {
      if (id >= n) {
        fail("splits.json: node id out of range");
        return out;
      }
      if (!seen.insert(id).second) {
        fail("splits.json: node " + std::to_string(id) + " appears twice");
        return out;
      }
    }
  }
  if (b.labels.size() == n) {
    for (NodeId id : b.splits.train) {
      if (b.labels[id] < 0) {
        fail("splits.json: training node " + std::to_string(id) + " is unlabeled");
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_bundle(const std::string& dir) {
  try {
    return read_bundle(dir).problems;
  } catch (const InputError& e) {
    return {e.what()};
  }
}

GraphBundle load_bundle(const std::string& dir) {
  Loaded loaded = read_bundle(dir);
  if (!loaded.problems.empty()) throw InputError("invalid bundle " + dir + ": " + loaded.problems.front());
  return std::move(loaded.bundle);
}

void write_bundle(const GraphBundle& bundle, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  const json meta = {{"n", bundle.meta.n},
                     {"m", bundle.meta.m},
                     {"f", bundle.meta.f},
                     {"num_classes", bundle.meta.num_classes},
                     {"name", bundle.meta.name}};
  write_text_file((root / "meta.json").string(), meta.dump() + "\n");

  std::vector<std::uint32_t> edges;
  edges.reserve(2 * bundle.arcs.size());
  for (const auto& [u, v] : bundle.arcs) {
    edges.push_back(u);
    edges.push_back(v);
  }
  write_u32_file((root / "edges.bin").string(), edges);

  std::vector<float> feats(bundle.features.size());
  const auto d = bundle.features.data();
  for (std::size_t i = 0; i < d.size(); ++i) feats[i] = static_cast<float>(d[i]);
  write_f32_file((root / "features.bin").string(), feats);

  std::vector<std::int32_t> labels(bundle.labels.begin(), bundle.labels.end());
  write_i32_file((root / "labels.bin").string(), labels);

  const json splits = {{"train", bundle.splits.train}, {"val", bundle.splits.val}, {"test", bundle.splits.test}};
  write_text_file((root / "splits.json").string(), splits.dump() + "\n");
}

}  // namespace unifews

#include "unifews/metrics.hpp"

#include "unifews/errors.hpp"

namespace unifews {

std::uint64_t count_prop_flops(const MaskChain& chain, std::size_t f, std::size_t identity_rows,
                               std::uint64_t flops_per_mac) {
  std::uint64_t total = 0;
  for (const auto& mask : chain.layers) {
    total += flops_per_mac * static_cast<std::uint64_t>(mask.count()) * f;
    total += static_cast<std::uint64_t>(identity_rows) * f;
  }
  return total;
}

std::uint64_t count_trans_flops(std::size_t rows, const EntryMask& weight_mask, std::uint64_t flops_per_mac) {
  return flops_per_mac * static_cast<std::uint64_t>(rows) * weight_mask.count();
}

std::size_t argmax_row(const DenseMatrix& logits, std::size_t row) {
  const auto r = logits.row(row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.size(); ++c) {
    if (r[c] > r[best]) best = c;
  }
  return best;
}

double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const NodeId> split) {
  if (split.empty()) throw InputError("accuracy: empty split");
  if (labels.size() != logits.rows()) throw InputError("accuracy: labels length must equal logits rows");
  std::size_t hits = 0;
  for (NodeId id : split) {
    if (id >= logits.rows()) throw InputError("accuracy: split id out of range");
    if (labels[id] >= 0 && argmax_row(logits, id) == static_cast<std::size_t>(labels[id])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

std::uint64_t RunReport::total_prop_flops() const {
  std::uint64_t t = 0;
  for (const auto& l : layers) t += l.prop_flops;
  return t;
}

std::uint64_t RunReport::total_trans_flops() const {
  std::uint64_t t = 0;
  for (const auto& l : layers) t += l.trans_flops;
  return t;
}

double RunReport::mean_eta_a() const {
  double s = 0.0;
  std::size_t count = 0;
  for (const auto& l : layers) {
    if (!l.graph_stage) continue;
    s += l.eta_a;
    ++count;
  }
  return count ? s / static_cast<double>(count) : 0.0;
}

double RunReport::mean_eta_w() const {
  double s = 0.0;
  std::size_t count = 0;
  for (const auto& l : layers) {
    if (!l.weight_stage) continue;
    s += l.eta_w;
    ++count;
  }
  return count ? s / static_cast<double>(count) : 0.0;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["config"] = config;
  j["seed"] = seed;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) {
    const char* stage = l.graph_stage && l.weight_stage ? "joint" : (l.graph_stage ? "propagation" : "transform");
    j["layers"].push_back({{"stage", stage},
                           {"eta_a", l.eta_a},
                           {"eta_w", l.eta_w},
                           {"prop_flops", l.prop_flops},
                           {"trans_flops", l.trans_flops}});
  }
  j["totals"] = {{"eta_a", mean_eta_a()},
                 {"eta_w", mean_eta_w()},
                 {"prop_flops", total_prop_flops()},
                 {"trans_flops", total_trans_flops()},
                 {"flops", total_flops()}};
  j["accuracy"] = {{"train", accuracy.train}, {"val", accuracy.val}, {"test", accuracy.test}};
  j["wall_time_ms"] = wall_time_ms;
  if (!extras.is_null()) j["extras"] = extras;
  return j;
}

}  // namespace unifews

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unifews/bundle.hpp"
#include "unifews/gcn.hpp"
#include "unifews/metrics.hpp"
#include "unifews/propagation.hpp"

namespace unifews {

enum class ModelKind { Decoupled, Iterative };

/// Everything needed for one run on a bundle.
struct RunConfig {
  ModelKind model = ModelKind::Iterative;
  PropagationScheme scheme;  ///< decoupled propagation
  double r = 0.5;            ///< normalization exponent
  TrainConfig train;         ///< epochs == 0 on a decoupled run skips the transform stage
  double delta_a = 0.0;
  double delta_w = 0.0;
  std::uint64_t flops_per_mac = 2;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown values throw InputError.
  static RunConfig from_json(const nlohmann::json& j);
};

struct RunOutcome {
  RunReport report;
  /// Same totals rebuilt from mask popcounts alone.
  std::uint64_t closed_form_prop_flops = 0;
  std::uint64_t closed_form_trans_flops = 0;
  bool reconciled = false;
  PropagationTrace propagation;  ///< decoupled runs only
  ForwardTrace forward;          ///< evaluation pass of the trained model
  GcnModel model;                ///< selected snapshot (empty without a transform stage)
  std::vector<EpochLog> epochs;
};

/// Normalized self-looped diffusion of the bundle graph.
CsrGraph bundle_diffusion(const GraphBundle& bundle, double r);

RunOutcome run_decoupled(const GraphBundle& bundle, const RunConfig& cfg);
RunOutcome run_iterative(const GraphBundle& bundle, const RunConfig& cfg);
RunOutcome run_once(const GraphBundle& bundle, const RunConfig& cfg);

/// Closed-form FLOPs of a propagation trace from its masks.
std::uint64_t closed_form_prop_flops(const PropagationTrace& trace, const PropagationScheme& scheme, std::size_t n,
                                     std::size_t f, std::uint64_t flops_per_mac);
/// Closed-form prop and trans FLOPs of a forward pass from its masks.
std::pair<std::uint64_t, std::uint64_t> closed_form_forward_flops(const ForwardTrace& trace, const GcnModel& model,
                                                                  std::size_t n, std::uint64_t flops_per_mac);

/// grid.json: a RunConfig object plus "delta_a" and "delta_w" arrays whose
/// cartesian product is swept.
struct SweepConfig {
  RunConfig base;
  std::vector<double> delta_a{0.0};
  std::vector<double> delta_w{0.0};

  static SweepConfig from_json(const nlohmann::json& j);
  std::vector<RunConfig> points() const;
};

/// UNIFEWS_THREADS if set to a positive integer, else hardware concurrency.
std::size_t worker_count();

/// Runs every grid point on a bounded worker pool. Results keep grid order.
std::vector<RunOutcome> sweep(const GraphBundle& bundle, const SweepConfig& cfg, std::size_t workers);

/// One row per run; wall time is left out so reruns are byte-identical.
std::string sweep_csv(const std::vector<RunOutcome>& runs);

/// Bisection for the delta whose measured sparsity hits `target`, assuming
/// eta_of is non-decreasing in delta. Expands `hi` until it brackets.
double calibrate_threshold(const std::function<double(double)>& eta_of, double target, double hi = 1.0,
                           int iterations = 40);

}  // namespace unifews

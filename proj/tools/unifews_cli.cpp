// Command-line entry point: decoupled and iterative runs, threshold sweeps,
// theory checks and bundle validation.
//
// Exit codes: 0 ok, 1 input error, 2 numerical failure.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "unifews/bundle.hpp"
#include "unifews/errors.hpp"
#include "unifews/gcn.hpp"
#include "unifews/io.hpp"
#include "unifews/sweep.hpp"
#include "unifews/theory.hpp"

using namespace unifews;

namespace {

constexpr int kInputError = 1;
constexpr int kNumericalError = 2;

SkipMode parse_skip_mode(const std::string& s) {
  if (s == "residual") return SkipMode::Residual;
  if (s == "none") return SkipMode::None;
  if (s == "fallback") return SkipMode::Fallback;
  throw InputError("unknown skip mode '" + s + "'");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw InputError("cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw InputError("empty list");
  return out;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text_file(path, j.dump(2) + "\n");
  }
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

struct TrainFlags {
  int epochs = 200;
  std::size_t hidden = 512;
  int depth = 2;
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  bool bias = false;
  double delta_w = 0.0;
  std::string skip = "residual";
  int weight_prune_start = 0;
  int weight_freeze = -1;
  int edge_freeze = -1;
  double r = 0.5;
  std::uint64_t flops_per_mac = 2;
  bool epoch_log = false;
  std::string checkpoint;

  void add_to(CLI::App* app, bool iterative) {
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--hidden", hidden, "Hidden width")->capture_default_str();
    app->add_option("--depth", depth, "Number of weight layers")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--weight-decay", weight_decay)->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_flag("--bias", bias, "Add (never pruned) bias vectors");
    app->add_option("--delta-w", delta_w, "Weight threshold")->capture_default_str();
    app->add_option("--weight-prune-start", weight_prune_start, "First epoch with weight pruning");
    app->add_option("--weight-freeze-epoch", weight_freeze, "Freeze weight masks from this epoch (-1: never)");
    app->add_option("--r", r, "Normalization exponent")->capture_default_str();
    app->add_option("--flops-per-mac", flops_per_mac)->capture_default_str();
    app->add_flag("--epoch-log", epoch_log, "Embed the per-epoch log in the report");
    app->add_option("--checkpoint", checkpoint, "Write the selected model here");
    if (iterative) {
      app->add_option("--skip-mode", skip, "residual, none or fallback")->capture_default_str();
      app->add_option("--edge-freeze-epoch", edge_freeze, "Freeze edge masks from this epoch (-1: never)");
    }
  }

  void fill(RunConfig& cfg) const {
    cfg.train.epochs = epochs;
    cfg.train.hidden_width = hidden;
    cfg.train.layer_depth = depth;
    cfg.train.learning_rate = lr;
    cfg.train.weight_decay = weight_decay;
    cfg.train.seed = seed;
    cfg.train.bias = bias;
    cfg.train.skip = parse_skip_mode(skip);
    cfg.train.weight_prune.start_epoch = weight_prune_start;
    cfg.train.weight_prune.freeze_epoch = weight_freeze;
    cfg.train.edge_freeze_epoch = edge_freeze;
    cfg.delta_w = delta_w;
    cfg.r = r;
    cfg.flops_per_mac = flops_per_mac;
  }
};

nlohmann::json outcome_json(const RunOutcome& out) {
  nlohmann::json j = out.report.to_json();
  j["closed_form_flops"] = {{"prop_flops", out.closed_form_prop_flops},
                            {"trans_flops", out.closed_form_trans_flops},
                            {"reconciled", out.reconciled}};
  return j;
}

int run_theory(const std::string& check, std::size_t n, int seeds, double edge_prob, const std::string& deltas,
               int hops, double c, const std::string& out_path) {
  const std::vector<double> grid = parse_list(deltas);
  const std::vector<std::size_t> sizes = n ? std::vector<std::size_t>{n} : std::vector<std::size_t>{8, 16, 32};
  if (seeds <= 0) throw InputError("--seeds must be positive");
  std::ostringstream csv;
  csv.precision(17);
  bool all_hold = true;

  if (check == "thm43") {
    csv << "seed,n,delta_a,q_a,quad_form,chain_middle,chain_bound,holds\n";
    for (int s = 0; s < seeds; ++s) {
      const std::size_t nn = sizes[s % sizes.size()];
      const auto inst = random_instance(nn, edge_prob, s);
      for (double d : grid) {
        const auto rep = check_theorem_4_3(inst.t, inst.x, d);
        all_hold = all_hold && rep.bound_holds;
        csv << s << ',' << nn << ',' << d << ',' << rep.q_a << ',' << rep.quad_form << ',' << rep.chain_middle << ','
            << rep.chain_bound << ',' << (rep.bound_holds ? 1 : 0) << '\n';
      }
    }
  } else if (check == "thm42") {
    csv << "seed,n,delta_a,c,epsilon,err,bound,holds\n";
    const std::vector<double> cs = c > 0.0 ? std::vector<double>{c} : std::vector<double>{0.5, 1.0};
    for (int s = 0; s < seeds; ++s) {
      const std::size_t nn = sizes[s % sizes.size()];
      const auto inst = random_instance(nn, edge_prob, s);
      const CsrGraph lap = laplacian(inst.t);
      for (double d : grid) {
        const auto mask = sparsify_edges_message(inst.t, inst.x, d, EdgeMask::full(inst.t.nnz())).first;
        const CsrGraph lap_hat = pruned_laplacian(inst.t, mask);
        for (double cc : cs) {
          const auto rep = check_theorem_4_2(lap, lap_hat, inst.x, cc);
          all_hold = all_hold && rep.within_bound;
          csv << s << ',' << nn << ',' << d << ',' << cc << ',' << rep.epsilon << ',' << rep.err << ',' << rep.bound
              << ',' << (rep.within_bound ? 1 : 0) << '\n';
        }
      }
    }
  } else if (check == "prop44" || check == "smoothing") {
    // Mean over seeds of each {delta_a, hop} cell.
    std::vector<CurvePoint> acc;
    for (int s = 0; s < seeds; ++s) {
      const std::size_t nn = sizes[s % sizes.size()];
      const auto inst = random_instance(nn, edge_prob, s, 0.5, true);
      const DenseMatrix x(nn, 1, inst.x);
      std::vector<CurvePoint> rows;
      if (check == "prop44") {
        PropagationScheme scheme;
        scheme.kind = SchemeKind::SGC;
        scheme.hops = hops;
        rows = multi_hop_error_curve(inst.t, x, scheme, grid);
      } else {
        const double cc = c > 0.0 ? c : 1.0;
        const CsrGraph lap = laplacian(inst.t);
        PropagationScheme scheme;
        scheme.kind = SchemeKind::GenericSmoothing;
        scheme.hops = hops;
        scheme.c = cc;
        scheme.b = 1.0 / (1.0 + cc * max_eigenvalue(lap));
        rows = smoothing_distance(inst.t, x, scheme, grid, cc);
      }
      if (acc.empty()) acc = rows;
      else
        for (std::size_t i = 0; i < rows.size(); ++i) acc[i].value += rows[i].value;
    }
    for (auto& r : acc) r.value /= seeds;
    csv << curve_csv(acc);
  } else {
    throw InputError("unknown check '" + check + "' (expected thm42, thm43, prop44 or smoothing)");
  }
  write_text(csv.str(), out_path);
  if (!all_hold) {
    std::cerr << "theory: bound violated on at least one instance\n";
    return kNumericalError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entry-wise sparsified graph propagation and GCN training"};
  app.require_subcommand(1);

  // run-decoupled
  auto* dec = app.add_subcommand("run-decoupled", "Sparsified SGC/APPNP propagation plus an MLP transform");
  std::string bundle_dir, out_path = "-", scheme_name = "sgc", embedding_path;
  int hops = 2;
  double alpha = 0.1, delta_a = 0.0;
  bool skip = true;
  TrainFlags dec_flags;
  dec->add_option("--bundle", bundle_dir, "Graph bundle directory")->required();
  dec->add_option("--scheme", scheme_name, "sgc or appnp")->capture_default_str();
  dec->add_option("--hops", hops, "Propagation hops")->capture_default_str();
  dec->add_option("--alpha", alpha, "APPNP teleport probability")->capture_default_str();
  dec->add_option("--delta-a", delta_a, "Graph threshold")->capture_default_str();
  dec->add_flag("--skip,!--no-skip", skip, "Residual skip in SGC hops (default on)");
  dec->add_option("--out", out_path, "Report JSON path ('-' for stdout)");
  dec->add_option("--embedding", embedding_path, "Also write the propagated embedding as f32");
  dec_flags.add_to(dec, false);

  // run-iterative
  auto* it = app.add_subcommand("run-iterative", "Iterative GCN with joint edge and weight pruning");
  std::string it_bundle, it_out = "-";
  double it_delta_a = 0.0;
  TrainFlags it_flags;
  it->add_option("--bundle", it_bundle, "Graph bundle directory")->required();
  it->add_option("--delta-a", it_delta_a, "Graph threshold")->capture_default_str();
  it->add_option("--out", it_out, "Report JSON path ('-' for stdout)");
  it_flags.add_to(it, true);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Threshold grid sweep, one CSV row per grid point");
  std::string sw_bundle, sw_grid, sw_out = "-";
  sw->add_option("--bundle", sw_bundle, "Graph bundle directory")->required();
  sw->add_option("--grid", sw_grid, "grid.json")->required();
  sw->add_option("--out", sw_out, "CSV path ('-' for stdout)");

  // theory
  auto* th = app.add_subcommand("theory", "Numerical checks of the approximation bounds");
  std::string th_check, th_out = "-", th_deltas = "0,0.01,0.05,0.1";
  std::size_t th_n = 0;
  int th_seeds = 100, th_hops = 10;
  double th_p = 0.3, th_c = 0.0;
  th->add_option("--check", th_check, "thm42, thm43, prop44 or smoothing")->required();
  th->add_option("--n", th_n, "Graph size (0 cycles through 8, 16, 32)")->capture_default_str();
  th->add_option("--seeds", th_seeds, "Number of seeded instances")->capture_default_str();
  th->add_option("--edge-prob", th_p, "Erdos-Renyi edge probability")->capture_default_str();
  th->add_option("--deltas", th_deltas, "Comma-separated delta_a grid")->capture_default_str();
  th->add_option("--hops", th_hops, "Hops for prop44/smoothing")->capture_default_str();
  th->add_option("--c", th_c, "Smoothing regularization (0: {0.5, 1} for thm42, 1 otherwise)");
  th->add_option("--out", th_out, "CSV path ('-' for stdout)");

  // validate-bundle
  auto* vb = app.add_subcommand("validate-bundle", "Check a bundle directory against the format");
  std::string vb_bundle;
  vb->add_option("--bundle", vb_bundle, "Graph bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*dec) {
      RunConfig cfg;
      cfg.model = ModelKind::Decoupled;
      if (scheme_name == "sgc") cfg.scheme.kind = SchemeKind::SGC;
      else if (scheme_name == "appnp") cfg.scheme.kind = SchemeKind::APPNP;
      else throw InputError("unknown scheme '" + scheme_name + "'");
      cfg.scheme.hops = hops;
      cfg.scheme.alpha = alpha;
      cfg.scheme.skip = skip ? SkipMode::Residual : SkipMode::None;
      cfg.delta_a = delta_a;
      dec_flags.fill(cfg);
      if (cfg.train.epochs < 0) throw InputError("--epochs must be non-negative");
      const GraphBundle bundle = load_bundle(bundle_dir);
      if (cfg.train.epochs > 0) cfg.train.validate();
      RunOutcome out = run_decoupled(bundle, cfg);
      if (dec_flags.epoch_log) out.report.extras["epochs"] = epoch_log_json(out.epochs);
      if (!embedding_path.empty()) write_embedding_f32(out.propagation.embedding, embedding_path);
      if (!dec_flags.checkpoint.empty() && !out.model.layers.empty()) save_checkpoint(out.model, dec_flags.checkpoint);
      nlohmann::json j = outcome_json(out);
      j["propagation"] = nlohmann::json::parse(out.propagation.to_json());
      write_json(j, out_path);
    } else if (*it) {
      RunConfig cfg;
      cfg.model = ModelKind::Iterative;
      cfg.delta_a = it_delta_a;
      it_flags.fill(cfg);
      cfg.train.validate();
      const GraphBundle bundle = load_bundle(it_bundle);
      RunOutcome out = run_iterative(bundle, cfg);
      if (it_flags.epoch_log) out.report.extras["epochs"] = epoch_log_json(out.epochs);
      if (!it_flags.checkpoint.empty()) save_checkpoint(out.model, it_flags.checkpoint);
      write_json(outcome_json(out), it_out);
    } else if (*sw) {
      const GraphBundle bundle = load_bundle(sw_bundle);
      nlohmann::json grid;
      try {
        grid = nlohmann::json::parse(read_text_file(sw_grid));
      } catch (const nlohmann::json::parse_error& e) {
        throw InputError(sw_grid + ": " + e.what());
      }
      const SweepConfig cfg = SweepConfig::from_json(grid);
      const auto runs = sweep(bundle, cfg, worker_count());
      write_text(sweep_csv(runs), sw_out);
      for (const auto& r : runs) {
        if (!r.reconciled) {
          std::cerr << "sweep: FLOPs counters disagree with the closed-form mask count\n";
          return kNumericalError;
        }
      }
    } else if (*th) {
      return run_theory(th_check, th_n, th_seeds, th_p, th_deltas, th_hops, th_c, th_out);
    } else if (*vb) {
      const auto problems = validate_bundle(vb_bundle);
      if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << vb_bundle << ": " << p << '\n';
        return kInputError;
      }
      std::cout << vb_bundle << ": ok\n";
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return 0;
}

#include "unifews/gcn.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <tuple>

#include "unifews/errors.hpp"
#include "unifews/random.hpp"

namespace unifews {

GcnModel GcnModel::glorot(std::span<const std::size_t> dims, std::uint64_t seed, bool bias, SkipMode skip) {
  if (dims.size() < 2) throw InputError("GcnModel::glorot: need at least input and output dims");
  GcnModel model;
  model.skip = skip;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerSpec layer;
    layer.in_dim = dims[l];
    layer.out_dim = dims[l + 1];
    layer.w = DenseMatrix(layer.in_dim, layer.out_dim);
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    for (double& v : layer.w.data()) v = rng.uniform(-limit, limit);
    if (bias) layer.bias = std::vector<double>(layer.out_dim, 0.0);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<std::size_t> GcnModel::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in_dim);
  for (const auto& l : layers) d.push_back(l.out_dim);
  return d;
}

void GcnModel::validate() const {
  if (layers.empty()) throw InputError("GcnModel: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.w.rows() != layer.in_dim || layer.w.cols() != layer.out_dim) {
      throw InputError("GcnModel: layer " + std::to_string(l) + " weight shape does not match its dims");
    }
    if (l > 0 && layers[l - 1].out_dim != layer.in_dim) {
      throw InputError("GcnModel: layer " + std::to_string(l) + " input dim breaks the chain");
    }
    if (layer.bias && layer.bias->size() != layer.out_dim) {
      throw InputError("GcnModel: layer " + std::to_string(l) + " bias length mismatch");
    }
    if (!layer.w.all_finite()) throw InputError("GcnModel: non-finite weights in layer " + std::to_string(l));
  }
}

std::uint64_t ForwardTrace::prop_flops() const {
  std::uint64_t t = 0;
  for (const auto& l : layers) t += l.prop_flops;
  return t;
}

std::uint64_t ForwardTrace::trans_flops() const {
  std::uint64_t t = 0;
  for (const auto& l : layers) t += l.trans_flops;
  return t;
}

double ForwardTrace::mean_eta_a() const {
  if (layers.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : layers) s += l.eta_a;
  return s / static_cast<double>(layers.size());
}

double ForwardTrace::mean_eta_w() const {
  if (layers.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : layers) s += l.eta_w;
  return s / static_cast<double>(layers.size());
}

std::vector<LayerReport> ForwardTrace::layer_reports() const {
  std::vector<LayerReport> out;
  for (const auto& l : layers) {
    out.push_back({l.eta_a, l.eta_w, l.prop_flops, l.trans_flops, !edge_masks.layers.empty(), true});
  }
  return out;
}

DenseMatrix sparse_weight_matmul(const DenseMatrix& p, const DenseMatrix& w_hat, const EntryMask& kept,
                                 FlopCounter* counter) {
  if (p.cols() != w_hat.rows()) throw InputError("sparse_weight_matmul: inner dimensions differ");
  if (kept.length() != w_hat.size()) throw InputError("sparse_weight_matmul: mask length mismatch");
  const std::size_t in = w_hat.rows();
  const std::size_t out_dim = w_hat.cols();
  // Mostly-kept rows run as a contiguous axpy over W_hat (its pruned entries
  // are zero); sparse rows go through a compressed (column, value) list.
  std::vector<std::size_t> start(in + 1, 0);
  std::vector<char> dense_row(in, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  for (std::size_t j = 0; j < in; ++j) {
    for (std::size_t i = 0; i < out_dim; ++i) {
      if (kept.kept(j * out_dim + i)) {
        cols.push_back(static_cast<std::uint32_t>(i));
        vals.push_back(w_hat(j, i));
      }
    }
    start[j + 1] = cols.size();
    dense_row[j] = 2 * (start[j + 1] - start[j]) >= out_dim;
  }
  DenseMatrix out(p.rows(), out_dim);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto src = p.row(r);
    double* dst = out.row(r).data();
    for (std::size_t j = 0; j < in; ++j) {
      const double a = src[j];
      if (a == 0.0 || start[j] == start[j + 1]) continue;
      if (dense_row[j]) {
        const double* wj = w_hat.row(j).data();
        for (std::size_t i = 0; i < out_dim; ++i) dst[i] += a * wj[i];
      } else {
        for (std::size_t k = start[j]; k < start[j + 1]; ++k) dst[cols[k]] += a * vals[k];
      }
    }
  }
  if (counter) counter->mac(static_cast<std::uint64_t>(p.rows()) * cols.size());
  return out;
}

namespace {

ForwardTrace forward_impl(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x,
                          const ThresholdPolicy& policy, const ForwardOptions& options) {
  model.validate();
  policy.validate();
  if (x.cols() != model.layers.front().in_dim) throw InputError("forward: feature width does not match model");
  if (t) {
    if (t->n() != x.rows()) throw InputError("forward: X.rows must equal T.n");
    if (!t->has_self_loops()) throw InputError("forward: diffusion matrix must be self-looped");
    if (policy.graph_mode == GraphMode::MessageExact) {
      throw InputError("forward: exact message thresholding is only available for single-feature propagation");
    }
  }
  const std::size_t depth = model.layers.size();
  if (options.frozen) {
    if (options.frozen->weights.size() != depth || (t && options.frozen->edges.size() != depth)) {
      throw InputError("forward: frozen mask snapshot does not match the model depth");
    }
  }

  ForwardTrace trace;
  const DenseMatrix* input = &x;
  DenseMatrix h;
  EdgeMask edge_mask = t ? EdgeMask::full(t->nnz()) : EdgeMask{};
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = model.layers[l];
    LayerTrace lt;

    const FirstLayerInput* reuse = l == 0 ? options.first_layer : nullptr;
    if (reuse && options.frozen && t && !(options.frozen->edges[0] == reuse->mask)) reuse = nullptr;

    std::shared_ptr<const DenseMatrix> p;
    std::vector<double> norms;
    if (reuse) {
      p = reuse->propagated;
      norms = reuse->column_norms;
      if (t) {
        edge_mask = reuse->mask;
        lt.prop_flops = reuse->prop_flops;
      }
    } else if (t) {
      if (options.frozen) {
        edge_mask = options.frozen->edges[l];
      } else {
        PruneStats stats;
        std::tie(edge_mask, stats) =
            sparsify_edges_nodewise(*t, *input, policy.delta_a, edge_mask, policy.exempt_self_loops);
      }
      FlopCounter pc{0, options.flops_per_mac};
      p = std::make_shared<const DenseMatrix>(propagate_hop(*t, edge_mask, *input, model.skip, &pc));
      lt.prop_flops = pc.flops;
    } else {
      p = std::make_shared<const DenseMatrix>(*input);
    }
    if (t) {
      lt.q_a = edge_mask.dropped();
      lt.eta_a = static_cast<double>(lt.q_a) / static_cast<double>(t->nnz());
      trace.edge_masks.layers.push_back(edge_mask);
    }

    WeightPruneResult wp;
    if (options.frozen) {
      wp.kept = options.frozen->weights[l];
      if (wp.kept.length() != layer.w.size()) throw InputError("forward: frozen weight mask length mismatch");
      wp.pruned = layer.w;
      auto d = wp.pruned.data();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!wp.kept.kept(i)) d[i] = 0.0;
      }
    } else {
      if (norms.empty()) norms = p->column_norms();
      wp = sparsify_weights(layer.w, norms, policy.delta_w);
    }
    lt.q_w = wp.kept.dropped();
    lt.eta_w = static_cast<double>(lt.q_w) / static_cast<double>(layer.w.size());

    FlopCounter tc{0, options.flops_per_mac};
    DenseMatrix z = sparse_weight_matmul(*p, wp.pruned, wp.kept, &tc);
    lt.trans_flops = tc.flops;
    if (layer.bias) {
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto zr = z.row(r);
        for (std::size_t i = 0; i < zr.size(); ++i) zr[i] += (*layer.bias)[i];
      }
    }
    if (!z.all_finite()) {
      throw NumericalError("forward: non-finite activations in layer " + std::to_string(l));
    }

    h = z;
    if (l + 1 < depth) {
      for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
    }
    input = &h;
    if (options.keep_cache) trace.cache.push_back({std::move(p), std::move(z), std::move(wp.pruned)});
    trace.weight_masks.push_back(std::move(wp.kept));
    trace.layers.push_back(lt);
  }
  trace.logits = std::move(h);
  return trace;
}

// Decay covers the kept weights only, matching the masked gradient.
double weight_penalty(const GcnModel& model, const std::vector<EntryMask>& kept, double weight_decay) {
  if (weight_decay == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto w = model.layers[l].w.data();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (kept[l].kept(i)) s += w[i] * w[i];
  }
  return 0.5 * weight_decay * s;
}

/// Mean cross-entropy over ids; fills d_logits when non-null.
double cross_entropy(const DenseMatrix& logits, std::span<const int> labels, std::span<const NodeId> ids,
                     DenseMatrix* d_logits) {
  if (ids.empty()) throw InputError("loss: empty training split");
  const double scale = 1.0 / static_cast<double>(ids.size());
  double loss = 0.0;
  std::vector<double> prob(logits.cols());
  for (NodeId id : ids) {
    if (id >= logits.rows()) throw InputError("loss: node id out of range");
    const int y = labels[id];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw InputError("loss: training node " + std::to_string(id) + " has no valid label");
    }
    const auto z = logits.row(id);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      prob[c] = std::exp(z[c] - zmax);
      sum += prob[c];
    }
    loss += -(z[y] - zmax - std::log(sum));
    if (d_logits) {
      auto g = d_logits->row(id);
      for (std::size_t c = 0; c < z.size(); ++c) g[c] += scale * (prob[c] / sum - (static_cast<int>(c) == y ? 1.0 : 0.0));
    }
  }
  return loss * scale;
}

/// dH = d/dH of propagate_hop(T, mask, H) applied to dP.
DenseMatrix propagate_hop_backward(const CsrGraph& t, const EdgeMask& mask, const DenseMatrix& dp, SkipMode skip) {
  const std::size_t f = dp.cols();
  DenseMatrix dh = skip == SkipMode::Residual ? dp : DenseMatrix(dp.rows(), f);
  const auto ci = t.col_idx();
  const auto vals = t.values();
  for (std::size_t u = 0; u < t.n(); ++u) {
    const auto src = dp.row(u);
    bool any = false;
    for (std::size_t k = t.row_begin(u); k < t.row_end(u); ++k) {
      if (!mask.kept(k)) continue;
      any = true;
      const double w = vals[k];
      auto dst = dh.row(ci[k]);
      for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    }
    if (skip == SkipMode::Fallback && !any) {
      auto dst = dh.row(u);
      for (std::size_t j = 0; j < f; ++j) dst[j] += src[j];
    }
  }
  return dh;
}

}  // namespace

FirstLayerInput prepare_first_layer(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x,
                                    const ThresholdPolicy& policy, std::uint64_t flops_per_mac) {
  FirstLayerInput in;
  if (t) {
    if (t->n() != x.rows()) throw InputError("forward: X.rows must equal T.n");
    PruneStats stats;
    std::tie(in.mask, stats) =
        sparsify_edges_nodewise(*t, x, policy.delta_a, EdgeMask::full(t->nnz()), policy.exempt_self_loops);
    FlopCounter pc{0, flops_per_mac};
    in.propagated = std::make_shared<const DenseMatrix>(propagate_hop(*t, in.mask, x, model.skip, &pc));
    in.prop_flops = pc.flops;
  } else {
    in.propagated = std::make_shared<const DenseMatrix>(x);
  }
  in.column_norms = in.propagated->column_norms();
  return in;
}

ForwardTrace forward_sparsified(const GcnModel& model, const CsrGraph& t, const DenseMatrix& x,
                                const ThresholdPolicy& policy, const ForwardOptions& options) {
  return forward_impl(model, &t, x, policy, options);
}

ForwardTrace mlp_forward(const GcnModel& model, const DenseMatrix& h0, double delta_w,
                         const ForwardOptions& options) {
  ThresholdPolicy policy;
  policy.delta_w = delta_w;
  return forward_impl(model, nullptr, h0, policy, options);
}

double loss_value(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x, std::span<const int> labels,
                  std::span<const NodeId> ids, const ThresholdPolicy& policy, double weight_decay,
                  const MaskSnapshot* frozen) {
  ForwardOptions opts;
  opts.frozen = frozen;
  const ForwardTrace fwd = forward_impl(model, t, x, policy, opts);
  return cross_entropy(fwd.logits, labels, ids, nullptr) + weight_penalty(model, fwd.weight_masks, weight_decay);
}

Gradients loss_and_gradients(const GcnModel& model, const CsrGraph* t, const DenseMatrix& x,
                             std::span<const int> labels, std::span<const NodeId> ids,
                             const ThresholdPolicy& policy, double weight_decay, const MaskSnapshot* frozen,
                             const FirstLayerInput* first_layer) {
  if (labels.size() != x.rows()) throw InputError("loss: labels length must equal node count");
  ForwardOptions opts;
  opts.frozen = frozen;
  opts.first_layer = first_layer;
  opts.keep_cache = true;
  Gradients g;
  g.trace = forward_impl(model, t, x, policy, opts);
  const std::size_t depth = model.layers.size();

  DenseMatrix dz(g.trace.logits.rows(), g.trace.logits.cols());
  g.loss = cross_entropy(g.trace.logits, labels, ids, &dz) + weight_penalty(model, g.trace.weight_masks, weight_decay);
  g.w.resize(depth);
  g.bias.resize(depth);

  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = model.layers[l];
    const auto& cache = g.trace.cache[l];
    const auto& kept = g.trace.weight_masks[l];
    const std::size_t in = layer.in_dim;
    const std::size_t out = layer.out_dim;

    std::vector<char> active(dz.rows(), 0);
    for (std::size_t r = 0; r < dz.rows(); ++r) {
      const auto row = dz.row(r);
      active[r] = std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; });
    }

    DenseMatrix gw(in, out);
    for (std::size_t r = 0; r < dz.rows(); ++r) {
      if (!active[r]) continue;
      const auto pr = cache.propagated->row(r);
      const auto dr = dz.row(r);
      for (std::size_t j = 0; j < in; ++j) {
        const double a = pr[j];
        if (a == 0.0) continue;
        auto dst = gw.row(j);
        for (std::size_t i = 0; i < out; ++i) dst[i] += a * dr[i];
      }
    }
    for (std::size_t j = 0; j < in; ++j) {
      for (std::size_t i = 0; i < out; ++i) {
        const std::size_t pos = j * out + i;
        gw(j, i) = kept.kept(pos) ? gw(j, i) + weight_decay * layer.w(j, i) : 0.0;
      }
    }
    g.w[l] = std::move(gw);
    if (layer.bias) {
      std::vector<double> gb(out, 0.0);
      for (std::size_t r = 0; r < dz.rows(); ++r) {
        if (!active[r]) continue;
        const auto dr = dz.row(r);
        for (std::size_t i = 0; i < out; ++i) gb[i] += dr[i];
      }
      g.bias[l] = std::move(gb);
    }
    if (l == 0) break;

    // dP = dZ W_hat^T, then back through propagation and the previous ReLU.
    DenseMatrix dp(dz.rows(), in);
    for (std::size_t r = 0; r < dz.rows(); ++r) {
      if (!active[r]) continue;
      const auto dr = dz.row(r);
      auto dst = dp.row(r);
      for (std::size_t j = 0; j < in; ++j) {
        const auto wj = cache.w_hat.row(j);
        double s = 0.0;
        for (std::size_t i = 0; i < out; ++i) s += dr[i] * wj[i];
        dst[j] = s;
      }
    }
    DenseMatrix dh = t ? propagate_hop_backward(*t, g.trace.edge_masks.layers[l], dp, model.skip) : std::move(dp);
    const auto& prev_pre = g.trace.cache[l - 1].pre;
    auto dd = dh.data();
    const auto zd = prev_pre.data();
    for (std::size_t i = 0; i < dd.size(); ++i) {
      if (!(zd[i] > 0.0)) dd[i] = 0.0;
    }
    dz = std::move(dh);
  }
  return g;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs <= 0) throw InputError("TrainConfig: epochs must be positive");
  if (!(learning_rate >= 0.0)) throw InputError("TrainConfig: learning_rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw InputError("TrainConfig: weight_decay must be non-negative");
  if (layer_depth < 1) throw InputError("TrainConfig: layer_depth must be at least 1");
  if (hidden_width == 0) throw InputError("TrainConfig: hidden_width must be positive");
}

namespace {

const char* skip_name(SkipMode s) {
  switch (s) {
    case SkipMode::None: return "none";
    case SkipMode::Residual: return "residual";
    case SkipMode::Fallback: return "fallback";
  }
  return "?";
}

}  // namespace

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"hidden_width", hidden_width},
          {"layer_depth", layer_depth},
          {"bias", bias},
          {"optimizer", optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"skip", skip_name(skip)},
          {"weight_prune", {{"start_epoch", weight_prune.start_epoch}, {"freeze_epoch", weight_prune.freeze_epoch}}},
          {"edge_freeze_epoch", edge_freeze_epoch}};
}

nlohmann::json epoch_log_json(const std::vector<EpochLog>& epochs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : epochs) {
    arr.push_back({{"epoch", e.epoch},
                   {"loss", e.loss},
                   {"train_acc", e.train_acc},
                   {"val_acc", e.val_acc},
                   {"eta_a", e.eta_a},
                   {"eta_w", e.eta_w},
                   {"flops", e.flops}});
  }
  return arr;
}

namespace {

struct AdamState {
  std::vector<DenseMatrix> m, v;
  std::vector<std::vector<double>> mb, vb;
  long step = 0;
};

void apply_update(GcnModel& model, const Gradients& g, const TrainConfig& cfg, AdamState& st) {
  const double lr = cfg.learning_rate;
  if (cfg.optimizer == Optimizer::SGD) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto w = model.layers[l].w.data();
      const auto gw = g.w[l].data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
      if (model.layers[l].bias) {
        auto& b = *model.layers[l].bias;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * g.bias[l][i];
      }
    }
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++st.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  auto step = [&](double& param, double grad, double& m, double& v) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    param -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto w = model.layers[l].w.data();
    const auto gw = g.w[l].data();
    auto m = st.m[l].data();
    auto v = st.v[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) step(w[i], gw[i], m[i], v[i]);
    if (model.layers[l].bias) {
      auto& b = *model.layers[l].bias;
      for (std::size_t i = 0; i < b.size(); ++i) step(b[i], g.bias[l][i], st.mb[l][i], st.vb[l][i]);
    }
  }
}

}  // namespace

TrainResult train(const GcnModel& initial, const CsrGraph* t, const DenseMatrix& x, std::span<const int> labels,
                  const Splits& splits, const TrainConfig& cfg, const ThresholdPolicy& policy) {
  cfg.validate();
  policy.validate();
  initial.validate();
  if (labels.size() != x.rows()) throw InputError("train: labels length must equal node count");
  if (splits.train.empty()) throw InputError("train: empty training split");
  for (NodeId id : splits.train) {
    if (id >= labels.size() || labels[id] < 0) {
      throw InputError("train: training node " + std::to_string(id) + " has no valid label");
    }
  }
  const auto started = std::chrono::steady_clock::now();

  GcnModel model = initial;
  AdamState st;
  for (const auto& layer : model.layers) {
    st.m.emplace_back(layer.in_dim, layer.out_dim);
    st.v.emplace_back(layer.in_dim, layer.out_dim);
    st.mb.emplace_back(layer.out_dim, 0.0);
    st.vb.emplace_back(layer.out_dim, 0.0);
  }

  const std::span<const NodeId> val_ids = splits.val.empty() ? std::span<const NodeId>(splits.train)
                                                             : std::span<const NodeId>(splits.val);
  const FirstLayerInput first = prepare_first_layer(model, t, x, policy);
  TrainResult result;
  double best_val = -1.0;
  std::optional<MaskSnapshot> frozen;
  std::optional<MaskSnapshot> best_frozen;
  GcnModel best = model;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ThresholdPolicy pol = policy;
    if (epoch < cfg.weight_prune.start_epoch) pol.delta_w = 0.0;

    Gradients g = loss_and_gradients(model, t, x, labels, splits.train, pol, cfg.weight_decay,
                                     frozen ? &*frozen : nullptr, &first);
    if (!std::isfinite(g.loss)) {
      throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch));
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = g.loss;
    log.train_acc = accuracy(g.trace.logits, labels, splits.train);
    log.val_acc = accuracy(g.trace.logits, labels, val_ids);
    for (const auto& lt : g.trace.layers) {
      log.eta_a.push_back(lt.eta_a);
      log.eta_w.push_back(lt.eta_w);
    }
    log.flops = g.trace.prop_flops() + g.trace.trans_flops();
    result.epochs.push_back(log);

    if (log.val_acc > best_val) {
      best_val = log.val_acc;
      best = model;
      best_frozen = frozen;
    }

    // Freezing snapshots the masks this epoch's forward pass produced.
    const bool freeze_w = cfg.weight_prune.freeze_epoch >= 0 && epoch == cfg.weight_prune.freeze_epoch;
    const bool freeze_e = t && cfg.edge_freeze_epoch >= 0 && epoch == cfg.edge_freeze_epoch;
    if (freeze_w || freeze_e) {
      MaskSnapshot snap = frozen ? *frozen : g.trace.masks();
      if (freeze_w) snap.weights = g.trace.weight_masks;
      if (freeze_e) snap.edges = g.trace.edge_masks.layers;
      frozen = std::move(snap);
    }

    apply_update(model, g, cfg, st);
    for (const auto& layer : model.layers) {
      if (!layer.w.all_finite()) throw NumericalError("train: weights diverged at epoch " + std::to_string(epoch));
    }
  }

  // Final evaluation of the selected snapshot under the same mask regime.
  ForwardOptions opts;
  opts.frozen = best_frozen ? &*best_frozen : nullptr;
  opts.first_layer = &first;
  ForwardTrace fwd = t ? forward_sparsified(best, *t, x, policy, opts) : mlp_forward(best, x, policy.delta_w, opts);

  RunReport& rep = result.report;
  rep.seed = cfg.seed;
  rep.config = cfg.to_json();
  rep.config["delta_a"] = policy.delta_a;
  rep.config["delta_w"] = policy.delta_w;
  rep.config["model"] = t ? "gcn" : "mlp";
  rep.layers = fwd.layer_reports();
  rep.accuracy.train = accuracy(fwd.logits, labels, splits.train);
  rep.accuracy.val = splits.val.empty() ? 0.0 : accuracy(fwd.logits, labels, splits.val);
  rep.accuracy.test = splits.test.empty() ? 0.0 : accuracy(fwd.logits, labels, splits.test);
  result.final_trace = fwd;
  rep.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw InputError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[pos + b]) << (8 * b);
  pos += 4;
  return v;
}

}  // namespace

void save_checkpoint(const GcnModel& model, const std::string& path) {
  model.validate();
  std::vector<unsigned char> out;
  const auto dims = model.dims();
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (auto d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& layer : model.layers)
    for (double v : layer.w.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (const auto& layer : model.layers) {
    if (!layer.bias) continue;
    for (double v : *layer.bias) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

GcnModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path);
  const std::vector<unsigned char> in{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  const std::uint32_t depth = get_u32(in, pos);
  if (depth == 0 || depth > 1024) throw InputError("checkpoint: implausible layer count");
  std::vector<std::size_t> dims(depth + 1);
  for (auto& d : dims) d = get_u32(in, pos);
  GcnModel model;
  std::size_t bias_len = 0;
  for (std::uint32_t l = 0; l < depth; ++l) {
    LayerSpec layer;
    layer.in_dim = dims[l];
    layer.out_dim = dims[l + 1];
    layer.w = DenseMatrix(layer.in_dim, layer.out_dim);
    for (double& v : layer.w.data()) v = std::bit_cast<float>(get_u32(in, pos));
    bias_len += layer.out_dim;
    model.layers.push_back(std::move(layer));
  }
  const std::size_t rest = in.size() - pos;
  if (rest == 4 * bias_len) {
    for (auto& layer : model.layers) {
      layer.bias = std::vector<double>(layer.out_dim);
      for (double& v : *layer.bias) v = std::bit_cast<float>(get_u32(in, pos));
    }
  } else if (rest != 0) {
    throw InputError("checkpoint: trailing bytes do not match a bias block");
  }
  model.validate();
  return model;
}

}  // namespace unifews

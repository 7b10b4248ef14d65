#include "mdc/nfn.hpp"

#include <cmath>
#include <stdexcept>

#include "mdc/error.hpp"
#include "mdc/random.hpp"

namespace mdc::nfn {

using ad::Tensor;
using ad::Var;

namespace {

Tensor uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, BnMode mode) {
  ad::Graph& g = *x.graph;
  const std::size_t batch = x.rows(), features = x.cols();
  if (state.running_mean.empty()) {
    state.running_mean.assign(features, 0.0);
    state.running_var.assign(features, 1.0);
  }
  if (state.running_mean.size() != features || state.running_var.size() != features)
    throw ShapeError("batch norm state has " + std::to_string(state.running_mean.size()) + " features, input has " +
                     std::to_string(features));
  if (mode == BnMode::kInfer) {
    if (!state.initialized) throw std::logic_error("infer-mode batch norm with uninitialized running statistics");
    Tensor mean = Tensor::matrix(1, features), inv = Tensor::matrix(1, features);
    for (std::size_t j = 0; j < features; ++j) {
      mean[j] = state.running_mean[j];
      inv[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
    }
    return (x - g.constant(std::move(mean))) * g.constant(std::move(inv)) * gamma + beta;
  }
  if (batch < 2) throw std::invalid_argument("train-mode batch norm needs a batch of at least 2");
  const double inv_b = 1.0 / static_cast<double>(batch);
  Var mu = ad::scale(ad::sum_rows(x), inv_b);
  Var xc = x - mu;
  Var var = ad::scale(ad::sum_rows(ad::square(xc)), inv_b);
  Var inv_std = ad::reciprocal(ad::sqrt(ad::add_scalar(var, state.epsilon)));
  Var out = xc * inv_std * gamma + beta;
  const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
  const double m = state.momentum;
  for (std::size_t j = 0; j < features; ++j) {
    state.running_mean[j] = m * state.running_mean[j] + (1.0 - m) * mu.value()[j];
    state.running_var[j] = m * state.running_var[j] + (1.0 - m) * var.value()[j] * unbias;
  }
  state.initialized = true;
  return out;
}

LstmState lstm_step(Var x, Var h_prev, Var c_prev, const LstmLayerVars& p) {
  const std::size_t width = p.w_ih.rows();
  if (h_prev.cols() != width || c_prev.cols() != width || x.cols() != p.w_ix.rows())
    throw ShapeError("lstm_step: state or input width does not match layer");
  Var i = ad::sigmoid(ad::matmul(x, p.w_ix) + ad::matmul(h_prev, p.w_ih) + c_prev * p.w_ic + p.b_i);
  Var f = ad::sigmoid(ad::matmul(x, p.w_fx) + ad::matmul(h_prev, p.w_fh) + c_prev * p.w_fc + p.b_f);
  Var c = f * c_prev + i * ad::tanh(ad::matmul(x, p.w_cx) + ad::matmul(h_prev, p.w_ch) + p.b_c);
  Var o = ad::sigmoid(ad::matmul(x, p.w_ox) + ad::matmul(h_prev, p.w_oh) + c_prev * p.w_oc + p.b_o);
  Var h = o * ad::tanh(c);
  return {h, c};
}

void NfnArch::validate() const {
  if (width == 0 || n_features == 0 || window == 0) throw ConfigError("nfn width, feature count and window must be positive");
  jdan.validate();
}

Nfn::Nfn(NfnArch arch, std::uint64_t seed) : arch_(std::move(arch)), seed_(seed) {
  arch_.validate();
  Rng rng(seed);
  const std::size_t w = arch_.width;
  const double hb = 1.0 / std::sqrt(static_cast<double>(w));
  auto add = [&](std::string name, Tensor t) {
    params_.push_back({std::move(name), std::make_shared<Tensor>(std::move(t))});
  };
  for (std::size_t l = 0; l < arch_.n_lstm_layers(); ++l) {
    const std::size_t in = l == 0 ? arch_.n_features : w;
    const double xb = 1.0 / std::sqrt(static_cast<double>(in));
    const std::string pre = "lstm" + std::to_string(l) + ".";
    for (const char gate : {'i', 'f', 'c', 'o'}) {
      add(pre + "w_" + gate + "x", uniform_matrix(rng, in, w, xb));
      add(pre + "w_" + gate + "h", uniform_matrix(rng, w, w, hb));
      if (gate != 'c') add(pre + "w_" + gate + "c", uniform_matrix(rng, 1, w, hb));
    }
    add(pre + "b_i", Tensor::matrix(1, w, 0.0));
    add(pre + "b_f", Tensor::matrix(1, w, 1.0));
    add(pre + "b_c", Tensor::matrix(1, w, 0.0));
    add(pre + "b_o", Tensor::matrix(1, w, 0.0));
  }
  add("bn.gamma", Tensor::matrix(1, w, 1.0));
  add("bn.beta", Tensor::matrix(1, w, 0.0));
  add("fc.w", uniform_matrix(rng, w, w, hb));
  add("fc.b", Tensor::matrix(1, w, 0.0));
  const jdan::JdanArch& ja = arch_.jdan;
  add("head_weight.w", uniform_matrix(rng, w, ja.weight_count(), hb));
  add("head_weight.b", Tensor::matrix(1, ja.weight_count(), -2.0));
  add("head_bias.w", uniform_matrix(rng, w, ja.bias_count(), hb));
  add("head_bias.b", Tensor::matrix(1, ja.bias_count(), 0.0));
  if (ja.logit_count() > 0) {
    add("head_logit.w", uniform_matrix(rng, w, ja.logit_count(), hb));
    add("head_logit.b", Tensor::matrix(1, ja.logit_count(), 0.0));
  }
  bn_.running_mean.assign(w, 0.0);
  bn_.running_var.assign(w, 1.0);
}

Nfn::Nfn(const Nfn& other) : arch_(other.arch_), seed_(other.seed_), bn_(other.bn_) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back({p.name, std::make_shared<Tensor>(*p.tensor)});
}

Nfn& Nfn::operator=(const Nfn& other) {
  if (this != &other) {
    Nfn copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor& Nfn::parameter(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return *p.tensor;
  throw std::out_of_range("no nfn parameter named '" + std::string(name) + "'");
}

const Tensor& Nfn::parameter(std::string_view name) const { return const_cast<Nfn*>(this)->parameter(name); }

std::size_t Nfn::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor->size();
  return n;
}

jdan::GraphParams Nfn::forward(ad::Graph& g, std::span<const Tensor* const> windows, BnMode mode,
                               std::vector<Var>* param_vars) {
  return run(g, windows, mode, bn_, param_vars);
}

jdan::GraphParams Nfn::forward_infer(ad::Graph& g, std::span<const Tensor* const> windows) const {
  BatchNormState bn = bn_;
  return run(g, windows, BnMode::kInfer, bn, nullptr);
}

jdan::GraphParams Nfn::run(ad::Graph& g, std::span<const Tensor* const> windows, BnMode mode, BatchNormState& bn,
                           std::vector<Var>* param_vars) const {
  const std::size_t batch = windows.size();
  const std::size_t steps = arch_.window, feats = arch_.n_features, w = arch_.width;
  if (batch == 0) throw ShapeError("nfn forward on an empty batch");
  for (const Tensor* win : windows)
    if (win->rows() != steps || win->cols() != feats)
      throw ShapeError("window shape " + ad::shape_string(win->shape()) + " does not match (" + std::to_string(steps) +
                       "x" + std::to_string(feats) + ")");

  std::vector<Var> leaves;
  leaves.reserve(params_.size());
  for (const auto& p : params_) leaves.push_back(g.parameter(std::shared_ptr<const Tensor>(p.tensor)));
  if (param_vars) *param_vars = leaves;

  std::size_t cursor = 0;
  std::vector<LstmLayerVars> layers(arch_.n_lstm_layers());
  for (auto& L : layers) {
    Var* slots[15] = {&L.w_ix, &L.w_ih, &L.w_ic, &L.w_fx, &L.w_fh, &L.w_fc, &L.w_cx, &L.w_ch,
                      &L.w_ox, &L.w_oh, &L.w_oc, &L.b_i,  &L.b_f,  &L.b_c,  &L.b_o};
    for (auto* s : slots) *s = leaves[cursor++];
  }

  std::vector<Var> seq(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    Tensor xk = Tensor::matrix(batch, feats);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t f = 0; f < feats; ++f) xk[b * feats + f] = windows[b]->at(k, f);
    seq[k] = g.constant(std::move(xk));
  }
  auto run_layer = [&](const LstmLayerVars& L, const std::vector<Var>& in) {
    std::vector<Var> out(steps);
    Var h = g.constant(Tensor::matrix(batch, w));
    Var c = g.constant(Tensor::matrix(batch, w));
    for (std::size_t k = 0; k < steps; ++k) {
      LstmState s = lstm_step(in[k], h, c, L);
      h = s.h;
      c = s.c;
      out[k] = h;
    }
    return out;
  };
  seq = run_layer(layers[0], seq);
  for (std::size_t blk = 0; blk < arch_.n_blocks; ++blk) {
    std::vector<Var> inner = run_layer(layers[1 + 2 * blk], seq);
    inner = run_layer(layers[2 + 2 * blk], inner);
    for (std::size_t k = 0; k < steps; ++k) seq[k] = seq[k] + inner[k];
  }

  Var gamma = leaves[cursor++], beta = leaves[cursor++];
  Var fc_w = leaves[cursor++], fc_b = leaves[cursor++];
  Var hw_w = leaves[cursor++], hw_b = leaves[cursor++];
  Var hb_w = leaves[cursor++], hb_b = leaves[cursor++];
  Var normed = batch_norm(seq.back(), gamma, beta, bn, mode);
  Var z = ad::tanh(ad::matmul(normed, fc_w) + fc_b);
  jdan::GraphParams out;
  out.weights = ad::clamp_min(ad::softplus(ad::matmul(z, hw_w) + hw_b), 1e-12);
  out.biases = ad::matmul(z, hb_w) + hb_b;
  if (arch_.jdan.logit_count() > 0) {
    Var hl_w = leaves[cursor++], hl_b = leaves[cursor++];
    out.logits = ad::matmul(z, hl_w) + hl_b;
  }
  return out;
}

std::vector<jdan::JdanParams> Nfn::infer_batch(std::span<const Tensor* const> windows) const {
  ad::Graph g(false);
  jdan::GraphParams gp = forward_infer(g, windows);
  const Tensor& W = gp.weights.value();
  const Tensor& B = gp.biases.value();
  std::vector<jdan::JdanParams> out(windows.size());
  for (std::size_t b = 0; b < windows.size(); ++b) {
    auto& p = out[b];
    p.weights.assign(W.data().begin() + static_cast<std::ptrdiff_t>(b * W.cols()),
                     W.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * W.cols()));
    p.biases.assign(B.data().begin() + static_cast<std::ptrdiff_t>(b * B.cols()),
                    B.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * B.cols()));
    if (gp.logits.valid()) {
      const Tensor& L = gp.logits.value();
      p.logits.assign(L.data().begin() + static_cast<std::ptrdiff_t>(b * L.cols()),
                      L.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * L.cols()));
    }
  }
  return out;
}

jdan::JdanParams Nfn::infer(const Tensor& window) const {
  const Tensor* w = &window;
  return infer_batch(std::span<const Tensor* const>(&w, 1)).front();
}

jdan::ForecastDistribution Nfn::distribution(const Tensor& window) const {
  return jdan::ForecastDistribution(arch_.jdan, infer(window));
}

}  // namespace mdc::nfn

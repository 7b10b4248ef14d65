#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdc/jdan.hpp"
#include "mdc/jdan_graph.hpp"
#include "mdc/ops.hpp"

// Forecast network: maps a lag window of features to the full JDAN
// parameter set through a residual LSTM stack, batch normalization, one
// hidden fully connected layer and three output heads.
namespace mdc::nfn {

enum class BnMode { kTrain, kInfer };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;
  bool initialized = false;  // set by the first train-mode batch
};

// Train mode normalizes with batch statistics (biased variance) and folds
// them into the running statistics: r = momentum * r + (1 - momentum) * batch,
// using the unbiased variance. Infer mode uses the running statistics only.
ad::Var batch_norm(ad::Var x, ad::Var gamma, ad::Var beta, BatchNormState& state, BnMode mode);

// The fifteen tensors of one peephole LSTM layer. Input/recurrent weights
// are in x out matrices; peephole weights and biases are 1 x width rows.
struct LstmLayerVars {
  ad::Var w_ix, w_ih, w_ic;
  ad::Var w_fx, w_fh, w_fc;
  ad::Var w_cx, w_ch;
  ad::Var w_ox, w_oh, w_oc;
  ad::Var b_i, b_f, b_c, b_o;
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

LstmState lstm_step(ad::Var x, ad::Var h_prev, ad::Var c_prev, const LstmLayerVars& p);

struct NfnArch {
  std::size_t n_blocks = 8;  // residual blocks of two LSTM layers each
  std::size_t width = 64;
  std::size_t n_features = 1;
  std::size_t window = 1;  // lag steps per sample
  jdan::JdanArch jdan;

  void validate() const;
  std::size_t n_lstm_layers() const { return 1 + 2 * n_blocks; }
};

struct NamedTensor {
  std::string name;
  std::shared_ptr<ad::Tensor> tensor;
};

class Nfn {
 public:
  Nfn(NfnArch arch, std::uint64_t seed);
  Nfn(const Nfn& other);
  Nfn& operator=(const Nfn& other);
  Nfn(Nfn&&) noexcept = default;
  Nfn& operator=(Nfn&&) noexcept = default;

  const NfnArch& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  ad::Tensor& parameter(std::string_view name);
  const ad::Tensor& parameter(std::string_view name) const;
  std::size_t parameter_count() const;

  BatchNormState& bn_state() { return bn_; }
  const BatchNormState& bn_state() const { return bn_; }

  // windows: each window x features (row-major). Train mode updates the
  // batch-norm running statistics. param_vars receives the graph leaves in
  // parameters() order.
  jdan::GraphParams forward(ad::Graph& g, std::span<const ad::Tensor* const> windows, BnMode mode,
                            std::vector<ad::Var>* param_vars = nullptr);
  jdan::GraphParams forward_infer(ad::Graph& g, std::span<const ad::Tensor* const> windows) const;

  // Infer-mode emission for one window.
  jdan::JdanParams infer(const ad::Tensor& window) const;
  std::vector<jdan::JdanParams> infer_batch(std::span<const ad::Tensor* const> windows) const;
  jdan::ForecastDistribution distribution(const ad::Tensor& window) const;

 private:
  jdan::GraphParams run(ad::Graph& g, std::span<const ad::Tensor* const> windows, BnMode mode, BatchNormState& bn,
                        std::vector<ad::Var>* param_vars) const;

  NfnArch arch_;
  std::uint64_t seed_;
  std::vector<NamedTensor> params_;
  BatchNormState bn_;
};

}  // namespace mdc::nfn

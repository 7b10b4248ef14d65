#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdc/adam.hpp"
#include "mdc/nfn.hpp"
#include "mdc/pipeline.hpp"

namespace mdc::trainer {

using Json = nlohmann::json;
using pipeline::SampleWindow;

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t patience = 20;
  std::size_t max_epochs = 300;
  double density_floor = jdan::kDensityFloor;
  double clip_norm = 10.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Negative mean log-likelihood of a batch on the tape.
ad::Var mle_loss_graph(ad::Graph& g, nfn::Nfn& model, std::span<const SampleWindow* const> batch, nfn::BnMode mode,
                       double floor = jdan::kDensityFloor, std::vector<ad::Var>* param_vars = nullptr);

// Infer-mode value of the same loss.
double mle_loss(const nfn::Nfn& model, std::span<const SampleWindow* const> batch,
                double floor = jdan::kDensityFloor);

// Mean log-likelihood (higher is better) over a split, infer mode.
double mean_log_likelihood(const nfn::Nfn& model, const std::vector<SampleWindow>& windows,
                           double floor = jdan::kDensityFloor);

// Standardizes the JDAN input per variable with the train-target mean and std.
void set_target_scaling(jdan::JdanArch& arch, const std::vector<SampleWindow>& train);

// One optimizer step on a batch; returns the pre-step loss.
struct StepResult {
  double loss;
  double grad_norm;  // before clipping
};

// The optimizer must have been built over model.parameters() in order.
// Infer mode allows single-sample steps against frozen batch statistics.
StepResult train_step(nfn::Nfn& model, ad::Adam& opt, std::span<const SampleWindow* const> batch,
                      const TrainConfig& cfg, nfn::BnMode mode = nfn::BnMode::kTrain);

ad::Adam make_optimizer(const nfn::Nfn& model, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_ll = 0.0;
  double val_ll = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t stop_epoch = 0;
  std::size_t best_epoch = 0;
  double best_val_ll = 0.0;
  std::string stop_reason;  // "early-stop", "max-epochs", "diverged"
  std::string checkpoint;   // filled in by whoever persists the best model
  double seconds = 0.0;     // wall time, excluded from to_json(false)

  Json to_json(bool include_timing = true) const;
};

struct FitResult {
  nfn::Nfn best;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam over seeded per-epoch permutations of train. Stops once train LL has
// exceeded validation LL for `patience` consecutive epochs, or at max_epochs;
// returns the model with the best validation LL.
FitResult fit(nfn::Nfn model, const std::vector<SampleWindow>& train, const std::vector<SampleWindow>& validation,
              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Train-mode forward over the training set with no parameter updates, so
// the batch-norm running statistics describe the data before epoch 0.
void calibrate_batch_norm(nfn::Nfn& model, const std::vector<SampleWindow>& train, const TrainConfig& cfg);

struct GridSpace {
  std::vector<std::size_t> nfn_blocks{8};
  std::vector<std::size_t> jdan_blocks{4};
  std::vector<std::size_t> nfn_width{64};
  std::vector<std::size_t> jdan_width{64};
  std::vector<std::size_t> delta{1};  // lag steps

  void validate() const;
  std::size_t size() const;
};

struct GridPoint {
  std::size_t nfn_blocks = 0, jdan_blocks = 0, nfn_width = 0, jdan_width = 0, delta = 0;
  Json to_json() const;
  bool operator==(const GridPoint&) const = default;
};

// Enumeration order: delta slowest, then N_N, N_J, W_N, W_J.
std::vector<GridPoint> enumerate(const GridSpace& space);
// Seed for a combination: depends on its values, not its position.
std::uint64_t combination_seed(std::uint64_t base, const GridPoint& p);

struct GridRow {
  std::size_t index = 0;  // position in enumeration order
  GridPoint point;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
  double val_ll = 0.0;
  std::size_t stop_epoch = 0;
  std::string stop_reason;
  double seconds = 0.0;
};

struct GridResult {
  std::vector<GridRow> table;  // sorted by validation LL, best first; failures last
  std::optional<nfn::Nfn> best_model;
  TrainReport best_report;

  const GridRow& best() const { return table.front(); }
  Json to_json(bool include_timing = true) const;
};

struct GridData {
  const pipeline::FlowgateSeries* series = nullptr;
  std::size_t tau = 1;
  std::size_t n_components = 4;
  jdan::Coupling coupling = jdan::Coupling::kMixture;
};

// Trains one model per combination on `jobs` worker threads. Throws
// NumericError when every combination diverged.
GridResult grid_search(const GridSpace& space, const GridData& data, const TrainConfig& cfg, std::size_t jobs = 1);

}  // namespace mdc::trainer

#include "mdc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "mdc/error.hpp"
#include "mdc/jdan_graph.hpp"
#include "mdc/random.hpp"

namespace mdc::trainer {

using ad::Tensor;
using ad::Var;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor target_matrix(std::span<const SampleWindow* const> batch) {
  const std::size_t n = batch.front()->target.size();
  Tensor m = Tensor::matrix(batch.size(), n);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b]->target.size() != n) throw ShapeError("batch targets disagree in length");
    for (std::size_t i = 0; i < n; ++i) m.at(b, i) = batch[b]->target[i];
  }
  return m;
}

std::vector<const Tensor*> window_ptrs(std::span<const SampleWindow* const> batch) {
  std::vector<const Tensor*> out(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) out[b] = &batch[b]->x;
  return out;
}

void check_targets(const nfn::Nfn& model, std::span<const SampleWindow* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (batch.front()->target.size() != model.arch().jdan.n_vars)
    throw ShapeError("target length " + std::to_string(batch.front()->target.size()) + " does not match n_vars " +
                     std::to_string(model.arch().jdan.n_vars));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2 (batch normalization)");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (!(density_floor > 0.0)) throw ConfigError("density floor must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
}

Var mle_loss_graph(ad::Graph& g, nfn::Nfn& model, std::span<const SampleWindow* const> batch, nfn::BnMode mode,
                   double floor, std::vector<Var>* param_vars) {
  check_targets(model, batch);
  const std::vector<const Tensor*> xs = window_ptrs(batch);
  jdan::GraphParams gp = model.forward(g, xs, mode, param_vars);
  Var ld = jdan::log_density_graph(model.arch().jdan, gp, target_matrix(batch), floor);
  return ad::neg(ad::mean(ld));
}

double mle_loss(const nfn::Nfn& model, std::span<const SampleWindow* const> batch, double floor) {
  check_targets(model, batch);
  ad::Graph g(false);
  const std::vector<const Tensor*> xs = window_ptrs(batch);
  jdan::GraphParams gp = model.forward_infer(g, xs);
  Var ld = jdan::log_density_graph(model.arch().jdan, gp, target_matrix(batch), floor);
  return -ad::mean(ld).value().item();
}

double mean_log_likelihood(const nfn::Nfn& model, const std::vector<SampleWindow>& windows, double floor) {
  if (windows.empty()) throw std::invalid_argument("mean_log_likelihood on an empty split");
  constexpr std::size_t kChunk = 512;
  double total = 0.0;
  std::vector<const SampleWindow*> chunk;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::size_t end = std::min(windows.size(), start + kChunk);
    chunk.clear();
    for (std::size_t k = start; k < end; ++k) chunk.push_back(&windows[k]);
    total -= mle_loss(model, chunk, floor) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(windows.size());
}

void set_target_scaling(jdan::JdanArch& arch, const std::vector<SampleWindow>& train) {
  std::vector<double> mean, sd;
  pipeline::target_moments(train, mean, sd);
  if (mean.size() != arch.n_vars) throw ShapeError("target length does not match n_vars");
  for (double& s : sd)
    if (!(s > 0.0)) s = 1.0;
  arch.location = std::move(mean);
  arch.scale = std::move(sd);
}

ad::Adam make_optimizer(const nfn::Nfn& model, const TrainConfig& cfg) {
  std::vector<const Tensor*> ps;
  for (const auto& p : model.parameters()) ps.push_back(p.tensor.get());
  ad::AdamOptions opt;
  opt.learning_rate = cfg.learning_rate;
  return ad::Adam(ps, opt);
}

StepResult train_step(nfn::Nfn& model, ad::Adam& opt, std::span<const SampleWindow* const> batch,
                      const TrainConfig& cfg, nfn::BnMode mode) {
  ad::Graph g;
  std::vector<Var> leaves;
  Var loss = mle_loss_graph(g, model, batch, mode, cfg.density_floor, &leaves);
  g.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(g.grad(v));
  std::vector<Tensor*> gptr;
  std::vector<const Tensor*> gconst;
  for (auto& t : grads) {
    gptr.push_back(&t);
    gconst.push_back(&t);
  }
  const double norm = ad::clip_global_norm(gptr, cfg.clip_norm);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  std::vector<Tensor*> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor.get());
  opt.step(params, gconst);
  return {loss.value().item(), norm};
}

void calibrate_batch_norm(nfn::Nfn& model, const std::vector<SampleWindow>& train, const TrainConfig& cfg) {
  const std::size_t bs = std::min(cfg.batch_size, train.size());
  std::vector<const Tensor*> xs;
  for (std::size_t start = 0; start + 2 <= train.size(); start += bs) {
    const std::size_t end = std::min(train.size(), start + bs);
    if (end - start < 2) break;
    xs.clear();
    for (std::size_t k = start; k < end; ++k) xs.push_back(&train[k].x);
    ad::Graph g(false);
    model.forward(g, xs, nfn::BnMode::kTrain);
  }
}

Json TrainReport::to_json(bool include_timing) const {
  Json ep = Json::array();
  for (const auto& e : epochs) ep.push_back({{"epoch", e.epoch}, {"train_ll", e.train_ll}, {"val_ll", e.val_ll}});
  Json j{{"epochs", std::move(ep)},
         {"stop_epoch", stop_epoch},
         {"best_epoch", best_epoch},
         {"best_val_ll", best_val_ll},
         {"stop_reason", stop_reason},
         {"checkpoint", checkpoint}};
  if (include_timing) j["timing"] = {{"seconds", seconds}};
  return j;
}

FitResult fit(nfn::Nfn model, const std::vector<SampleWindow>& train, const std::vector<SampleWindow>& validation,
              const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() < 2) throw std::invalid_argument("fit needs at least two training windows");
  if (validation.empty()) throw std::invalid_argument("fit needs a validation split");
  const auto t0 = Clock::now();
  if (!model.bn_state().initialized) calibrate_batch_norm(model, train, cfg);

  TrainReport report;
  EpochRecord e0{0, mean_log_likelihood(model, train, cfg.density_floor),
                 mean_log_likelihood(model, validation, cfg.density_floor)};
  report.epochs.push_back(e0);
  if (on_epoch) on_epoch(e0);
  nfn::Nfn best = model;
  report.best_val_ll = e0.val_ll;
  report.best_epoch = 0;
  report.stop_reason = "max-epochs";

  ad::Adam opt = make_optimizer(model, cfg);
  const std::size_t bs = std::min(cfg.batch_size, train.size());
  std::vector<std::size_t> order(train.size());
  std::vector<const SampleWindow*> batch;
  std::size_t streak = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, epoch));
    rng.shuffle(order);
    EpochRecord rec{epoch, 0.0, 0.0};
    try {
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        if (end - start < 2) break;
        batch.clear();
        for (std::size_t k = start; k < end; ++k) batch.push_back(&train[order[k]]);
        train_step(model, opt, batch, cfg);
      }
      rec.train_ll = mean_log_likelihood(model, train, cfg.density_floor);
      rec.val_ll = mean_log_likelihood(model, validation, cfg.density_floor);
    } catch (const NumericError&) {
      report.stop_reason = "diverged";
      report.stop_epoch = epoch;
      break;
    }
    report.epochs.push_back(rec);
    report.stop_epoch = epoch;
    if (on_epoch) on_epoch(rec);
    if (rec.val_ll > report.best_val_ll) {
      report.best_val_ll = rec.val_ll;
      report.best_epoch = epoch;
      best = model;
    }
    streak = rec.train_ll > rec.val_ll ? streak + 1 : 0;
    if (streak >= cfg.patience) {
      report.stop_reason = "early-stop";
      break;
    }
  }
  report.seconds = seconds_since(t0);
  return {std::move(best), std::move(report)};
}

void GridSpace::validate() const {
  for (const auto* axis : {&nfn_blocks, &jdan_blocks, &nfn_width, &jdan_width, &delta})
    if (axis->empty()) throw ConfigError("grid axes must be nonempty");
  for (std::size_t v : nfn_width)
    if (v == 0) throw ConfigError("grid W_N values must be positive");
  for (std::size_t v : jdan_width)
    if (v == 0) throw ConfigError("grid W_J values must be positive");
  for (std::size_t v : delta)
    if (v == 0) throw ConfigError("grid delta values must be positive");
}

std::size_t GridSpace::size() const {
  return nfn_blocks.size() * jdan_blocks.size() * nfn_width.size() * jdan_width.size() * delta.size();
}

Json GridPoint::to_json() const {
  return Json{{"nfn_blocks", nfn_blocks},
              {"jdan_blocks", jdan_blocks},
              {"nfn_width", nfn_width},
              {"jdan_width", jdan_width},
              {"delta", delta}};
}

std::vector<GridPoint> enumerate(const GridSpace& space) {
  space.validate();
  std::vector<GridPoint> out;
  for (std::size_t d : space.delta)
    for (std::size_t nn : space.nfn_blocks)
      for (std::size_t nj : space.jdan_blocks)
        for (std::size_t wn : space.nfn_width)
          for (std::size_t wj : space.jdan_width) out.push_back({nn, nj, wn, wj, d});
  return out;
}

std::uint64_t combination_seed(std::uint64_t base, const GridPoint& p) {
  std::uint64_t h = base;
  for (std::size_t v : {p.delta, p.nfn_blocks, p.jdan_blocks, p.nfn_width, p.jdan_width}) h = mix_seed(h, v);
  return h;
}

Json GridResult::to_json(bool include_timing) const {
  Json rows = Json::array();
  for (std::size_t r = 0; r < table.size(); ++r) {
    const GridRow& row = table[r];
    Json j{{"rank", r + 1},
           {"index", row.index},
           {"point", row.point.to_json()},
           {"seed", row.seed},
           {"diverged", row.diverged},
           {"error", row.error},
           {"val_ll", row.diverged ? Json(nullptr) : Json(row.val_ll)},
           {"stop_epoch", row.stop_epoch},
           {"stop_reason", row.stop_reason}};
    if (include_timing) j["seconds"] = row.seconds;
    rows.push_back(std::move(j));
  }
  return Json{{"table", std::move(rows)},
              {"best", best().point.to_json()},
              {"best_val_ll", best().val_ll},
              {"best_report", best_report.to_json(include_timing)}};
}

GridResult grid_search(const GridSpace& space, const GridData& data, const TrainConfig& cfg, std::size_t jobs) {
  cfg.validate();
  if (!data.series) throw std::invalid_argument("grid search needs a series");
  const std::vector<GridPoint> points = enumerate(space);
  std::map<std::size_t, pipeline::DatasetSplit> splits;
  for (std::size_t d : space.delta)
    if (!splits.count(d)) splits.emplace(d, pipeline::split_and_normalize(pipeline::build_windows(*data.series, d, data.tau)));

  std::vector<GridRow> rows(points.size());
  GridResult result;
  std::optional<std::size_t> best_index;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < points.size(); k = next++) {
      const GridPoint& p = points[k];
      GridRow row;
      row.index = k;
      row.point = p;
      row.seed = combination_seed(cfg.seed, p);
      const auto t0 = Clock::now();
      try {
        const pipeline::DatasetSplit& split = splits.at(p.delta);
        nfn::NfnArch arch;
        arch.n_blocks = p.nfn_blocks;
        arch.width = p.nfn_width;
        arch.n_features = data.series->n_features;
        arch.window = p.delta;
        arch.jdan.n_vars = data.series->n_gates;
        arch.jdan.coupling = data.coupling;
        arch.jdan.n_components = data.coupling == jdan::Coupling::kPaperLiteral ? 1 : data.n_components;
        arch.jdan.n_blocks = p.jdan_blocks;
        arch.jdan.width = p.jdan_width;
        set_target_scaling(arch.jdan, split.train);
        TrainConfig c = cfg;
        c.seed = row.seed;
        FitResult fr = fit(nfn::Nfn(arch, row.seed), split.train, split.validation, c);
        if (fr.report.stop_reason == "diverged")
          throw NumericError("diverged at epoch " + std::to_string(fr.report.stop_epoch));
        row.val_ll = fr.report.best_val_ll;
        row.stop_epoch = fr.report.stop_epoch;
        row.stop_reason = fr.report.stop_reason;
        row.seconds = seconds_since(t0);
        std::lock_guard lock(mu);
        if (!best_index || row.val_ll > rows[*best_index].val_ll ||
            (row.val_ll == rows[*best_index].val_ll && k < *best_index)) {
          best_index = k;
          result.best_model = std::move(fr.best);
          result.best_report = std::move(fr.report);
        }
        rows[k] = row;
      } catch (const std::exception& e) {
        row.diverged = true;
        row.error = e.what();
        row.seconds = seconds_since(t0);
        std::lock_guard lock(mu);
        rows[k] = row;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, points.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!best_index) throw NumericError("every grid combination diverged");
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.diverged != b.diverged) return !a.diverged;
    if (a.val_ll != b.val_ll) return a.val_ll > b.val_ll;
    return a.index < b.index;
  });
  result.table = std::move(rows);
  return result;
}

}  // namespace mdc::trainer

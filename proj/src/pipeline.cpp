#include "mdc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <stdexcept>

#include "mdc/error.hpp"

namespace mdc::pipeline {

void FlowgateSeries::validate() const {
  const std::size_t t = length();
  if (n_gates == 0) throw std::invalid_argument("series has no flowgates");
  if (flow.size() != t * n_gates || capacity.size() != t * n_gates || features.size() != t * n_features)
    throw ShapeError("series matrices do not match " + std::to_string(t) + " time steps");
  if (interval_minutes <= 0) throw std::invalid_argument("sampling interval must be positive");
  for (double c : capacity)
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("flowgate capacity must be positive and finite");
  for (double v : flow)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite power flow");
  for (double v : features)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
}

double security_margin(double flow, double capacity) {
  if (!(capacity > 0.0)) throw std::invalid_argument("nonpositive flowgate capacity");
  return 1.0 - flow / capacity;
}

std::vector<double> compute_margins(const FlowgateSeries& series) {
  if (series.flow.size() != series.capacity.size()) throw ShapeError("flow and capacity sizes differ");
  std::vector<double> sm(series.flow.size());
  for (std::size_t k = 0; k < sm.size(); ++k) sm[k] = security_margin(series.flow[k], series.capacity[k]);
  return sm;
}

std::vector<SampleWindow> build_windows(const FlowgateSeries& series, std::size_t delta, std::size_t tau) {
  if (delta == 0 || tau == 0) throw std::invalid_argument("delta and tau must be at least one step");
  const std::size_t len = series.length();
  if (len <= delta + tau)
    throw std::invalid_argument("series of length " + std::to_string(len) + " too short for delta=" +
                                std::to_string(delta) + ", tau=" + std::to_string(tau));
  const std::vector<double> sm = compute_margins(series);
  const std::size_t f = series.n_features, n = series.n_gates;
  std::vector<SampleWindow> out;
  out.reserve(len - delta - tau + 1);
  for (std::size_t t = delta - 1; t + tau < len; ++t) {
    SampleWindow w;
    w.x = ad::Tensor::matrix(delta, f);
    for (std::size_t k = 0; k < delta; ++k)
      for (std::size_t j = 0; j < f; ++j) w.x.at(k, j) = series.features[(t + 1 - delta + k) * f + j];
    w.target.assign(sm.begin() + static_cast<std::ptrdiff_t>((t + tau) * n),
                    sm.begin() + static_cast<std::ptrdiff_t>((t + tau + 1) * n));
    w.anchor = t;
    w.anchor_time = series.timestamps[t];
    out.push_back(std::move(w));
  }
  return out;
}

std::size_t minutes_to_steps(double minutes, std::int64_t interval_minutes) {
  if (interval_minutes <= 0 || !(minutes >= 0.0)) throw std::invalid_argument("invalid lag duration or interval");
  const auto steps = static_cast<std::size_t>(std::floor(minutes / static_cast<double>(interval_minutes)));
  return steps < 1 ? 1 : steps;
}

SplitRanges chronological_split(std::size_t n) {
  const std::size_t n_train = n * 40 / 100, n_val = n * 20 / 100;
  SplitRanges r;
  r.train = {0, n_train};
  r.validation = {n_train, n_train + n_val};
  r.test = {n_train + n_val, n};
  return r;
}

void normalize_window(SampleWindow& w, const std::vector<double>& mean, const std::vector<double>& stddev) {
  const std::size_t f = w.x.cols();
  if (mean.size() != f || stddev.size() != f) throw ShapeError("normalization stats do not match feature count");
  for (std::size_t k = 0; k < w.x.rows(); ++k)
    for (std::size_t j = 0; j < f; ++j) w.x.at(k, j) = (w.x.at(k, j) - mean[j]) / stddev[j];
}

DatasetSplit split_and_normalize(std::vector<SampleWindow> windows) {
  if (windows.size() < 10) throw std::invalid_argument("need at least 10 windows to split");
  DatasetSplit d;
  d.ranges = chronological_split(windows.size());
  if (d.ranges.train.size() == 0 || d.ranges.validation.size() == 0 || d.ranges.test.size() == 0)
    throw std::invalid_argument("empty split");
  const std::size_t f = windows.front().x.cols();
  std::vector<double> sum(f, 0.0);
  std::size_t rows = 0;
  for (std::size_t k = d.ranges.train.begin; k < d.ranges.train.end; ++k) {
    const ad::Tensor& x = windows[k].x;
    if (x.cols() != f) throw ShapeError("windows disagree on feature count");
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t j = 0; j < f; ++j) sum[j] += x.at(r, j);
    rows += x.rows();
  }
  d.feature_mean.resize(f);
  for (std::size_t j = 0; j < f; ++j) d.feature_mean[j] = sum[j] / static_cast<double>(rows);
  std::vector<double> ss(f, 0.0);
  for (std::size_t k = d.ranges.train.begin; k < d.ranges.train.end; ++k) {
    const ad::Tensor& x = windows[k].x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t j = 0; j < f; ++j) {
        const double c = x.at(r, j) - d.feature_mean[j];
        ss[j] += c * c;
      }
  }
  d.feature_std.resize(f);
  for (std::size_t j = 0; j < f; ++j) {
    const double sd = std::sqrt(ss[j] / static_cast<double>(rows));
    // relative guard: rounding noise on a constant column is not variance
    d.feature_std[j] = sd > 1e-12 * std::max(1.0, std::abs(d.feature_mean[j])) ? sd : 1.0;
  }
  for (auto& w : windows) normalize_window(w, d.feature_mean, d.feature_std);
  auto take = [&](IndexRange r) {
    return std::vector<SampleWindow>(std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(r.begin)),
                                     std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(r.end)));
  };
  d.train = take(d.ranges.train);
  d.validation = take(d.ranges.validation);
  d.test = take(d.ranges.test);
  return d;
}

void target_moments(const std::vector<SampleWindow>& windows, std::vector<double>& mean, std::vector<double>& stddev) {
  if (windows.empty()) throw std::invalid_argument("no windows");
  const std::size_t n = windows.front().target.size();
  mean.assign(n, 0.0);
  stddev.assign(n, 0.0);
  for (const auto& w : windows)
    for (std::size_t i = 0; i < n; ++i) mean[i] += w.target[i];
  for (double& m : mean) m /= static_cast<double>(windows.size());
  for (const auto& w : windows)
    for (std::size_t i = 0; i < n; ++i) stddev[i] += (w.target[i] - mean[i]) * (w.target[i] - mean[i]);
  for (double& s : stddev) s = std::sqrt(s / static_cast<double>(windows.size()));
}

}  // namespace mdc::pipeline

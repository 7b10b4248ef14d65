#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdc/tensor.hpp"

namespace mdc::pipeline {

// Uniformly sampled flowgate measurements. Matrices are row-major with one
// row per time step.
struct FlowgateSeries {
  std::vector<std::string> timestamps;  // ISO-8601, UTC
  std::int64_t interval_minutes = 15;
  std::size_t n_gates = 0;
  std::size_t n_features = 0;
  std::vector<double> flow;      // T x n_gates, MW
  std::vector<double> capacity;  // T x n_gates, MW
  std::vector<double> features;  // T x n_features

  std::size_t length() const { return timestamps.size(); }
  // Consistent sizes, finite values, positive capacity.
  void validate() const;
};

double security_margin(double flow, double capacity);
// T x n_gates matrix of 1 - P / P_tc.
std::vector<double> compute_margins(const FlowgateSeries& series);

struct SampleWindow {
  ad::Tensor x;                 // delta x F
  std::vector<double> target;   // margins tau steps after the last window row
  std::size_t anchor = 0;       // index of the last window row
  std::string anchor_time;
};

// One window per admissible anchor; count = length - delta - tau + 1.
std::vector<SampleWindow> build_windows(const FlowgateSeries& series, std::size_t delta, std::size_t tau);

// Lag length in steps for a duration in minutes: floor(minutes / interval), at least 1.
std::size_t minutes_to_steps(double minutes, std::int64_t interval_minutes);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct SplitRanges {
  IndexRange train, validation, test;
};

// 40/20/40 by floor division, remainder to test.
SplitRanges chronological_split(std::size_t n);

struct DatasetSplit {
  SplitRanges ranges;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;  // population std; 1 where a feature is constant
  std::vector<SampleWindow> train, validation, test;  // z-scored features, raw targets
};

// Statistics are taken over every row of every training window.
DatasetSplit split_and_normalize(std::vector<SampleWindow> windows);

void normalize_window(SampleWindow& w, const std::vector<double>& mean, const std::vector<double>& stddev);

// Per-variable mean and population std of the targets of a window set.
void target_moments(const std::vector<SampleWindow>& windows, std::vector<double>& mean, std::vector<double>& stddev);

}  // namespace mdc::pipeline

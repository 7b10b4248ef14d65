#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdc/jdan.hpp"

namespace mdc::analytics {

using Json = nlohmann::json;

struct QuantileOptions {
  double lo = -1.0;
  double hi = 2.0;
  double max_width = 1e6;
  double tolerance = 1e-8;  // in probability
  int max_iterations = 400;
};

// Root of cdf(x) = alpha for a non-decreasing cdf. The bracket doubles
// outward from [lo, hi]; throws NumericError once it is wider than max_width.
double invert_cdf(const std::function<double(double)>& cdf, double alpha, const QuantileOptions& opt = {});

// alpha-quantile of variable i conditioned on the other entries of sm.
double quantile(const jdan::ForecastDistribution& dist, std::size_t i, std::span<const double> sm, double alpha,
                const QuantileOptions& opt = {});

// n x N row-major draws. Mixture: component by pi, then independent inverse
// transforms per coordinate; paper-literal: inverse transform of Fbar^2.
std::vector<double> sample(const jdan::ForecastDistribution& dist, std::size_t n, std::uint64_t seed);

struct SecurityThresholds {
  std::vector<double> gamma;  // nominally in (0, inf]; +inf drops the constraint

  void validate() const;
  std::vector<double> lower_bounds() const;  // 1 - gamma_i
};

SecurityThresholds default_thresholds();  // (0.7, 0.65, 0.6)

struct OmegaCorner {
  std::vector<bool> at_lower;  // true: 1 - gamma_i, false: +inf
  int sign = 1;                // (-1)^(number of lower coordinates)
  double cdf = 0.0;
};

struct OmegaResult {
  double omega = 0.0;
  double raw = 0.0;  // before clamping
  std::vector<OmegaCorner> corners;
  double seconds = 0.0;

  Json to_json(bool include_timing = true) const;
};

inline constexpr std::size_t kMaxOmegaDims = 20;

// Probability of the secure box {SM_i >= 1 - gamma_i for all i} by
// inclusion-exclusion over the 2^N corners {1 - gamma_i, +inf}.
OmegaResult omega(const jdan::ForecastDistribution& dist, const SecurityThresholds& thresholds);

// Percentage of n sampled scenarios inside the secure box.
double secure_scenario_proportion(const jdan::ForecastDistribution& dist, const SecurityThresholds& thresholds,
                                  std::size_t n = 1000, std::uint64_t seed = 0);

}  // namespace mdc::analytics

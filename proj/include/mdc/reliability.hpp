#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdc/pipeline.hpp"

namespace mdc::evaluation {

using Json = nlohmann::json;

// Conditional CDFs of one forecast (one test sample).
class BoundConditional {
 public:
  virtual ~BoundConditional() = default;
  // P(SM_i <= sm_i | SM_k = sm_k, k != i).
  virtual double cdf(std::size_t i, std::span<const double> sm) const = 0;
  // Root of cdf in sm_i; the default bisects cdf.
  virtual double quantile(std::size_t i, std::span<const double> sm, double alpha) const;
};

class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dims() const = 0;
  virtual std::unique_ptr<BoundConditional> bind(const pipeline::SampleWindow& w) const = 0;
};

// Unit step with H(0) = 1.
inline double unit_step(double x) { return x >= 0.0 ? 1.0 : 0.0; }

inline constexpr std::size_t kAlphaCount = 99;
std::vector<double> alpha_grid();  // 0.01 .. 0.99

enum class ReliabilityRoute {
  kPit,       // H(q^alpha - y) = 1 iff F(y) <= alpha for a strictly increasing F
  kQuantile,  // explicit quantile per alpha
};

struct ReliabilityOptions {
  ReliabilityRoute route = ReliabilityRoute::kPit;
  double max_failure_fraction = 0.01;
  std::size_t jobs = 1;
};

struct DimensionReliability {
  std::vector<double> b;  // alpha_j - coverage_j
  double bbar = 0.0;      // mean |b|
  std::size_t n_samples = 0;
  std::size_t n_failures = 0;
};

struct ReliabilityReport {
  std::string model;
  std::vector<double> alpha;
  std::vector<DimensionReliability> dims;

  Json to_json() const;
  // alpha,dimension,b rows for plotting
  void write_csv(std::ostream& out) const;
};

// Per-dimension deviations from conditional quantiles given the observed
// other margins. Throws NumericError if more than max_failure_fraction of
// the samples fail in any dimension.
ReliabilityReport reliability(const ConditionalModel& model, const std::vector<pipeline::SampleWindow>& test,
                              const ReliabilityOptions& options = {});

}  // namespace mdc::evaluation

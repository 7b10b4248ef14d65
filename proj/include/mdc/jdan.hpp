#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mdc/random.hpp"

// Joint distribution approximation network: parallel positive-weighted
// monotone units, one per (mixture component, variable), normalized by their
// analytic saturation limits and fused into a joint CDF.
namespace mdc::jdan {

inline constexpr double kDensityFloor = 1e-12;
inline constexpr double kMinLimitGap = 1e-9;

enum class Coupling {
  kMixture,       // F = sum_m pi_m prod_i Fbar_{i,m}
  kPaperLiteral,  // F = (prod_i Fbar_i)^2, one component
};

std::string to_string(Coupling c);
Coupling coupling_from_string(std::string_view s);

enum class Limit { kLower, kUpper };

// One parallel unit: scalar -> width sigmoid layer, n_blocks residual blocks
// of two width x width sigmoid layers with identity skip, then a linear
// width -> 1 output. width == 0 is the degenerate linear unit w*x + b.
struct UnitShape {
  std::size_t width = 0;
  std::size_t n_blocks = 0;

  std::size_t weight_count() const;
  std::size_t bias_count() const;
};

// Weights are laid out as: input (width), per block Wa then Wb (width x width,
// input-major), output (width). Biases: input (width), per block ba then bb
// (width each), output (1).
struct UnitView {
  UnitShape shape;
  std::span<const double> weights;
  std::span<const double> biases;
};

struct UnitValue {
  double value;
  double slope;  // d value / d x
};

// Throws std::invalid_argument on a non-positive or non-finite weight.
UnitValue unit_forward(const UnitView& unit, double x);
// Analytic saturation limit at +inf / -inf (infinite for the linear unit).
double unit_limit(const UnitView& unit, Limit direction);

struct JdanArch {
  std::size_t n_vars = 1;
  std::size_t n_components = 4;
  std::size_t n_blocks = 4;
  std::size_t width = 64;
  Coupling coupling = Coupling::kMixture;
  // Fixed per-variable affine map applied before the units,
  // u = (sm - location) / scale. Empty vectors mean identity.
  std::vector<double> location;
  std::vector<double> scale;

  void validate() const;
  UnitShape unit_shape() const { return {width, n_blocks}; }
  std::size_t n_units() const { return n_vars * n_components; }
  std::size_t unit_index(std::size_t component, std::size_t var) const { return component * n_vars + var; }
  std::size_t weight_count() const { return n_units() * unit_shape().weight_count(); }
  std::size_t bias_count() const { return n_units() * unit_shape().bias_count(); }
  std::size_t logit_count() const { return coupling == Coupling::kMixture ? n_components : 0; }
  std::size_t param_count() const { return weight_count() + bias_count() + logit_count(); }
  double loc(std::size_t var) const { return location.empty() ? 0.0 : location[var]; }
  double scl(std::size_t var) const { return scale.empty() ? 1.0 : scale[var]; }
};

struct JdanParams {
  std::vector<double> weights;
  std::vector<double> biases;
  std::vector<double> logits;

  // Counts must match the architecture; every weight finite and > 0.
  void validate(const JdanArch& arch) const;
  std::vector<double> flat() const;
  static JdanParams from_flat(const JdanArch& arch, std::span<const double> flat);
};

struct RandomParamOptions {
  double input_weight_lo = 2.0;
  double input_weight_hi = 8.0;
  // Input-layer sigmoid centres, in standardized units.
  double center_lo = -1.0;
  double center_hi = 1.0;
  // Block and output weights are U(lo, hi); block weights are divided by width.
  double weight_lo = 0.2;
  double weight_hi = 2.0;
  double bias_sd = 1.0;
  double logit_sd = 0.5;
};

JdanParams random_params(const JdanArch& arch, Rng& rng, const RandomParamOptions& options = {});

class ForecastDistribution;

// Univariate conditional of one variable with the others held fixed.
class ConditionalSlice {
 public:
  double cdf(double x) const;
  double pdf(double x) const;
  std::size_t var() const { return var_; }

 private:
  friend class ForecastDistribution;
  const ForecastDistribution* dist_ = nullptr;
  std::size_t var_ = 0;
  std::vector<double> weights_;  // normalized per-component weights
};

// Immutable (arch, params) pair with cached unit limits. All queries are
// pure and may run concurrently. Margins may be +/-infinity.
class ForecastDistribution {
 public:
  ForecastDistribution(JdanArch arch, JdanParams params);

  const JdanArch& arch() const { return arch_; }
  const JdanParams& params() const { return params_; }
  std::size_t dims() const { return arch_.n_vars; }
  std::size_t components() const { return arch_.n_components; }
  Coupling coupling() const { return arch_.coupling; }
  const std::vector<double>& mixture_weights() const { return pi_; }

  UnitView unit(std::size_t component, std::size_t var) const;
  double lower_limit(std::size_t component, std::size_t var) const { return lower_[arch_.unit_index(component, var)]; }
  double upper_limit(std::size_t component, std::size_t var) const { return upper_[arch_.unit_index(component, var)]; }

  // Normalized unit CDF and its density with respect to the raw margin.
  double unit_cdf(std::size_t component, std::size_t var, double sm) const;
  double unit_pdf(std::size_t component, std::size_t var, double sm) const;
  std::pair<double, double> unit_cdf_pdf(std::size_t component, std::size_t var, double sm) const;

  double joint_cdf(std::span<const double> sm) const;
  double joint_density(std::span<const double> sm) const;
  // joint_cdf with the listed variables sent to +infinity.
  double marginalized_cdf(std::span<const double> sm, std::span<const std::size_t> held) const;
  double marginal_cdf(std::size_t var, double x) const;
  double marginal_pdf(std::size_t var, double x) const;

  // Conditional of variable i given the other entries of sm. Throws
  // NumericError when the conditioning density is below kDensityFloor.
  ConditionalSlice conditional(std::size_t i, std::span<const double> sm) const;
  double conditional_pdf(std::size_t i, std::span<const double> sm) const;
  double conditional_cdf(std::size_t i, std::span<const double> sm) const;

 private:
  void check_dims(std::span<const double> sm) const;

  JdanArch arch_;
  JdanParams params_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> pi_;
};

}  // namespace mdc::jdan

#include "mdc/jdan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdc/error.hpp"

namespace mdc::jdan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Residual blocks applied to a hidden state (and optionally its tangent).
void run_blocks(const UnitView& u, std::span<double> a, std::span<double> da, bool tangent) {
  const std::size_t w = u.shape.width;
  const double* wp = u.weights.data() + w;
  const double* bp = u.biases.data() + w;
  thread_local std::vector<double> scratch;
  scratch.resize(4 * w);
  double* z1 = scratch.data();
  double* dz1 = z1 + w;
  double* z2 = dz1 + w;
  double* dz2 = z2 + w;
  for (std::size_t blk = 0; blk < u.shape.n_blocks; ++blk) {
    const double* wa = wp;
    const double* wb = wp + w * w;
    const double* ba = bp;
    const double* bb = bp + w;
    std::copy(ba, ba + w, z1);
    if (tangent) std::fill(dz1, dz1 + w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
      const double ai = a[i];
      const double dai = tangent ? da[i] : 0.0;
      const double* row = wa + i * w;
      for (std::size_t o = 0; o < w; ++o) z1[o] += ai * row[o];
      if (tangent)
        for (std::size_t o = 0; o < w; ++o) dz1[o] += dai * row[o];
    }
    for (std::size_t o = 0; o < w; ++o) {
      z1[o] = sigmoid(z1[o]);
      if (tangent) dz1[o] *= z1[o] * (1.0 - z1[o]);
    }
    std::copy(bb, bb + w, z2);
    if (tangent) std::fill(dz2, dz2 + w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
      const double* row = wb + i * w;
      const double zi = z1[i];
      for (std::size_t o = 0; o < w; ++o) z2[o] += zi * row[o];
      if (tangent) {
        const double dzi = dz1[i];
        for (std::size_t o = 0; o < w; ++o) dz2[o] += dzi * row[o];
      }
    }
    for (std::size_t o = 0; o < w; ++o) {
      const double s = sigmoid(z2[o]);
      a[o] += s;
      if (tangent) da[o] += s * (1.0 - s) * dz2[o];
    }
    wp += 2 * w * w;
    bp += 2 * w;
  }
}

UnitValue forward_unchecked(const UnitView& u, double x) {
  const std::size_t w = u.shape.width;
  if (w == 0) return {u.weights[0] * x + u.biases[0], u.weights[0]};
  thread_local std::vector<double> buf;
  buf.resize(2 * w);
  std::span<double> a(buf.data(), w), da(buf.data() + w, w);
  for (std::size_t j = 0; j < w; ++j) {
    const double s = sigmoid(u.weights[j] * x + u.biases[j]);
    a[j] = s;
    da[j] = s * (1.0 - s) * u.weights[j];
  }
  run_blocks(u, a, da, true);
  const double* wo = u.weights.data() + u.weights.size() - w;
  double value = u.biases[u.biases.size() - 1];
  double slope = 0.0;
  for (std::size_t j = 0; j < w; ++j) {
    value += a[j] * wo[j];
    slope += da[j] * wo[j];
  }
  return {value, slope};
}

double limit_unchecked(const UnitView& u, Limit dir) {
  const std::size_t w = u.shape.width;
  if (w == 0) return dir == Limit::kUpper ? kInf : -kInf;
  thread_local std::vector<double> buf;
  buf.assign(w, dir == Limit::kUpper ? 1.0 : 0.0);
  run_blocks(u, buf, {}, false);
  const double* wo = u.weights.data() + u.weights.size() - w;
  double value = u.biases[u.biases.size() - 1];
  for (std::size_t j = 0; j < w; ++j) value += buf[j] * wo[j];
  return value;
}

void check_unit(const UnitView& u) {
  if (u.weights.size() != u.shape.weight_count() || u.biases.size() != u.shape.bias_count())
    throw ShapeError("unit parameter count does not match its shape");
  for (double v : u.weights)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("unit weight must be finite and positive");
}

}  // namespace

std::string to_string(Coupling c) { return c == Coupling::kMixture ? "mixture" : "paper-literal"; }

Coupling coupling_from_string(std::string_view s) {
  if (s == "mixture") return Coupling::kMixture;
  if (s == "paper-literal") return Coupling::kPaperLiteral;
  throw ConfigError("unknown coupling mode '" + std::string(s) + "' (expected mixture or paper-literal)");
}

std::size_t UnitShape::weight_count() const { return width == 0 ? 1 : 2 * width + 2 * n_blocks * width * width; }

std::size_t UnitShape::bias_count() const { return width == 0 ? 1 : width + 2 * n_blocks * width + 1; }

UnitValue unit_forward(const UnitView& unit, double x) {
  check_unit(unit);
  return forward_unchecked(unit, x);
}

double unit_limit(const UnitView& unit, Limit direction) {
  check_unit(unit);
  return limit_unchecked(unit, direction);
}

void JdanArch::validate() const {
  if (n_vars == 0 || n_components == 0 || width == 0)
    throw ConfigError("jdan variable count, component count and width must be positive");
  if (coupling == Coupling::kPaperLiteral && n_components != 1)
    throw ConfigError("paper-literal coupling requires exactly one component");
  if (!location.empty() && location.size() != n_vars) throw ConfigError("jdan location length must equal n_vars");
  if (!scale.empty() && scale.size() != n_vars) throw ConfigError("jdan scale length must equal n_vars");
  for (double s : scale)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("jdan scale entries must be finite and positive");
  for (double l : location)
    if (!std::isfinite(l)) throw ConfigError("jdan location entries must be finite");
}

void JdanParams::validate(const JdanArch& arch) const {
  if (weights.size() != arch.weight_count() || biases.size() != arch.bias_count() ||
      logits.size() != arch.logit_count())
    throw ShapeError("jdan parameter count does not match architecture");
  for (double v : weights)
    if (!(v > 0.0) || !std::isfinite(v)) throw NumericError("jdan weight must be finite and positive");
  for (double v : biases)
    if (!std::isfinite(v)) throw NumericError("jdan bias must be finite");
  for (double v : logits)
    if (!std::isfinite(v)) throw NumericError("jdan mixture logit must be finite");
}

std::vector<double> JdanParams::flat() const {
  std::vector<double> out;
  out.reserve(weights.size() + biases.size() + logits.size());
  out.insert(out.end(), weights.begin(), weights.end());
  out.insert(out.end(), biases.begin(), biases.end());
  out.insert(out.end(), logits.begin(), logits.end());
  return out;
}

JdanParams JdanParams::from_flat(const JdanArch& arch, std::span<const double> flat) {
  if (flat.size() != arch.param_count()) throw ShapeError("flat jdan parameter vector has wrong length");
  JdanParams p;
  auto it = flat.begin();
  p.weights.assign(it, it + static_cast<std::ptrdiff_t>(arch.weight_count()));
  it += static_cast<std::ptrdiff_t>(arch.weight_count());
  p.biases.assign(it, it + static_cast<std::ptrdiff_t>(arch.bias_count()));
  it += static_cast<std::ptrdiff_t>(arch.bias_count());
  p.logits.assign(it, flat.end());
  return p;
}

JdanParams random_params(const JdanArch& arch, Rng& rng, const RandomParamOptions& o) {
  arch.validate();
  const UnitShape us = arch.unit_shape();
  const std::size_t w = us.width;
  JdanParams p;
  p.weights.reserve(arch.weight_count());
  p.biases.reserve(arch.bias_count());
  for (std::size_t u = 0; u < arch.n_units(); ++u) {
    std::vector<double> centres(w);
    for (std::size_t j = 0; j < w; ++j) {
      const double wi = rng.uniform(o.input_weight_lo, o.input_weight_hi);
      centres[j] = rng.uniform(o.center_lo, o.center_hi);
      p.weights.push_back(wi);
      p.biases.push_back(-wi * centres[j]);
    }
    for (std::size_t blk = 0; blk < us.n_blocks; ++blk) {
      for (std::size_t k = 0; k < 2 * w * w; ++k)
        p.weights.push_back(rng.uniform(o.weight_lo, o.weight_hi) / static_cast<double>(w));
      for (std::size_t k = 0; k < 2 * w; ++k) p.biases.push_back(rng.normal(0.0, o.bias_sd));
    }
    for (std::size_t j = 0; j < w; ++j) p.weights.push_back(rng.uniform(o.weight_lo, o.weight_hi));
    p.biases.push_back(rng.normal(0.0, o.bias_sd));
  }
  for (std::size_t m = 0; m < arch.logit_count(); ++m) p.logits.push_back(rng.normal(0.0, o.logit_sd));
  return p;
}

ForecastDistribution::ForecastDistribution(JdanArch arch, JdanParams params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  params_.validate(arch_);
  const std::size_t n = arch_.n_units();
  lower_.resize(n);
  upper_.resize(n);
  for (std::size_t m = 0; m < arch_.n_components; ++m)
    for (std::size_t i = 0; i < arch_.n_vars; ++i) {
      const std::size_t k = arch_.unit_index(m, i);
      const UnitView u = unit(m, i);
      lower_[k] = limit_unchecked(u, Limit::kLower);
      upper_[k] = limit_unchecked(u, Limit::kUpper);
      if (!(upper_[k] - lower_[k] > kMinLimitGap))
        throw NumericError("degenerate jdan unit: saturation limits differ by less than 1e-9");
    }
  if (arch_.coupling == Coupling::kMixture) {
    const double mx = *std::max_element(params_.logits.begin(), params_.logits.end());
    double s = 0.0;
    for (double l : params_.logits) s += std::exp(l - mx);
    for (double l : params_.logits) pi_.push_back(std::exp(l - mx) / s);
  } else {
    pi_ = {1.0};
  }
}

UnitView ForecastDistribution::unit(std::size_t component, std::size_t var) const {
  const UnitShape us = arch_.unit_shape();
  const std::size_t k = arch_.unit_index(component, var);
  return {us,
          std::span<const double>(params_.weights).subspan(k * us.weight_count(), us.weight_count()),
          std::span<const double>(params_.biases).subspan(k * us.bias_count(), us.bias_count())};
}

std::pair<double, double> ForecastDistribution::unit_cdf_pdf(std::size_t component, std::size_t var,
                                                             double sm) const {
  if (sm == kInf) return {1.0, 0.0};
  if (sm == -kInf) return {0.0, 0.0};
  const std::size_t k = arch_.unit_index(component, var);
  const double x = (sm - arch_.loc(var)) / arch_.scl(var);
  const UnitValue uv = forward_unchecked(unit(component, var), x);
  const double gap = upper_[k] - lower_[k];
  const double cdf = std::clamp((uv.value - lower_[k]) / gap, 0.0, 1.0);
  return {cdf, uv.slope / (gap * arch_.scl(var))};
}

double ForecastDistribution::unit_cdf(std::size_t component, std::size_t var, double sm) const {
  return unit_cdf_pdf(component, var, sm).first;
}

double ForecastDistribution::unit_pdf(std::size_t component, std::size_t var, double sm) const {
  return unit_cdf_pdf(component, var, sm).second;
}

void ForecastDistribution::check_dims(std::span<const double> sm) const {
  if (sm.size() != arch_.n_vars)
    throw ShapeError("expected " + std::to_string(arch_.n_vars) + " margins, got " + std::to_string(sm.size()));
}

double ForecastDistribution::joint_cdf(std::span<const double> sm) const {
  check_dims(sm);
  double total = 0.0;
  for (std::size_t m = 0; m < arch_.n_components; ++m) {
    double prod = 1.0;
    for (std::size_t i = 0; i < arch_.n_vars && prod > 0.0; ++i) prod *= unit_cdf(m, i, sm[i]);
    total += pi_[m] * prod;
  }
  if (arch_.coupling == Coupling::kPaperLiteral) total *= total;
  return std::clamp(total, 0.0, 1.0);
}

double ForecastDistribution::joint_density(std::span<const double> sm) const {
  check_dims(sm);
  double total = 0.0;
  for (std::size_t m = 0; m < arch_.n_components; ++m) {
    double prod = 1.0;
    for (std::size_t i = 0; i < arch_.n_vars; ++i) {
      const auto [c, d] = unit_cdf_pdf(m, i, sm[i]);
      prod *= arch_.coupling == Coupling::kPaperLiteral ? 2.0 * c * d : d;
    }
    total += pi_[m] * prod;
  }
  return total;
}

double ForecastDistribution::marginalized_cdf(std::span<const double> sm, std::span<const std::size_t> held) const {
  check_dims(sm);
  std::vector<double> x(sm.begin(), sm.end());
  std::vector<bool> seen(arch_.n_vars, false);
  for (std::size_t h : held) {
    if (h >= arch_.n_vars) throw std::invalid_argument("held index out of range");
    if (seen[h]) throw std::invalid_argument("held index listed twice (overlapping index sets)");
    seen[h] = true;
    x[h] = kInf;
  }
  return joint_cdf(x);
}

double ForecastDistribution::marginal_cdf(std::size_t var, double x) const {
  std::vector<double> sm(arch_.n_vars, kInf);
  sm.at(var) = x;
  return joint_cdf(sm);
}

double ForecastDistribution::marginal_pdf(std::size_t var, double x) const {
  if (var >= arch_.n_vars) throw std::out_of_range("variable index out of range");
  double total = 0.0;
  for (std::size_t m = 0; m < arch_.n_components; ++m) {
    const auto [c, d] = unit_cdf_pdf(m, var, x);
    total += pi_[m] * (arch_.coupling == Coupling::kPaperLiteral ? 2.0 * c * d : d);
  }
  return total;
}

ConditionalSlice ForecastDistribution::conditional(std::size_t i, std::span<const double> sm) const {
  check_dims(sm);
  if (i >= arch_.n_vars) throw std::out_of_range("variable index out of range");
  ConditionalSlice slice;
  slice.dist_ = this;
  slice.var_ = i;
  slice.weights_.assign(arch_.n_components, 0.0);
  double denom = 0.0;
  for (std::size_t m = 0; m < arch_.n_components; ++m) {
    double prod = pi_[m];
    for (std::size_t k = 0; k < arch_.n_vars; ++k) {
      if (k == i) continue;
      const auto [c, d] = unit_cdf_pdf(m, k, sm[k]);
      prod *= arch_.coupling == Coupling::kPaperLiteral ? 2.0 * c * d : d;
    }
    slice.weights_[m] = prod;
    denom += prod;
  }
  if (!(denom > kDensityFloor))
    throw NumericError("conditioning density below floor; implausible conditioning point");
  for (double& w : slice.weights_) w /= denom;
  return slice;
}

double ForecastDistribution::conditional_pdf(std::size_t i, std::span<const double> sm) const {
  return conditional(i, sm).pdf(sm[i]);
}

double ForecastDistribution::conditional_cdf(std::size_t i, std::span<const double> sm) const {
  return conditional(i, sm).cdf(sm[i]);
}

double ConditionalSlice::cdf(double x) const {
  double total = 0.0;
  for (std::size_t m = 0; m < weights_.size(); ++m) {
    if (weights_[m] == 0.0) continue;
    const double c = dist_->unit_cdf(m, var_, x);
    total += weights_[m] * (dist_->coupling() == Coupling::kPaperLiteral ? c * c : c);
  }
  return std::clamp(total, 0.0, 1.0);
}

double ConditionalSlice::pdf(double x) const {
  double total = 0.0;
  for (std::size_t m = 0; m < weights_.size(); ++m) {
    if (weights_[m] == 0.0) continue;
    const auto [c, d] = dist_->unit_cdf_pdf(m, var_, x);
    total += weights_[m] * (dist_->coupling() == Coupling::kPaperLiteral ? 2.0 * c * d : d);
  }
  return total;
}

}  // namespace mdc::jdan

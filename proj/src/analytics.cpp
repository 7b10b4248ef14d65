#include "mdc/analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdc/error.hpp"
#include "mdc/random.hpp"

namespace mdc::analytics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

// Bracket [lo, hi] with F(lo) <= u <= F(hi), then safeguarded Newton.
// fd returns (F, dF/dx).
template <class Fd>
double invert_unit(Fd fd, double u, double lo, double hi) {
  double flo = fd(lo).first, fhi = fd(hi).first;
  double width = hi - lo;
  while (flo > u || fhi < u) {
    if (width > 1e6) throw NumericError("inverse transform: bracket failure");
    if (flo > u) {
      lo -= width;
      flo = fd(lo).first;
    }
    if (fhi < u) {
      hi += width;
      fhi = fd(hi).first;
    }
    width = hi - lo;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const auto [f, d] = fd(x);
    const double r = f - u;
    if (std::abs(r) <= 1e-13) return x;
    if (r < 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= 1e-13 * std::max(1.0, std::abs(x))) return x;
    double next = d > 0.0 ? x - r / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

}  // namespace

double invert_cdf(const std::function<double(double)>& cdf, double alpha, const QuantileOptions& opt) {
  check_alpha(alpha);
  double lo = opt.lo, hi = opt.hi;
  double flo = cdf(lo), fhi = cdf(hi);
  while (flo > alpha || fhi < alpha) {
    const double width = hi - lo;
    if (width > opt.max_width) throw NumericError("quantile bracket failure (degenerate conditional)");
    if (flo > alpha) {
      lo -= width;
      flo = cdf(lo);
    }
    if (fhi < alpha) {
      hi += width;
      fhi = cdf(hi);
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < opt.max_iterations; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = cdf(mid);
    if (std::abs(f - alpha) <= opt.tolerance) break;
    if (f < alpha)
      lo = mid;
    else
      hi = mid;
  }
  return mid;
}

double quantile(const jdan::ForecastDistribution& dist, std::size_t i, std::span<const double> sm, double alpha,
                const QuantileOptions& opt) {
  check_alpha(alpha);
  const jdan::ConditionalSlice slice = dist.conditional(i, sm);
  return invert_cdf([&](double x) { return slice.cdf(x); }, alpha, opt);
}

std::vector<double> sample(const jdan::ForecastDistribution& dist, std::size_t n, std::uint64_t seed) {
  const std::size_t dims = dist.dims();
  const bool literal = dist.coupling() == jdan::Coupling::kPaperLiteral;
  const std::vector<double>& pi = dist.mixture_weights();
  Rng rng(seed);
  std::vector<double> out(n * dims);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t m = 0;
    if (pi.size() > 1) {
      double u = rng.uniform(), acc = 0.0;
      for (m = 0; m + 1 < pi.size(); ++m) {
        acc += pi[m];
        if (u < acc) break;
      }
    }
    for (std::size_t i = 0; i < dims; ++i) {
      const double u = rng.uniform_open();
      const double loc = dist.arch().loc(i), scl = dist.arch().scl(i);
      if (literal) {
        // Fbar^2 = u  <=>  Fbar = sqrt(u)
        out[s * dims + i] = invert_unit([&](double x) { return dist.unit_cdf_pdf(0, i, x); }, std::sqrt(u),
                                        loc - scl, loc + scl);
      } else {
        out[s * dims + i] =
            invert_unit([&](double x) { return dist.unit_cdf_pdf(m, i, x); }, u, loc - scl, loc + scl);
      }
    }
  }
  return out;
}

void SecurityThresholds::validate() const {
  if (gamma.empty()) throw std::invalid_argument("thresholds: need at least one gamma");
  // gamma <= 0 (a bound at or above 1) is allowed: it describes an unreachable secure box
  for (double g : gamma)
    if (std::isnan(g)) throw std::invalid_argument("thresholds: gamma is NaN");
}

std::vector<double> SecurityThresholds::lower_bounds() const {
  std::vector<double> b(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) b[i] = 1.0 - gamma[i];
  return b;
}

SecurityThresholds default_thresholds() { return {{0.7, 0.65, 0.6}}; }

Json OmegaResult::to_json(bool include_timing) const {
  Json corners_j = Json::array();
  for (const auto& c : corners) {
    std::string pattern;
    for (bool b : c.at_lower) pattern += b ? 'L' : 'U';
    corners_j.push_back({{"corner", pattern}, {"sign", c.sign}, {"cdf", c.cdf}});
  }
  Json j{{"omega", omega}, {"raw", raw}, {"corners", std::move(corners_j)}};
  if (include_timing) j["seconds"] = seconds;
  return j;
}

OmegaResult omega(const jdan::ForecastDistribution& dist, const SecurityThresholds& thresholds) {
  const auto t0 = std::chrono::steady_clock::now();
  thresholds.validate();
  const std::size_t n = dist.dims();
  if (thresholds.gamma.size() != n)
    throw std::invalid_argument("thresholds: expected " + std::to_string(n) + " values, got " +
                                std::to_string(thresholds.gamma.size()));
  if (n > kMaxOmegaDims) throw std::invalid_argument("omega: more than 20 flowgates (2^N corner guard)");
  const std::vector<double> lb = thresholds.lower_bounds();
  OmegaResult r;
  r.corners.reserve(std::size_t{1} << n);
  std::vector<double> x(n);
  double total = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    OmegaCorner c;
    c.at_lower.resize(n);
    int lower = 0;
    for (std::size_t i = 0; i < n; ++i) {
      c.at_lower[i] = (mask >> i) & 1U;
      x[i] = c.at_lower[i] ? lb[i] : kInf;
      lower += c.at_lower[i] ? 1 : 0;
    }
    c.sign = lower % 2 ? -1 : 1;
    c.cdf = dist.joint_cdf(x);
    total += c.sign * c.cdf;
    r.corners.push_back(std::move(c));
  }
  r.raw = total;
  if (total < -1e-9 || total > 1.0 + 1e-9)
    throw NumericError("omega outside [0, 1] by more than rounding noise: " + std::to_string(total));
  r.omega = std::clamp(total, 0.0, 1.0);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double secure_scenario_proportion(const jdan::ForecastDistribution& dist, const SecurityThresholds& thresholds,
                                  std::size_t n, std::uint64_t seed) {
  thresholds.validate();
  const std::size_t dims = dist.dims();
  if (thresholds.gamma.size() != dims) throw std::invalid_argument("thresholds length does not match distribution");
  if (n == 0) throw std::invalid_argument("need at least one scenario");
  const std::vector<double> lb = thresholds.lower_bounds();
  const std::vector<double> draws = sample(dist, n, seed);
  std::size_t secure = 0;
  for (std::size_t s = 0; s < n; ++s) {
    bool ok = true;
    for (std::size_t i = 0; i < dims && ok; ++i) ok = draws[s * dims + i] >= lb[i];
    secure += ok ? 1 : 0;
  }
  return 100.0 * static_cast<double>(secure) / static_cast<double>(n);
}

}  // namespace mdc::analytics

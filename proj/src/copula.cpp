#include "mdc/copula.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mdc/error.hpp"

namespace mdc::evaluation {

std::string to_string(CopulaFamily f) { return f == CopulaFamily::kClayton ? "clayton" : "frank"; }

CopulaFamily copula_family_from_string(std::string_view s) {
  if (s == "clayton") return CopulaFamily::kClayton;
  if (s == "frank") return CopulaFamily::kFrank;
  throw ConfigError("unknown copula family '" + std::string(s) + "'");
}

void CopulaSpec::validate(std::size_t dims) const {
  if (!std::isfinite(theta)) throw std::invalid_argument("copula theta must be finite");
  if (family == CopulaFamily::kClayton && !(theta > 0.0)) throw std::invalid_argument("Clayton needs theta > 0");
  if (family == CopulaFamily::kFrank) {
    if (theta == 0.0) throw std::invalid_argument("Frank needs theta != 0");
    if (dims >= 3 && theta < 0.0) throw std::invalid_argument("Frank with three or more variables needs theta > 0");
  }
}

namespace {

void check_u(std::span<const double> u) {
  if (u.empty()) throw std::invalid_argument("copula needs at least one coordinate");
  for (double v : u)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("copula argument outside [0, 1]");
}

// Frank: exp(-phi(u)) = expm1(-theta u) / expm1(-theta), in [0, 1].
double frank_t(double u, double theta) { return std::expm1(-theta * u) / std::expm1(-theta); }

}  // namespace

double polylog_neg(std::size_t n, double w) {
  // Li_{-n}(w) = sum_{k=0}^{n} k! S(n+1, k+1) (w / (1 - w))^{k+1}
  std::vector<std::vector<double>> s(n + 2, std::vector<double>(n + 2, 0.0));
  s[0][0] = 1.0;
  for (std::size_t a = 1; a <= n + 1; ++a)
    for (std::size_t b = 1; b <= a; ++b) s[a][b] = static_cast<double>(b) * s[a - 1][b] + s[a - 1][b - 1];
  const double r = w / (1.0 - w);
  double total = 0.0, fact = 1.0, rp = r;
  for (std::size_t k = 0; k <= n; ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    total += fact * s[n + 1][k + 1] * rp;
    rp *= r;
  }
  return total;
}

double copula_cdf(std::span<const double> u, const CopulaSpec& spec) {
  check_u(u);
  spec.validate(u.size());
  for (double v : u)
    if (v == 0.0) return 0.0;
  const double th = spec.theta;
  if (spec.family == CopulaFamily::kClayton) {
    double s = 0.0;
    for (double v : u) s += std::pow(v, -th);
    s -= static_cast<double>(u.size()) - 1.0;
    return std::clamp(std::pow(s, -1.0 / th), 0.0, 1.0);
  }
  double prod = 1.0;
  for (double v : u) prod *= frank_t(v, th);
  const double w = -std::expm1(-th) * prod;
  return std::clamp(-std::log1p(-w) / th, 0.0, 1.0);
}

double copula_conditional_cdf(std::size_t i, std::span<const double> u, const CopulaSpec& spec) {
  check_u(u);
  const std::size_t n = u.size();
  if (i >= n) throw std::out_of_range("copula conditional index out of range");
  spec.validate(n);
  if (n == 1) return u[0];
  if (u[i] == 0.0) return 0.0;
  if (u[i] == 1.0) return 1.0;
  const double th = spec.theta;
  const std::size_t d = n - 1;
  if (spec.family == CopulaFamily::kClayton) {
    // psi^(d)(s) is proportional to (1 + theta s)^(-1/theta - d); rest and full below are theta * s
    double rest = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) rest += std::pow(u[k], -th) - 1.0;
    const double full = rest + std::pow(u[i], -th) - 1.0;
    const double ratio = (1.0 + rest) / (1.0 + full);
    return std::clamp(std::pow(ratio, 1.0 / th + static_cast<double>(d)), 0.0, 1.0);
  }
  // Frank: psi^(d)(s) = (-1)^d Li_{1-d}(w(s)) / theta, w(s) = (1 - e^-theta) e^-s
  double prod_rest = 1.0;
  for (std::size_t k = 0; k < n; ++k)
    if (k != i) prod_rest *= frank_t(u[k], th);
  const double c = -std::expm1(-th);
  const double w_rest = c * prod_rest;
  const double w_full = w_rest * frank_t(u[i], th);
  const double num = polylog_neg(d - 1, w_full);
  const double den = polylog_neg(d - 1, w_rest);
  if (den == 0.0) throw NumericError("Frank conditional: conditioning density vanished");
  return std::clamp(num / den, 0.0, 1.0);
}

}  // namespace mdc::evaluation

#include "mdc/normal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mdc/error.hpp"

namespace mdc {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - lo) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

bool cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double s = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= a[j * n + k] * a[j * n + k];
    if (!(s > 0.0)) return false;
    const double l = std::sqrt(s);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) t -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = t / l;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
  return true;
}

std::vector<double> spd_inverse(const std::vector<double>& a, std::size_t n) {
  std::vector<double> l = a;
  if (!cholesky(l, n)) throw std::invalid_argument("matrix is not positive definite");
  std::vector<double> inv(n * n, 0.0);
  // Solve L L^T X = I column by column.
  std::vector<double> y(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = i == col ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
      y[i] = s / l[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * inv[k * n + col];
      inv[ii * n + col] = s / l[ii * n + ii];
    }
  }
  return inv;
}

Mvn::Mvn(std::vector<double> mean, std::vector<double> cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const std::size_t n = mean_.size();
  if (n == 0 || cov_.size() != n * n) throw ShapeError("mvn: covariance must be n x n");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(cov_[i * n + j] - cov_[j * n + i]) > 1e-12 * (1.0 + std::abs(cov_[i * n + j])))
        throw std::invalid_argument("mvn: covariance is not symmetric");
  precision_ = spd_inverse(cov_, n);
}

void Mvn::conditional_moments(std::size_t i, const std::vector<double>& x, double& mean, double& sd) const {
  const std::size_t n = dims();
  if (x.size() != n || i >= n) throw ShapeError("mvn: conditioning vector has wrong length");
  const double qii = precision_[i * n + i];
  double shift = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) shift += precision_[i * n + j] * (x[j] - mean_[j]);
  mean = mean_[i] - shift / qii;
  sd = std::sqrt(1.0 / qii);
}

double Mvn::conditional_cdf(std::size_t i, const std::vector<double>& x) const {
  double m, s;
  conditional_moments(i, x, m, s);
  return normal_cdf((x[i] - m) / s);
}

double Mvn::conditional_pdf(std::size_t i, const std::vector<double>& x) const {
  double m, s;
  conditional_moments(i, x, m, s);
  return normal_pdf((x[i] - m) / s) / s;
}

double Mvn::conditional_quantile(std::size_t i, const std::vector<double>& x, double alpha) const {
  double m, s;
  conditional_moments(i, x, m, s);
  return m + s * normal_quantile(alpha);
}

}  // namespace mdc

#include "mdc/mkde.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mdc/error.hpp"
#include "mdc/normal.hpp"

namespace mdc::evaluation {

namespace {

std::vector<double> flatten(const std::vector<std::vector<double>>& targets, std::size_t& dims) {
  if (targets.size() < 2) throw std::invalid_argument("MKDE needs at least two training vectors");
  dims = targets.front().size();
  if (dims == 0) throw std::invalid_argument("MKDE vectors are empty");
  std::vector<double> flat;
  flat.reserve(targets.size() * dims);
  for (const auto& t : targets) {
    if (t.size() != dims) throw ShapeError("MKDE training vectors differ in length");
    flat.insert(flat.end(), t.begin(), t.end());
  }
  return flat;
}

}  // namespace

MkdeModel mkde_with_bandwidth(const std::vector<std::vector<double>>& targets, std::vector<double> bandwidth) {
  MkdeModel m;
  m.points = flatten(targets, m.dims);
  if (bandwidth.size() != m.dims) throw ShapeError("one bandwidth per dimension required");
  for (double h : bandwidth)
    if (!(h > 0.0)) throw std::invalid_argument("MKDE bandwidths must be positive");
  m.bandwidth = std::move(bandwidth);
  return m;
}

MkdeModel mkde_fit(const std::vector<std::vector<double>>& targets) {
  std::size_t dims = 0;
  const std::vector<double> flat = flatten(targets, dims);
  const double n = static_cast<double>(targets.size());
  const double factor = std::pow(n, -1.0 / (static_cast<double>(dims) + 4.0));
  std::vector<double> h(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) mean += flat[k * dims + j];
    mean /= n;
    double ss = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) ss += (flat[k * dims + j] - mean) * (flat[k * dims + j] - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0)) throw std::invalid_argument("MKDE: zero-variance dimension " + std::to_string(j));
    h[j] = factor * sd;
  }
  return mkde_with_bandwidth(targets, std::move(h));
}

double MkdeModel::density(std::span<const double> x) const {
  if (x.size() != dims) throw ShapeError("MKDE query has wrong length");
  const std::size_t n = size();
  double norm = 1.0;
  for (double h : bandwidth) norm *= h;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double e = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
      const double z = (x[j] - points[k * dims + j]) / bandwidth[j];
      e += z * z;
    }
    total += std::exp(-0.5 * e);
  }
  return total / (static_cast<double>(n) * norm * std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(dims)));
}

namespace {

// Kernel average of per_kernel(z_i), weighted by the conditioning kernels (log-sum-exp).
template <class F>
double conditional_reduce(const MkdeModel& m, std::size_t i, std::span<const double> x, F per_kernel) {
  if (x.size() != m.dims || i >= m.dims) throw ShapeError("MKDE conditional query has wrong shape");
  const std::size_t n = m.size();
  std::vector<double> logw(n, 0.0);
  double mx = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    double e = 0.0;
    for (std::size_t j = 0; j < m.dims; ++j) {
      if (j == i) continue;
      const double z = (x[j] - m.points[k * m.dims + j]) / m.bandwidth[j];
      e -= 0.5 * z * z;
    }
    logw[k] = e;
    mx = std::max(mx, e);
  }
  double wsum = 0.0, total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::exp(logw[k] - mx);
    wsum += w;
    total += w * per_kernel((x[i] - m.points[k * m.dims + i]) / m.bandwidth[i]);
  }
  return total / wsum;
}

}  // namespace

double MkdeModel::conditional_cdf(std::size_t i, std::span<const double> x) const {
  return conditional_reduce(*this, i, x, [](double z) { return normal_cdf(z); });
}

double MkdeModel::conditional_pdf(std::size_t i, std::span<const double> x) const {
  const double h = bandwidth.at(i);
  return conditional_reduce(*this, i, x, [h](double z) { return normal_pdf(z) / h; });
}

}  // namespace mdc::evaluation

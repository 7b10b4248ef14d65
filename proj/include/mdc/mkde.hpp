#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Product-Gaussian kernel density estimate of the joint margin distribution.
namespace mdc::evaluation {

struct MkdeModel {
  std::size_t dims = 0;
  std::vector<double> points;     // n x dims row-major
  std::vector<double> bandwidth;  // per dimension, > 0

  std::size_t size() const { return dims ? points.size() / dims : 0; }
  double density(std::span<const double> x) const;
  // Conditional of dimension i given the other coordinates of x: the kernel
  // mixture with weights proportional to the conditioning kernel values.
  double conditional_cdf(std::size_t i, std::span<const double> x) const;
  double conditional_pdf(std::size_t i, std::span<const double> x) const;
};

// Scott's rule h_i = n^(-1/(N+4)) * std_i. Throws on a zero-variance dimension.
MkdeModel mkde_fit(const std::vector<std::vector<double>>& targets);
MkdeModel mkde_with_bandwidth(const std::vector<std::vector<double>>& targets, std::vector<double> bandwidth);

}  // namespace mdc::evaluation

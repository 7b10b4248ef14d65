#pragma once

#include <cstddef>
#include <vector>

namespace mdc {

double normal_pdf(double z);
double normal_cdf(double z);
// Inverse of normal_cdf on (0, 1), accurate to a few ulps after refinement.
double normal_quantile(double p);

// In-place lower Cholesky factor of a symmetric n x n row-major matrix.
// Returns false when the matrix is not positive definite.
bool cholesky(std::vector<double>& a, std::size_t n);
// Inverse of a symmetric positive definite matrix; throws if not PD.
std::vector<double> spd_inverse(const std::vector<double>& a, std::size_t n);

// Multivariate normal with cached precision matrix, exposing the
// one-dimensional conditionals used as ground truth.
class Mvn {
 public:
  Mvn(std::vector<double> mean, std::vector<double> cov);

  std::size_t dims() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& cov() const { return cov_; }

  // Mean and std of x_i given x_j for all j != i (x_i itself is ignored).
  void conditional_moments(std::size_t i, const std::vector<double>& x, double& mean, double& sd) const;
  double conditional_cdf(std::size_t i, const std::vector<double>& x) const;
  double conditional_pdf(std::size_t i, const std::vector<double>& x) const;
  double conditional_quantile(std::size_t i, const std::vector<double>& x, double alpha) const;

 private:
  std::vector<double> mean_, cov_, precision_;
};

}  // namespace mdc

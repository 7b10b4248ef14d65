#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdc/jdan.hpp"
#include "mdc/random.hpp"

namespace mdc::evaluation {

using Json = nlohmann::json;

// Generic two-input network with positive weights: two sigmoid hidden
// layers and a linear output. Monotone in each input, but its mixed
// partial derivative can be negative.
struct MisoNet {
  std::size_t width = 0;
  std::vector<double> w1, b1;  // 2 x width, width
  std::vector<double> w2, b2;  // width x width, width
  std::vector<double> w3;      // width
  double b3 = 0.0;

  double value(double x, double y) const;
  // Exact first partials.
  void gradient(double x, double y, double& dx, double& dy) const;
};

MisoNet random_miso(Rng& rng, std::size_t width);

// Central-difference estimate of d2 f / dx dy.
double mixed_partial_fd(const std::function<double(double, double)>& f, double x, double y, double h);

struct MisoDemoOptions {
  std::size_t nets = 20;
  std::size_t width = 8;
  std::size_t grid = 50;
  double lo = -3.0;
  double hi = 3.0;
  double h = 1e-3;
  double generic_threshold = -1e-4;
  double jdan_threshold = -1e-8;
  std::size_t jdan_nets = 5;
  std::uint64_t seed = 2024;
};

struct MisoDemoReport {
  std::size_t nets = 0;
  std::size_t nets_with_negative_mixed = 0;
  double fraction_negative = 0.0;
  double min_first_partial = 0.0;
  double min_mixed_generic = 0.0;
  std::size_t jdan_nets = 0;
  std::size_t jdan_negative_points = 0;
  double min_mixed_jdan = 0.0;

  Json to_json() const;
};

MisoDemoReport miso_counterexample_demo(const MisoDemoOptions& options = {});

double bivariate_normal_cdf(double x, double y, double rho);

struct GaussianComponent {
  double weight, mean_x, mean_y, sd_x, sd_y, rho;
};
using CdfTarget = std::function<double(double, double)>;
CdfTarget gaussian_mixture_cdf(std::vector<GaussianComponent> components);
// Two diagonal clusters with moderate within-cluster correlation.
CdfTarget correlated_mixture_target();
// Product of two normal CDFs.
CdfTarget independent_product_target();

struct FitTestOptions {
  jdan::Coupling coupling = jdan::Coupling::kMixture;
  std::size_t components = 8;
  std::size_t width = 8;
  std::size_t blocks = 1;
  std::size_t iterations = 3000;
  double learning_rate = 0.02;
  std::size_t grid = 30;
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t seed = 11;
};

struct FitTestResult {
  double initial_max_error = 0.0;
  double max_error = 0.0;
  double final_mse = 0.0;
  jdan::JdanArch arch;
  jdan::JdanParams params;
};

jdan::JdanArch fit_test_arch(const FitTestOptions& options);
jdan::JdanParams fit_test_init(const FitTestOptions& options);

// Adam on free JDAN parameters (weights through SoftPlus) minimizing the
// squared CDF error on a grid x grid lattice over [lo, hi]^2. Starts from
// `init` when given, otherwise from fit_test_init().
FitTestResult coupling_fit_test(const CdfTarget& target, const FitTestOptions& options = {},
                                  const jdan::JdanParams* init = nullptr);

}  // namespace mdc::evaluation

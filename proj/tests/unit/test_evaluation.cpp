#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mdc/baselines.hpp"
#include "mdc/copula.hpp"
#include "mdc/error.hpp"
#include "mdc/mkde.hpp"
#include "mdc/monotone_checks.hpp"
#include "mdc/normal.hpp"
#include "mdc/reliability.hpp"

using namespace mdc;
using namespace mdc::evaluation;

TEST_CASE("polylogarithm of negative order matches its power series") {
  for (std::size_t n : {0u, 1u, 2u, 4u})
    for (double w : {0.05, 0.4, 0.8}) {
      double series = 0.0;
      for (int k = 1; k < 4000; ++k) series += std::pow(k, static_cast<double>(n)) * std::pow(w, k);
      CHECK(polylog_neg(n, w) == doctest::Approx(series).epsilon(1e-10));
    }
}

TEST_CASE("copula CDFs have uniform margins and known closed forms") {
  for (auto fam : {CopulaFamily::kClayton, CopulaFamily::kFrank})
    for (double th : {0.5, 1.0, 1.5}) {
      const CopulaSpec s{fam, th};
      const std::vector<double> u{0.3, 1.0, 1.0};
      CHECK(copula_cdf(u, s) == doctest::Approx(0.3).epsilon(1e-12));
      const std::vector<double> z{0.3, 0.0, 0.5};
      CHECK(copula_cdf(z, s) == 0.0);
    }
  const std::vector<double> uv{0.3, 0.6};
  CHECK(copula_cdf(uv, {CopulaFamily::kClayton, 2.0}) ==
        doctest::Approx(std::pow(std::pow(0.3, -2.0) + std::pow(0.6, -2.0) - 1.0, -0.5)));
  const double t = 1.5;
  const double frank = -std::log(1 + std::expm1(-t * 0.3) * std::expm1(-t * 0.6) / std::expm1(-t)) / t;
  CHECK(copula_cdf(uv, {CopulaFamily::kFrank, t}) == doctest::Approx(frank).epsilon(1e-12));
  CHECK_THROWS(copula_cdf(uv, {CopulaFamily::kClayton, 0.0}));
  CHECK_THROWS(copula_cdf(std::vector<double>{0.1, 0.2, 0.3}, {CopulaFamily::kFrank, -1.0}));
}

TEST_CASE("copula conditionals equal normalized derivatives of the copula CDF") {
  const double h = 1e-5;
  for (auto fam : {CopulaFamily::kClayton, CopulaFamily::kFrank})
    for (double th : {0.5, 1.0, 1.5}) {
      const CopulaSpec s{fam, th};
      // bivariate: dC/dv
      for (auto [u, v] : {std::pair{0.2, 0.7}, std::pair{0.6, 0.3}, std::pair{0.05, 0.1}}) {
        const double fd =
            (copula_cdf(std::vector<double>{u, v + h}, s) - copula_cdf(std::vector<double>{u, v - h}, s)) / (2 * h);
        CHECK(copula_conditional_cdf(0, std::vector<double>{u, v}, s) == doctest::Approx(fd).epsilon(1e-6));
      }
      // trivariate: d2C/du1 du2 divided by the same derivative at u0 = 1
      const double g = 1e-4;
      auto mixed = [&](double u0, double u1, double u2) {
        auto C = [&](double a, double b) { return copula_cdf(std::vector<double>{u0, a, b}, s); };
        return (C(u1 + g, u2 + g) - C(u1 + g, u2 - g) - C(u1 - g, u2 + g) + C(u1 - g, u2 - g)) / (4 * g * g);
      };
      const double expected = mixed(0.4, 0.3, 0.8) / mixed(1.0, 0.3, 0.8);
      CHECK(copula_conditional_cdf(0, std::vector<double>{0.4, 0.3, 0.8}, s) ==
            doctest::Approx(expected).epsilon(1e-5));
    }
}

TEST_CASE("MKDE uses Scott's rule and conditions through kernel weights") {
  const std::vector<std::vector<double>> pts{{0.0, 0.0}, {1.0, 2.0}, {2.0, 1.0}, {3.0, 5.0}};
  const MkdeModel m = mkde_fit(pts);
  const double sd0 = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0);
  CHECK(m.bandwidth[0] == doctest::Approx(sd0 * std::pow(4.0, -1.0 / 6.0)));
  const MkdeModel k = mkde_with_bandwidth(pts, {0.5, 0.8});
  const std::vector<double> x{1.2, 1.5};
  double dens = 0.0, num = 0.0, den = 0.0;
  for (const auto& p : pts) {
    const double k0 = normal_pdf((x[0] - p[0]) / 0.5) / 0.5, k1 = normal_pdf((x[1] - p[1]) / 0.8) / 0.8;
    dens += k0 * k1 / 4.0;
    num += k1 * normal_cdf((x[0] - p[0]) / 0.5);
    den += k1;
  }
  CHECK(k.density(x) == doctest::Approx(dens).epsilon(1e-13));
  CHECK(k.conditional_cdf(0, x) == doctest::Approx(num / den).epsilon(1e-13));
  const double fd = (k.conditional_cdf(0, std::vector<double>{1.2 + 1e-6, 1.5}) -
                     k.conditional_cdf(0, std::vector<double>{1.2 - 1e-6, 1.5})) / 2e-6;
  CHECK(k.conditional_pdf(0, x) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("Gaussian conditionals match the bivariate formulas") {
  const Mvn mvn({1.0, -1.0}, {4.0, 1.2, 1.2, 1.0});
  double mean = 0.0, sd = 0.0;
  mvn.conditional_moments(0, {0.0, 0.5}, mean, sd);
  CHECK(mean == doctest::Approx(1.0 + 1.2 / 1.0 * 1.5));
  CHECK(sd == doctest::Approx(std::sqrt(4.0 - 1.44)));
  CHECK(mvn.conditional_cdf(0, {mean, 0.5}) == doctest::Approx(0.5));
  CHECK(normal_quantile(normal_cdf(1.7)) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
  CHECK_THROWS(Mvn({0.0, 0.0}, {1.0, 2.0, 2.0, 1.0}));
}

namespace {

// Conditional model with a fixed per-window CDF for testing the metric.
class FixedModel : public ConditionalModel {
 public:
  explicit FixedModel(std::function<double(double)> cdf, std::function<double(double)> q = {})
      : cdf_(std::move(cdf)), q_(std::move(q)) {}
  std::string name() const override { return "fixed"; }
  std::size_t dims() const override { return 1; }
  std::unique_ptr<BoundConditional> bind(const pipeline::SampleWindow&) const override {
    struct B : BoundConditional {
      const FixedModel* m;
      double cdf(std::size_t, std::span<const double> sm) const override { return m->cdf_(sm[0]); }
      double quantile(std::size_t i, std::span<const double> sm, double a) const override {
        return m->q_ ? m->q_(a) : BoundConditional::quantile(i, sm, a);
      }
    };
    auto b = std::make_unique<B>();
    b->m = this;
    return b;
  }

 private:
  std::function<double(double)> cdf_, q_;
};

std::vector<pipeline::SampleWindow> normal_targets(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<pipeline::SampleWindow> out(n);
  for (auto& w : out) w.target = {rng.normal()};
  return out;
}

}  // namespace

TEST_CASE("a calibrated forecaster has small deviations on both routes") {
  const auto test = normal_targets(20000, 3);
  const FixedModel m([](double y) { return normal_cdf(y); }, [](double a) { return normal_quantile(a); });
  const auto pit = reliability(m, test, {ReliabilityRoute::kPit});
  const auto qr = reliability(m, test, {ReliabilityRoute::kQuantile});
  CHECK(pit.alpha.size() == kAlphaCount);
  CHECK(pit.dims[0].bbar < 0.01);
  for (std::size_t j = 0; j < kAlphaCount; ++j) CHECK(pit.dims[0].b[j] == doctest::Approx(qr.dims[0].b[j]));
}

TEST_CASE("point masses give b = alpha below and alpha - 1 above the targets") {
  const auto test = normal_targets(500, 4);
  // all mass far below every target: F(y) = 1 and every quantile sits below y
  const FixedModel below([](double) { return 1.0; }, [](double) { return -100.0; });
  // all mass far above: F(y) = 0 and every quantile sits above y
  const FixedModel above([](double) { return 0.0; }, [](double) { return 100.0; });
  for (auto route : {ReliabilityRoute::kPit, ReliabilityRoute::kQuantile}) {
    const auto lo = reliability(below, test, {route});
    const auto hi = reliability(above, test, {route});
    for (std::size_t j = 0; j < kAlphaCount; ++j) {
      CHECK(lo.dims[0].b[j] == doctest::Approx(lo.alpha[j]));
      CHECK(hi.dims[0].b[j] == doctest::Approx(hi.alpha[j] - 1.0));
    }
  }
  CHECK(unit_step(0.0) == 1.0);
  CHECK(unit_step(-1e-300) == 0.0);
}

TEST_CASE("too many failing samples abort the evaluation") {
  const auto test = normal_targets(200, 5);
  int calls = 0;
  const FixedModel flaky([&](double y) {
    if (++calls % 100 == 0) throw NumericError("density floor");
    return normal_cdf(y);
  });
  CHECK_NOTHROW(reliability(flaky, test));  // 2 of 200 fail, exactly at the limit
  const FixedModel broken([](double y) -> double {
    if (y > 1.0) throw NumericError("density floor");
    return normal_cdf(y);
  });
  CHECK_THROWS_AS(reliability(broken, test), NumericError);
}

TEST_CASE("generic positive-weight networks are monotone with exact gradients") {
  Rng rng(6);
  const MisoNet net = random_miso(rng, 6);
  for (auto [x, y] : {std::pair{0.1, -0.4}, std::pair{1.5, 2.0}}) {
    double dx = 0.0, dy = 0.0;
    net.gradient(x, y, dx, dy);
    CHECK(dx >= 0.0);
    CHECK(dy >= 0.0);
    CHECK(dx == doctest::Approx((net.value(x + 1e-6, y) - net.value(x - 1e-6, y)) / 2e-6).epsilon(1e-6));
    CHECK(dy == doctest::Approx((net.value(x, y + 1e-6) - net.value(x, y - 1e-6)) / 2e-6).epsilon(1e-6));
  }
  const double mp = mixed_partial_fd([](double x, double y) { return x * x * y; }, 1.0, 2.0, 1e-3);
  CHECK(mp == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("bivariate normal CDF reference values") {
  CHECK(bivariate_normal_cdf(0.0, 0.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(bivariate_normal_cdf(0.3, -0.7, 0.0) == doctest::Approx(normal_cdf(0.3) * normal_cdf(-0.7)).epsilon(1e-9));
  CHECK(bivariate_normal_cdf(0.0, 0.0, -0.5) == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("paper-literal densities factorize for any parameters") {
  Rng rng(7);
  double worst = 0.0;
  for (std::size_t n : {2u, 3u})
    for (int trial = 0; trial < 50; ++trial) {
      jdan::JdanArch a;
      a.n_vars = n;
      a.n_components = 1;
      a.n_blocks = 1;
      a.width = 3;
      a.coupling = jdan::Coupling::kPaperLiteral;
      const jdan::ForecastDistribution d(a, jdan::random_params(a, rng));
      std::vector<double> x(n);
      for (double& v : x) v = rng.uniform(-2, 2);
      double prod = 1.0;
      for (std::size_t i = 0; i < n; ++i) prod *= d.marginal_pdf(i, x[i]);
      worst = std::max(worst, std::abs(d.joint_density(x) - prod));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("the fit test separates the two couplings on a small budget") {
  FitTestOptions o;
  o.iterations = 400;
  o.grid = 12;
  const auto target = correlated_mixture_target();
  const auto mix = coupling_fit_test(target, o);
  CHECK(mix.max_error < mix.initial_max_error);
  o.coupling = jdan::Coupling::kPaperLiteral;
  o.components = 1;
  const auto lit = coupling_fit_test(target, o);
  CHECK(lit.max_error > 0.05);
  // an independent target is reachable by either coupling
  const auto ind = coupling_fit_test(independent_product_target(), o);
  CHECK(ind.max_error < lit.max_error);
}

#include <doctest.h>

#include <cmath>

#include "mdc/error.hpp"
#include "mdc/pipeline.hpp"
#include "mdc/synth.hpp"

using namespace mdc;
using namespace mdc::synth;

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig c = default_config(3);
  const SynthData a = generate(c, 300), b = generate(c, 300);
  CHECK(a.series.flow == b.series.flow);
  CHECK(a.series.features == b.series.features);
  c.seed = 8;
  CHECK(generate(c, 300).series.flow != a.series.flow);
  CHECK_THROWS(generate(c, 0));
}

TEST_CASE("series layout and capacity ripple") {
  SynthConfig c = default_config(2);
  c.n_noise_features = 2;
  const SynthData d = generate(c, 200);
  CHECK(d.series.n_gates == 2);
  CHECK(d.series.n_features == 2 + 2 + 2);
  CHECK(d.series.length() == 200);
  CHECK(d.latent.size() == 200);
  CHECK(d.series.timestamps[1] == "2020-01-01T00:15:00Z");
  // P_tc = cap (1 + 0.05 sin(2 pi t / 96))
  const double expected = c.capacity[1] * (1.0 + 0.05 * std::sin(2.0 * std::numbers::pi * 24.0 / 96.0));
  CHECK(d.series.capacity[24 * 2 + 1] == doctest::Approx(expected));
  // the current-margin features are the margins themselves
  const auto m = pipeline::compute_margins(d.series);
  CHECK(d.series.features[10 * 6 + 2] == doctest::Approx(m[10 * 2 + 0]));
}

TEST_CASE("oracle moments follow the regime and the latent state") {
  SynthConfig c = default_config(2);
  const SynthData d = generate(c, 100);
  const Oracle o(c, d);
  const std::size_t t = 40;
  const Mvn mvn = o.target_distribution(t);
  const Regime& r = c.regimes[static_cast<std::size_t>(d.regime[t])];
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(mvn.mean()[i] == doctest::Approx(r.mean[i] + r.loading[i] * d.latent[t]));
  CHECK(mvn.cov() == r.cov);
  CHECK_THROWS(o.target_distribution(100));
}

TEST_CASE("realized margins are consistent with the oracle") {
  // standardized one-step residuals should have unit variance
  SynthConfig c = default_config(2);
  c.seed = 3;
  const SynthData d = generate(c, 6000);
  const Oracle o(c, d);
  const auto m = pipeline::compute_margins(d.series);
  double s1 = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t + 1 < d.series.length(); ++t) {
    const Mvn mvn = o.target_distribution(t);
    const double z = (m[(t + 1) * 2] - mvn.mean()[0]) / std::sqrt(mvn.cov()[0]);
    s1 += z;
    s2 += z * z;
    ++n;
  }
  CHECK(std::abs(s1 / n) < 0.05);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("invalid generator settings are rejected") {
  SynthConfig c = default_config(2);
  c.switch_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = default_config(2);
  c.regimes[0].cov = {1.0, 2.0, 2.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

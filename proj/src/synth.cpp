#include "mdc/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mdc/csv.hpp"
#include "mdc/error.hpp"
#include "mdc/random.hpp"

namespace mdc::synth {

namespace {

std::vector<double> equicorrelated(const std::vector<double>& sd, double rho) {
  const std::size_t n = sd.size();
  std::vector<double> cov(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cov[i * n + j] = sd[i] * sd[j] * (i == j ? 1.0 : rho);
  return cov;
}

template <class T>
std::vector<T> head(const std::vector<T>& v, std::size_t n) {
  return std::vector<T>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

void SynthConfig::validate() const {
  const std::size_t n = n_gates;
  if (n == 0) throw ConfigError("synth: n_gates must be positive");
  if (!(ar_coef > -1.0 && ar_coef < 1.0)) throw ConfigError("synth: AR coefficient must lie in (-1, 1)");
  if (!(ar_noise >= 0.0)) throw ConfigError("synth: AR noise must be non-negative");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) throw ConfigError("synth: switch probability must lie in [0, 1]");
  if (!(latent_obs_noise >= 0.0 && regime_obs_noise >= 0.0)) throw ConfigError("synth: observation noise must be >= 0");
  if (capacity.size() != n) throw ConfigError("synth: capacity needs one entry per flowgate");
  for (double c : capacity)
    if (!(c > 0.0)) throw ConfigError("synth: capacity must be positive");
  if (!(capacity_ripple >= 0.0 && capacity_ripple < 1.0) || ripple_period == 0)
    throw ConfigError("synth: capacity ripple must lie in [0, 1) with a positive period");
  if (tau == 0 || interval_minutes <= 0) throw ConfigError("synth: tau and interval must be positive");
  for (const Regime& r : regimes) {
    if (r.mean.size() != n || r.loading.size() != n || r.cov.size() != n * n)
      throw ConfigError("synth: regime vectors must match n_gates");
    std::vector<double> l = r.cov;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(r.cov[i * n + j] - r.cov[j * n + i]) > 1e-12) throw ConfigError("synth: covariance not symmetric");
    if (!cholesky(l, n)) throw ConfigError("synth: covariance is not positive definite");
  }
  csv::parse_timestamp(start_time);
}

SynthConfig default_config(std::size_t n_gates) {
  if (n_gates == 0 || n_gates > 3) throw ConfigError("synth: default regimes exist for 1 to 3 flowgates");
  SynthConfig c;
  c.n_gates = n_gates;
  c.ar_noise = std::sqrt(1.0 - c.ar_coef * c.ar_coef);
  c.regimes[0].mean = head<double>({0.45, 0.50, 0.55}, n_gates);
  c.regimes[0].loading = head<double>({0.08, 0.07, 0.06}, n_gates);
  c.regimes[0].cov = equicorrelated(head<double>({0.04, 0.04, 0.05}, n_gates), 0.8);
  c.regimes[1].mean = head<double>({0.38, 0.42, 0.50}, n_gates);
  c.regimes[1].loading = head<double>({0.12, 0.10, 0.09}, n_gates);
  c.regimes[1].cov = equicorrelated(head<double>({0.07, 0.07, 0.08}, n_gates), 0.85);
  c.capacity = head<double>({1200.0, 950.0, 800.0}, n_gates);
  return c;
}

SynthData generate(const SynthConfig& cfg, std::size_t length) {
  cfg.validate();
  if (length == 0) throw std::invalid_argument("synth: length must be positive");
  const std::size_t n = cfg.n_gates, f = cfg.n_features();
  Rng rng(cfg.seed);
  SynthData d;
  d.latent.resize(length);
  d.regime.resize(length);
  const double stationary_sd = cfg.ar_noise / std::sqrt(1.0 - cfg.ar_coef * cfg.ar_coef);
  d.latent[0] = stationary_sd * rng.normal();
  d.regime[0] = 0;
  for (std::size_t t = 1; t < length; ++t) {
    d.latent[t] = cfg.ar_coef * d.latent[t - 1] + cfg.ar_noise * rng.normal();
    d.regime[t] = rng.uniform() < cfg.switch_prob ? 1 - d.regime[t - 1] : d.regime[t - 1];
  }

  std::array<std::vector<double>, 2> chol;
  for (int r = 0; r < 2; ++r) {
    chol[r] = cfg.regimes[r].cov;
    cholesky(chol[r], n);
  }

  auto& s = d.series;
  s.n_gates = n;
  s.n_features = f;
  s.interval_minutes = cfg.interval_minutes;
  s.timestamps.resize(length);
  s.flow.resize(length * n);
  s.capacity.resize(length * n);
  s.features.resize(length * f);
  const std::int64_t start = csv::parse_timestamp(cfg.start_time);
  std::vector<double> z(n), sm(n);
  for (std::size_t t = 0; t < length; ++t) {
    s.timestamps[t] = csv::format_timestamp(start + static_cast<std::int64_t>(t) * cfg.interval_minutes * 60);
    const std::size_t src = t >= cfg.tau ? t - cfg.tau : t;
    const int r = d.regime[src];
    const Regime& reg = cfg.regimes[r];
    for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t k = 0; k <= i; ++k) e += chol[r][i * n + k] * z[k];
      sm[i] = reg.mean[i] + reg.loading[i] * d.latent[src] + e;
    }
    const double ripple =
        1.0 + cfg.capacity_ripple * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                             static_cast<double>(cfg.ripple_period));
    for (std::size_t i = 0; i < n; ++i) {
      const double ptc = cfg.capacity[i] * ripple;
      s.capacity[t * n + i] = ptc;
      s.flow[t * n + i] = (1.0 - sm[i]) * ptc;
    }
    double* feat = &s.features[t * f];
    feat[0] = d.latent[t] + cfg.latent_obs_noise * rng.normal();
    feat[1] = static_cast<double>(d.regime[t]) + cfg.regime_obs_noise * rng.normal();
    for (std::size_t i = 0; i < n; ++i) feat[2 + i] = 1.0 - s.flow[t * n + i] / s.capacity[t * n + i];
    for (std::size_t j = 0; j < cfg.n_noise_features; ++j) feat[2 + n + j] = rng.normal();
  }
  return d;
}

Oracle::Oracle(SynthConfig cfg, std::vector<double> latent, std::vector<int> regime)
    : cfg_(std::move(cfg)), latent_(std::move(latent)), regime_(std::move(regime)) {
  if (latent_.size() != regime_.size()) throw ShapeError("oracle: latent and regime lengths differ");
}

Mvn Oracle::target_distribution(std::size_t anchor) const {
  if (anchor >= latent_.size()) throw std::out_of_range("oracle: anchor beyond generated series");
  const Regime& reg = cfg_.regimes[regime_[anchor]];
  std::vector<double> mean(cfg_.n_gates);
  for (std::size_t i = 0; i < cfg_.n_gates; ++i) mean[i] = reg.mean[i] + reg.loading[i] * latent_[anchor];
  return Mvn(std::move(mean), reg.cov);
}

}  // namespace mdc::synth

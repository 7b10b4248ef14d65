#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdc/normal.hpp"
#include "mdc/pipeline.hpp"

// Synthetic flowgate scenarios with a known conditional distribution.
// A latent AR(1) driver s_t and a two-state Markov regime r_t set the mean
// and covariance of the margin vector tau steps ahead:
//   SM_{t+tau} ~ N(mean_r + loading_r * s_t, cov_r),  r = r_t.
namespace mdc::synth {

struct Regime {
  std::vector<double> mean;
  std::vector<double> loading;
  std::vector<double> cov;  // n x n row-major, symmetric positive definite
};

struct SynthConfig {
  std::size_t n_gates = 3;
  double ar_coef = 0.97;
  double ar_noise = 0.2431049156;  // sqrt(1 - 0.97^2): unit stationary variance
  double switch_prob = 0.01;
  std::array<Regime, 2> regimes;  // 0 = calm, 1 = strong wind
  std::vector<double> capacity;   // MW per flowgate
  double capacity_ripple = 0.05;  // relative daily swing of P_tc
  std::size_t ripple_period = 96;
  double latent_obs_noise = 0.1;
  double regime_obs_noise = 0.1;
  std::size_t n_noise_features = 0;
  std::size_t tau = 1;
  std::int64_t interval_minutes = 15;
  std::string start_time = "2020-01-01T00:00:00Z";
  std::uint64_t seed = 7;

  void validate() const;
  // noisy s_t, noisy r_t, current margins, then pure-noise channels
  std::size_t n_features() const { return 2 + n_gates + n_noise_features; }
};

// Calm/strong regimes for 1 <= n_gates <= 3 with strongly correlated margins.
SynthConfig default_config(std::size_t n_gates = 3);

struct SynthData {
  pipeline::FlowgateSeries series;
  std::vector<double> latent;  // s_t
  std::vector<int> regime;     // r_t
};

SynthData generate(const SynthConfig& cfg, std::size_t length);

// Exact distribution of the margins tau steps after an anchor, given the
// true latent state at the anchor.
class Oracle {
 public:
  Oracle(SynthConfig cfg, std::vector<double> latent, std::vector<int> regime);
  Oracle(const SynthConfig& cfg, const SynthData& data) : Oracle(cfg, data.latent, data.regime) {}

  Mvn target_distribution(std::size_t anchor) const;
  const SynthConfig& config() const { return cfg_; }

 private:
  SynthConfig cfg_;
  std::vector<double> latent_;
  std::vector<int> regime_;
};

}  // namespace mdc::synth

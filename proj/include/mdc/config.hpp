#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdc/analytics.hpp"
#include "mdc/nfn.hpp"
#include "mdc/synth.hpp"
#include "mdc/trainer.hpp"

namespace mdc::cli {

using Json = nlohmann::json;

struct DataConfig {
  std::string csv;                           // existing series; empty when synthetic
  std::optional<synth::SynthConfig> synth;   // generator settings (seed comes from RunConfig)
  std::size_t length = 15120;                // synthetic series length
  double delta_minutes = 20.0;
  std::optional<std::size_t> delta_steps;    // overrides delta_minutes
  std::size_t tau_steps = 1;
};

struct ArchConfig {
  std::size_t nfn_blocks = 8;
  std::size_t nfn_width = 64;
  std::size_t jdan_blocks = 4;
  std::size_t jdan_width = 64;
  std::size_t components = 4;
  jdan::Coupling coupling = jdan::Coupling::kMixture;
};

struct GridConfig {
  trainer::GridSpace space;            // delta axis filled from delta_minutes at run time
  std::vector<double> delta_minutes{20.0};
};

struct EvaluateConfig {
  std::vector<std::string> baselines{"mkde", "clayton", "frank", "oracle"};
  std::vector<double> thetas{0.5, 1.0, 1.5};
  std::string route = "pit";  // or "quantile"
};

struct ForecastConfig {
  std::vector<double> quantiles{0.05, 0.5, 0.95};
  std::size_t grid_points = 200;
  double grid_margin = 0.2;
  std::size_t max_windows = 10;  // first windows of the test split
};

struct IndexConfig {
  std::size_t window = 0;  // position in the test split
  std::size_t mc = 0;      // Monte-Carlo cross-check sample count, 0 = off
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "mdc-run";
  std::size_t jobs = 1;
  DataConfig data;
  ArchConfig arch;
  trainer::TrainConfig train;
  GridConfig grid;
  std::vector<double> thresholds{0.7, 0.65, 0.6};
  EvaluateConfig evaluate;
  ForecastConfig forecast;
  IndexConfig index;

  // Cross-field checks; throws ConfigError.
  void validate() const;
  Json to_json() const;
};

// Strict: unknown keys, wrong types and invalid values raise ConfigError.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

Json synth_config_to_json(const synth::SynthConfig& c);
synth::SynthConfig synth_config_from_json(const Json& j);

// Architecture implied by the config for a series with the given shape.
nfn::NfnArch make_arch(const ArchConfig& a, std::size_t n_gates, std::size_t n_features, std::size_t delta);

}  // namespace mdc::cli

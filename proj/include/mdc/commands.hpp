#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "mdc/config.hpp"

namespace mdc::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<jdan::Coupling> coupling;
  std::optional<std::size_t> mc;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

// File names inside output_dir.
namespace files {
inline constexpr const char* kSeries = "series.csv";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kOracle = "oracle.json";
inline constexpr const char* kCheckpoint = "checkpoint.json";
inline constexpr const char* kTrainReport = "train_report.json";
inline constexpr const char* kForecast = "forecast.json";
inline constexpr const char* kForecastCsv = "forecast_curves.csv";
inline constexpr const char* kEvaluation = "evaluation.json";
inline constexpr const char* kReliabilityCsv = "reliability.csv";
inline constexpr const char* kIndex = "index.json";
inline constexpr const char* kGrid = "grid.json";
inline constexpr const char* kGridCheckpoint = "grid_best_checkpoint.json";
}  // namespace files

// Each command writes its artifacts under cfg.output_dir and returns a short
// summary. ConfigError and NumericError propagate to the caller.
Json cmd_generate(const RunConfig& cfg);
Json cmd_train(const RunConfig& cfg);
Json cmd_forecast(const RunConfig& cfg);
Json cmd_evaluate(const RunConfig& cfg);
Json cmd_index(const RunConfig& cfg);
Json cmd_grid_search(const RunConfig& cfg);

// Exit codes: 0 success, 2 config error, 3 numeric failure, 1 anything else.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Drops timing keys ("seconds", "timing") recursively, for rerun comparisons.
Json strip_timing(Json j);

}  // namespace mdc::cli

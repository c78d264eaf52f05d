#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "lmft/pipeline.hpp"
#include "lmft/timeseries.hpp"

namespace lmft {

// CSV with a header row; first column is time, remaining columns channels.
// Values survive a round-trip at 17 significant digits. Read rejects
// malformed rows, non-numeric cells and non-increasing times, naming the
// offending row.
TimeSeries read_csv(const std::string& path);
void write_csv(const TimeSeries& series, const std::string& path);
void write_csv(const FeatureSeries& features, const std::string& path);

nlohmann::json diagnostics_to_json(const FeatureSeries& features);

nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);

nlohmann::json strategy_to_json(const SeedStrategy& strategy);
SeedStrategy strategy_from_json(const nlohmann::json& j);

/// Experiment description: where the data comes from, how features are
/// extracted, and optional post-hoc smoothing. Parsing is strict: unknown
/// keys are rejected and a parsed config re-serializes to identical JSON.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  // Exactly one of data_path / generator is set.
  std::optional<std::string> data_path;
  std::optional<std::string> generator_kind;  // variable_noise | variable_period
  std::uint64_t rng_seed = 0;

  KernelSpec kernel;
  CovExpr covariance;
  SeedStrategy strategy;

  // Query grid: stride over the data's own timestamps (1 = all), or an
  // explicit list.
  int query_stride = 1;
  std::optional<std::vector<double>> query_times;

  WeightingMode weighting_mode = WeightingMode::FullDiagonal;
  ObjectiveForm objective_form = ObjectiveForm::Simplified;

  std::optional<KernelSpec> smoothing;
  std::string output_prefix;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Runs the configured experiment: loads or generates the data, extracts
// features, writes <prefix>.features.csv and <prefix>.diagnostics.json, and
// with smoothing configured also <prefix>.smoothed.csv.
void run(const ExperimentConfig& config, int threads = 1);

}  // namespace lmft

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qmoe/data.hpp"
#include "qmoe/gbdt.hpp"
#include "qmoe/hybrid.hpp"
#include "qmoe/metrics.hpp"
#include "qmoe/moe.hpp"

namespace qmoe::bench {

/// Environment variable that overrides the configured CSV dataset path.
inline constexpr const char* kDatasetEnv = "QMOE_DATASET";

struct SyntheticSource {
  std::size_t n_rows = 20000;
  double fraud_rate = data::kDefaultFraudRate;
  std::uint64_t seed = 7;
};

struct RunConfig {
  std::optional<std::filesystem::path> csv;  // synthetic data when unset
  SyntheticSource synthetic;
  hybrid::GqcConfig gqc;
  gbdt::GbdtParams expert;
  gbdt::GbdtParams router = gbdt::GbdtParams::router_defaults();
  std::vector<double> gamma_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t folds = 5;
  std::size_t repeats = 3;
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "qmoe-out";

  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies the dataset environment override, then loads or synthesizes.
data::Dataset load_dataset(RunConfig& config);

/// Seconds per quantum task.
struct LatencyModel {
  double server_time_s = 0.17;
  double compile_time_s = 1.92;
  double exec_time_s = 0.649;

  double per_task() const { return server_time_s + compile_time_s + exec_time_s; }
  void validate() const;
};

/// One task per routed point, no batching.
double latency_estimate(double n_points, double routed_fraction,
                        const LatencyModel& model = LatencyModel{});

/// Raw-feature splits of one fold.
struct FoldSplits {
  data::Dataset train;
  data::Dataset validation;
  data::Dataset analysis;
};

struct FitDiagnostics {
  std::size_t train_rows = 0;
  std::size_t balanced_rows = 0;
  std::size_t router_positive_targets = 0;
  std::size_t gqc_epochs = 0;
  std::vector<std::string> warnings;
};

struct FittedCombined {
  moe::CombinedModel model;
  FitDiagnostics diagnostics;
};

/// scale (fit on train) -> undersample train -> fit both experts -> temperatures
/// and Youden thresholds on validation -> router targets and router on analysis.
FittedCombined fit_combined(const RunConfig& config, const FoldSplits& splits,
                            std::uint64_t seed);

/// Scores raw (unscaled) rows with the model's own scaler.
moe::ExpertScores score_raw(const moe::CombinedModel& model, const FeatureMatrix& raw);

struct Metrics {
  double aucpr = 0.0;
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_degenerate = false;
};

/// Ranking metrics of `probs` plus precision/recall of the hard labels.
Metrics evaluate(std::span<const double> probs, std::span<const int> predictions,
                 std::span<const int> labels);

struct GammaEntry {
  double gamma = 0.0;
  std::optional<Metrics> metrics;
  double routed_fraction = 0.0;
  double latency_s = 0.0;
};

struct FoldEntry {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_balanced = 0;
  std::size_t n_validation = 0;
  std::size_t n_analysis = 0;
  std::size_t n_holdout = 0;
  std::size_t holdout_positives = 0;
  std::size_t router_positive_targets = 0;
  double primary_threshold = 0.0;
  double secondary_threshold = 0.0;
  double primary_temperature = 1.0;
  double secondary_temperature = 1.0;
  double max_router_score = 0.0;
  bool flagged = false;
  std::vector<std::string> warnings;
  std::optional<Metrics> baseline;
  std::optional<Metrics> secondary;
  /// Mixture at gamma = max holdout router score, i.e. nothing routed.
  std::optional<Metrics> no_route;
  std::vector<GammaEntry> gammas;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1)
  double median = 0.0;
};

/// Ignores NaN entries; an empty sample gives n = 0 and NaN statistics.
Summary summarize(const std::vector<double>& values);

struct ModelAggregate {
  std::string name;
  double gamma = 0.0;  // 0 for the non-mixture rows
  Summary aucpr, ap, precision, recall, routed_fraction, latency_s;
};

struct BenchmarkReport {
  static constexpr int kSchemaVersion = 1;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::size_t dataset_rows = 0;
  std::size_t dataset_positives = 0;
  std::vector<FoldEntry> folds;
  std::vector<ModelAggregate> aggregates;
  std::vector<std::string> warnings;
};

using CurveSet = std::vector<std::pair<std::string, metrics::PRCurve>>;

/// Full repeated stratified CV. Folds are processed on OpenMP threads with
/// per-fold seeds, then assembled in (repeat, fold) order. Holdout PR curves
/// are appended to `curves` when given.
BenchmarkReport run_cv(const RunConfig& config, const data::Dataset& dataset,
                       CurveSet* curves = nullptr);

/// Recomputes aggregates from fold entries.
std::vector<ModelAggregate> aggregate(const std::vector<FoldEntry>& folds,
                                      const std::vector<double>& gamma_grid,
                                      const LatencyModel& latency = LatencyModel{});

nlohmann::json to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& j);
BenchmarkReport load_report(const std::filesystem::path& path);

/// report.json, folds.csv and curves/*.csv under `dir`.
void write_report(const BenchmarkReport& report, const std::filesystem::path& dir,
                  const CurveSet& curves = {});

/// FNV-1a over the canonical JSON text.
std::uint64_t report_hash(const BenchmarkReport& report);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const moe::CombinedModel& model);
moe::CombinedModel combined_from_json(const nlohmann::json& j);
void save_model(const moe::CombinedModel& model, const std::filesystem::path& path);
moe::CombinedModel load_model(const std::filesystem::path& path);

}  // namespace qmoe::bench

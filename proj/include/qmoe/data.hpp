#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qmoe/matrix.hpp"

namespace qmoe::data {

inline constexpr std::size_t kFeatureCount = 29;  // V1..V28, Amount

/// Feature names in column order: V1..V28, Amount.
std::vector<std::string> feature_names();

/// Generating mixture component of a synthetic row.
enum class Component : int { Nominal = 0, LinearFraud = 1, CurvedFraud = 2 };

struct Dataset {
  FeatureMatrix features;
  std::vector<int> labels;  // 1 = fraud
  std::vector<std::string> columns;
  /// Only filled by synthesize(); empty for ingested data.
  std::vector<Component> components;

  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

/// Parses the credit-card schema (Time, V1..V28, Amount, Class; RFC-4180
/// quoting). Column order may vary; extra columns are ignored; Time is dropped.
Dataset read_csv(std::istream& in, const std::string& source_name = "<stream>");
Dataset load_csv(const std::filesystem::path& path);

/// Writes the same schema; Time is the row index.
void write_csv(std::ostream& out, const Dataset& dataset);
void save_csv(const std::filesystem::path& path, const Dataset& dataset);

struct ScalerState {
  std::vector<double> min;
  std::vector<double> max;
  friend bool operator==(const ScalerState&, const ScalerState&) = default;
};

ScalerState minmax_fit(const FeatureMatrix& train);

/// (x - min) / (max - min) per column, clipped to [0, 1]; constant columns map to 0.
FeatureMatrix minmax_transform(const ScalerState& state, const FeatureMatrix& rows);

struct UndersampleResult {
  std::vector<std::size_t> indices;  // ascending
  bool minority_not_smaller = false;  // input returned unchanged
};

/// Keeps every positive row and an equal number of negatives drawn without
/// replacement. Positives are the minority in this domain; if they are not,
/// nothing is dropped and the flag is set.
UndersampleResult undersample_majority(std::span<const int> labels, std::uint64_t seed);
Dataset undersample_majority(const Dataset& dataset, std::uint64_t seed, bool* warning = nullptr);

struct TestSplit {
  std::vector<std::size_t> validation;
  std::vector<std::size_t> analysis;
  std::vector<std::size_t> holdout;
  /// A sub-split received no positive row.
  bool missing_positives = false;
};

/// 50/25/25 sizes from floor division with leftovers going to
/// validation, then analysis. Positives are allotted with the same rule and
/// negatives fill the rest; order within each sub-split is ascending.
TestSplit split_test(std::span<const std::size_t> test_indices, std::span<const int> labels,
                     std::uint64_t seed);

/// Sub-split sizes for n rows under the 50/25/25 rule.
std::array<std::size_t, 3> split_sizes(std::size_t n);

struct FoldPlan {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<std::size_t> train;
  TestSplit test;
};

/// k folds per repeat; each class is shuffled and dealt round-robin so fold
/// class counts differ by at most one.
std::vector<FoldPlan> stratified_repeated_kfold(std::span<const int> labels, std::size_t k,
                                                std::size_t repeats, std::uint64_t seed);

/// Synthetic imbalanced data in the credit-card shape. Nominal rows are
/// correlated Gaussians. Fraud rows are split between a component shifted by
/// +5 on V1..V3 (a linear cut separates it) and a component on a thin shell
/// over V11..V13 (no axis-aligned cut isolates it).
Dataset synthesize(std::size_t n_rows, double fraud_rate, std::uint64_t seed);

inline constexpr double kDefaultFraudRate = 0.00172;

}  // namespace qmoe::data

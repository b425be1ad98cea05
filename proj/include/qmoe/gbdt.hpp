#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qmoe/matrix.hpp"

namespace qmoe::gbdt {

struct GbdtParams {
  std::size_t n_estimators = 200;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  double l2 = 1.0;
  double min_split_gain = 0.0;
  double min_child_weight = 1.0;
  /// 0 disables early stopping.
  std::size_t early_stopping_rounds = 20;
  std::uint64_t seed = 0;

  /// Shallow settings used when the ensemble serves as the router.
  static GbdtParams router_defaults();
  void validate() const;
};

/// Internal nodes send x[feature] < threshold to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

/// prob(x) = sigmoid(base_score + learning_rate * sum_t tree_t(x))
struct GbdtModel {
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  /// Training labels were single-class; the model predicts its prior only.
  bool single_class = false;

  double raw_score(std::span<const double> row) const;
  friend bool operator==(const GbdtModel&, const GbdtModel&) = default;
};

struct ValidationSet {
  const FeatureMatrix& features;
  std::span<const int> labels;
};

/// Exact greedy second-order boosting on logistic loss. Ties in split gain go
/// to the lower feature index, then the lower threshold. With a validation set
/// and early_stopping_rounds > 0, the ensemble is truncated to the round with
/// the best validation logloss.
GbdtModel gbdt_fit(const GbdtParams& params, const FeatureMatrix& x, std::span<const int> y,
                   std::optional<ValidationSet> validation = std::nullopt);

/// Row-parallel (OpenMP) inference.
std::vector<double> gbdt_predict_proba(const GbdtModel& model, const FeatureMatrix& x);

/// Single-threaded reference for gbdt_predict_proba.
std::vector<double> gbdt_predict_proba_serial(const GbdtModel& model, const FeatureMatrix& x);

/// Mean logistic loss of probabilities against labels (probabilities clamped).
double logloss(std::span<const double> probs, std::span<const int> labels);

}  // namespace qmoe::gbdt

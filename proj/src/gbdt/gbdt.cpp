#include "qmoe/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "qmoe/error.hpp"
#include "qmoe/neural.hpp"

namespace qmoe::gbdt {
namespace {

struct Split {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
  bool valid() const { return feature >= 0; }
};

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const GbdtParams& params, const FeatureMatrix& x,
              const std::vector<std::vector<std::size_t>>& sorted,
              const std::vector<GradPair>& grads)
      : params_(params), x_(x), sorted_(sorted), grads_(grads), node_of_(x.rows(), 0) {}

  Tree build() {
    tree_.nodes.clear();
    std::vector<std::size_t> all(x_.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  double leaf_weight(double g, double h) const { return -g / (h + params_.l2); }
  double score(double g, double h) const { return g * g / (h + params_.l2); }

  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    GradPair total;
    for (std::size_t r : rows) {
      total.g += grads_[r].g;
      total.h += grads_[r].h;
    }
    Split split;
    if (depth < params_.max_depth && rows.size() >= 2) split = best_split(rows, id, total);
    if (!split.valid()) {
      tree_.nodes[static_cast<std::size_t>(id)].weight = leaf_weight(total.g, total.h);
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
      (x_(r, static_cast<std::size_t>(split.feature)) < split.threshold ? left : right).push_back(r);
    }
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Per-feature scans run in parallel; each writes its own slot and the
  // reduction walks features in index order, so tie-breaking is fixed.
  Split best_split(const std::vector<std::size_t>& rows, int id, const GradPair& total) {
    for (std::size_t r : rows) node_of_[r] = id;
    const auto n_features = static_cast<std::int64_t>(x_.cols());
    std::vector<Split> per_feature(x_.cols());
    const double parent = score(total.g, total.h);
#pragma omp parallel for schedule(dynamic) if (rows.size() * x_.cols() > 20000)
    for (std::int64_t f = 0; f < n_features; ++f) {
      const auto feat = static_cast<std::size_t>(f);
      Split best;
      GradPair left;
      double prev_value = 0.0;
      bool have_prev = false;
      for (std::size_t r : sorted_[feat]) {
        if (node_of_[r] != id) continue;
        const double v = x_(r, feat);
        if (have_prev && v != prev_value) {
          const double hr = total.h - left.h;
          if (left.h >= params_.min_child_weight && hr >= params_.min_child_weight) {
            const double gr = total.g - left.g;
            const double gain =
                0.5 * (score(left.g, left.h) + score(gr, hr) - parent) - params_.min_split_gain;
            if (gain > best.gain) {
              best.gain = gain;
              best.feature = static_cast<int>(feat);
              best.threshold = prev_value + 0.5 * (v - prev_value);
            }
          }
        }
        left.g += grads_[r].g;
        left.h += grads_[r].h;
        prev_value = v;
        have_prev = true;
      }
      per_feature[feat] = best;
    }
    Split best;
    for (const Split& s : per_feature) {
      if (s.valid() && s.gain >= 0.0 && s.gain > best.gain) best = s;
    }
    return best;
  }

  const GbdtParams& params_;
  const FeatureMatrix& x_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  const std::vector<GradPair>& grads_;
  std::vector<int> node_of_;
  Tree tree_;
};

double prior_log_odds(std::span<const int> y) {
  double pos = 0.0;
  for (int v : y) pos += v;
  const double p = std::clamp(pos / static_cast<double>(y.size()), neural::kProbClamp,
                              1.0 - neural::kProbClamp);
  return std::log(p / (1.0 - p));
}

void check_finite(const FeatureMatrix& x, const char* where) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw InputError(std::string(where) + ": non-finite feature value");
  }
}

void check_labels(std::span<const int> y) {
  for (int v : y) {
    if (v != 0 && v != 1) throw InputError("gbdt: labels must be 0 or 1");
  }
}

}  // namespace

GbdtParams GbdtParams::router_defaults() {
  GbdtParams p;
  p.max_depth = 3;
  p.n_estimators = 100;
  return p;
}

void GbdtParams::validate() const {
  if (n_estimators == 0) throw ConfigError("gbdt: n_estimators must be positive");
  if (max_depth == 0) throw ConfigError("gbdt: max_depth must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("gbdt: learning_rate must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("gbdt: l2 must be non-negative");
  if (!(min_split_gain >= 0.0)) throw ConfigError("gbdt: min_split_gain must be non-negative");
  if (!(min_child_weight >= 0.0)) throw ConfigError("gbdt: min_child_weight must be non-negative");
}

double Tree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[i].weight;
}

double GbdtModel::raw_score(std::span<const double> row) const {
  double s = 0.0;
  for (const Tree& t : trees) s += t.predict(row);
  return base_score + learning_rate * s;
}

double logloss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size() || probs.empty()) throw InputError("logloss: bad lengths");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], neural::kProbClamp, 1.0 - neural::kProbClamp);
    acc -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return acc / static_cast<double>(probs.size());
}

GbdtModel gbdt_fit(const GbdtParams& params, const FeatureMatrix& x, std::span<const int> y,
                   std::optional<ValidationSet> validation) {
  params.validate();
  if (x.rows() != y.size()) throw InputError("gbdt_fit: row/label count mismatch");
  if (x.rows() < 2) throw InputError("gbdt_fit: need at least two samples");
  check_labels(y);
  check_finite(x, "gbdt_fit");
  if (validation) {
    if (validation->features.rows() != validation->labels.size()) {
      throw InputError("gbdt_fit: validation row/label count mismatch");
    }
    if (validation->features.cols() != x.cols()) {
      throw InputError("gbdt_fit: validation feature count mismatch");
    }
    check_labels(validation->labels);
    check_finite(validation->features, "gbdt_fit");
  }

  GbdtModel model;
  model.learning_rate = params.learning_rate;
  model.n_features = x.cols();
  model.base_score = prior_log_odds(y);
  const auto positives = std::count(y.begin(), y.end(), 1);
  if (positives == 0 || static_cast<std::size_t>(positives) == y.size()) {
    model.single_class = true;
    return model;
  }

  std::vector<std::vector<std::size_t>> sorted(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& order = sorted[f];
    order.resize(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  }

  std::vector<double> raw(x.rows(), model.base_score);
  std::vector<double> val_raw;
  const bool early_stop = validation && params.early_stopping_rounds > 0;
  if (early_stop) val_raw.assign(validation->features.rows(), model.base_score);
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_rounds = 0;
  std::vector<GradPair> grads(x.rows());

  for (std::size_t round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double p = neural::sigmoid(raw[i]);
      grads[i] = {p - static_cast<double>(y[i]), p * (1.0 - p)};
    }
    Tree tree = TreeBuilder(params, x, sorted, grads).build();
    for (std::size_t i = 0; i < x.rows(); ++i) raw[i] += params.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));

    if (early_stop) {
      const Tree& t = model.trees.back();
      std::vector<double> probs(val_raw.size());
      for (std::size_t i = 0; i < val_raw.size(); ++i) {
        val_raw[i] += params.learning_rate * t.predict(validation->features.row(i));
        probs[i] = neural::sigmoid(val_raw[i]);
      }
      const double loss = logloss(probs, validation->labels);
      if (loss < best_val) {
        best_val = loss;
        best_rounds = model.trees.size();
      } else if (model.trees.size() - best_rounds >= params.early_stopping_rounds) {
        break;
      }
    }
  }
  if (early_stop) model.trees.resize(best_rounds);
  return model;
}

namespace {

void check_features(const GbdtModel& model, const FeatureMatrix& x) {
  if (!x.empty() && x.cols() != model.n_features) {
    throw InputError("gbdt_predict_proba: expected " + std::to_string(model.n_features) +
                     " features, got " + std::to_string(x.cols()));
  }
  check_finite(x, "gbdt_predict_proba");
}

}  // namespace

std::vector<double> gbdt_predict_proba(const GbdtModel& model, const FeatureMatrix& x) {
  check_features(model, x);
  std::vector<double> out(x.rows());
  const auto n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = neural::sigmoid(model.raw_score(x.row(r)));
  }
  return out;
}

std::vector<double> gbdt_predict_proba_serial(const GbdtModel& model, const FeatureMatrix& x) {
  check_features(model, x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = neural::sigmoid(model.raw_score(x.row(r)));
  return out;
}

}  // namespace qmoe::gbdt

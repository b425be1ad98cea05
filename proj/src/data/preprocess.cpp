#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "qmoe/data.hpp"
#include "qmoe/error.hpp"
#include "qmoe/rng.hpp"

namespace qmoe::data {

ScalerState minmax_fit(const FeatureMatrix& train) {
  if (train.rows() == 0) throw InputError("minmax_fit: need at least one training row");
  ScalerState s;
  s.min.assign(train.cols(), 0.0);
  s.max.assign(train.cols(), 0.0);
  for (std::size_t j = 0; j < train.cols(); ++j) {
    s.min[j] = s.max[j] = train(0, j);
  }
  for (std::size_t i = 1; i < train.rows(); ++i) {
    for (std::size_t j = 0; j < train.cols(); ++j) {
      s.min[j] = std::min(s.min[j], train(i, j));
      s.max[j] = std::max(s.max[j], train(i, j));
    }
  }
  return s;
}

FeatureMatrix minmax_transform(const ScalerState& state, const FeatureMatrix& rows) {
  if (!rows.empty() && rows.cols() != state.min.size()) {
    throw InputError("minmax_transform: column count mismatch");
  }
  FeatureMatrix out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double range = state.max[j] - state.min[j];
      double v = range > 0.0 ? (out(i, j) - state.min[j]) / range : 0.0;
      out(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

UndersampleResult undersample_majority(std::span<const int> labels, std::uint64_t seed) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw InputError("undersample_majority: both classes required");
  UndersampleResult r;
  if (pos.size() >= neg.size()) {
    r.minority_not_smaller = true;
    r.indices.resize(labels.size());
    std::iota(r.indices.begin(), r.indices.end(), std::size_t{0});
    return r;
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first pos.size() slots become the sample.
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const std::size_t j = i + rng.index(neg.size() - i);
    std::swap(neg[i], neg[j]);
  }
  r.indices = pos;
  r.indices.insert(r.indices.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(pos.size()));
  std::sort(r.indices.begin(), r.indices.end());
  return r;
}

Dataset undersample_majority(const Dataset& dataset, std::uint64_t seed, bool* warning) {
  const auto r = undersample_majority(dataset.labels, seed);
  if (warning) *warning = r.minority_not_smaller;
  return dataset.subset(r.indices);
}

std::array<std::size_t, 3> split_sizes(std::size_t n) {
  std::array<std::size_t, 3> s{n / 2, n / 4, n / 4};
  std::size_t residue = n - (s[0] + s[1] + s[2]);
  for (std::size_t k = 0; residue > 0; k = (k + 1) % 3, --residue) ++s[k];
  return s;
}

TestSplit split_test(std::span<const std::size_t> test_indices, std::span<const int> labels,
                     std::uint64_t seed) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i : test_indices) {
    if (i >= labels.size()) throw InputError("split_test: index out of range");
    (labels[i] == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) throw InputError("split_test: both classes required in test set");
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);

  const auto total = split_sizes(test_indices.size());
  const auto npos = split_sizes(pos.size());
  std::array<std::size_t, 3> nneg{};
  for (std::size_t k = 0; k < 3; ++k) {
    if (npos[k] > total[k]) throw InputError("split_test: positive allotment exceeds split size");
    nneg[k] = total[k] - npos[k];
  }

  TestSplit out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.validation, &out.analysis, &out.holdout};
  std::size_t p = 0;
  std::size_t q = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    auto& part = *parts[k];
    part.insert(part.end(), pos.begin() + static_cast<std::ptrdiff_t>(p),
                pos.begin() + static_cast<std::ptrdiff_t>(p + npos[k]));
    part.insert(part.end(), neg.begin() + static_cast<std::ptrdiff_t>(q),
                neg.begin() + static_cast<std::ptrdiff_t>(q + nneg[k]));
    p += npos[k];
    q += nneg[k];
    std::sort(part.begin(), part.end());
    if (npos[k] == 0) out.missing_positives = true;
  }
  return out;
}

std::vector<FoldPlan> stratified_repeated_kfold(std::span<const int> labels, std::size_t k,
                                                std::size_t repeats, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_repeated_kfold: need k >= 2");
  if (repeats == 0) throw ConfigError("stratified_repeated_kfold: need at least one repeat");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < k || neg.size() < k) {
    throw InputError("stratified_repeated_kfold: each class needs at least k = " +
                     std::to_string(k) + " rows (positives: " + std::to_string(pos.size()) +
                     ", negatives: " + std::to_string(neg.size()) + ")");
  }

  std::vector<FoldPlan> plans;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, r));
    auto p = pos;
    auto n = neg;
    rng.shuffle(p);
    rng.shuffle(n);
    std::vector<std::size_t> fold_of(labels.size());
    for (std::size_t i = 0; i < p.size(); ++i) fold_of[p[i]] = i % k;
    // Negatives continue the deal where positives stopped, balancing fold sizes.
    for (std::size_t i = 0; i < n.size(); ++i) fold_of[n[i]] = (p.size() + i) % k;
    for (std::size_t f = 0; f < k; ++f) {
      FoldPlan plan;
      plan.repeat = r;
      plan.fold = f;
      std::vector<std::size_t> test;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        (fold_of[i] == f ? test : plan.train).push_back(i);
      }
      plan.test = split_test(test, labels, derive_seed(seed, 1'000'003 + r * k + f));
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

Dataset synthesize(std::size_t n_rows, double fraud_rate, std::uint64_t seed) {
  if (n_rows < 1000) throw InputError("synthesize: need at least 1000 rows");
  if (!(fraud_rate > 0.0 && fraud_rate < 0.5)) {
    throw InputError("synthesize: fraud_rate must lie in (0, 0.5)");
  }
  constexpr std::size_t kV = 28;
  constexpr std::size_t kFactors = 4;
  Rng rng(seed);

  // Shared latent factors give the columns a fixed correlation structure.
  std::vector<double> loadings(kV * kFactors);
  for (double& l : loadings) l = 0.45 * rng.normal();
  const auto n_fraud = static_cast<std::size_t>(std::llround(static_cast<double>(n_rows) * fraud_rate));
  const std::size_t n_linear = (n_fraud + 1) / 2;
  std::vector<Component> kinds(n_rows, Component::Nominal);
  for (std::size_t i = 0; i < n_fraud; ++i) {
    kinds[i] = i < n_linear ? Component::LinearFraud : Component::CurvedFraud;
  }
  rng.shuffle(kinds);

  Dataset d;
  d.columns = feature_names();
  d.features = FeatureMatrix(n_rows, kFeatureCount);
  d.labels.resize(n_rows);
  d.components = kinds;
  std::vector<double> v(kV);
  for (std::size_t i = 0; i < n_rows; ++i) {
    double factors[kFactors];
    for (double& f : factors) f = rng.normal();
    for (std::size_t j = 0; j < kV; ++j) {
      double x = rng.normal();
      for (std::size_t f = 0; f < kFactors; ++f) x += loadings[j * kFactors + f] * factors[f];
      v[j] = x;
    }
    double amount = std::exp(3.5 + 1.1 * rng.normal());
    switch (kinds[i]) {
      case Component::Nominal: break;
      case Component::LinearFraud:
        for (std::size_t j = 0; j < 3; ++j) v[j] += 5.0;
        amount = std::exp(2.0 + 0.8 * rng.normal());
        break;
      case Component::CurvedFraud: {
        // Thin spherical shell over V11..V13.
        double u[3];
        double un = 0.0;
        for (double& c : u) {
          c = rng.normal();
          un += c * c;
        }
        const double radius = 3.0 + 0.08 * rng.normal();
        for (std::size_t c = 0; c < 3; ++c) v[10 + c] = radius * u[c] / std::sqrt(un);
        break;
      }
    }
    auto row = d.features.row(i);
    std::copy(v.begin(), v.end(), row.begin());
    row[kV] = amount;
    d.labels[i] = kinds[i] == Component::Nominal ? 0 : 1;
  }
  return d;
}

}  // namespace qmoe::data

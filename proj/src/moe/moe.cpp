#include "qmoe/moe.hpp"

#include <algorithm>
#include <string>

#include "qmoe/error.hpp"

namespace qmoe::moe {

OperatingPoint youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("youden_threshold: length mismatch");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("youden_threshold: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("youden_threshold: J needs both classes");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> candidates{0.0, 1.0};
  candidates.insert(candidates.end(), scores.begin(), scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Ascending sweep: `below` counts rows with score <= candidate.
  OperatingPoint best;
  bool have = false;
  std::size_t cursor = 0;
  std::size_t pos_below = 0;
  std::size_t neg_below = 0;
  for (double t : candidates) {
    while (cursor < order.size() && scores[order[cursor]] <= t) {
      (labels[order[cursor]] == 1 ? pos_below : neg_below)++;
      ++cursor;
    }
    const double tpr = static_cast<double>(n_pos - pos_below) / static_cast<double>(n_pos);
    const double fpr = static_cast<double>(n_neg - neg_below) / static_cast<double>(n_neg);
    const double j = tpr - fpr;
    if (!have || j > best.j) {
      best = {t, j, tpr, fpr};
      have = true;
    }
  }
  return best;
}

std::vector<int> hard_predictions(std::span<const double> probs, double threshold) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > threshold ? 1 : 0;
  return out;
}

std::vector<int> build_router_targets(std::span<const double> primary_probs,
                                      std::span<const double> secondary_probs,
                                      std::span<const int> labels, double primary_threshold,
                                      double secondary_threshold) {
  if (primary_probs.size() != labels.size() || secondary_probs.size() != labels.size()) {
    throw InputError("build_router_targets: length mismatch");
  }
  const auto y1 = hard_predictions(primary_probs, primary_threshold);
  const auto y2 = hard_predictions(secondary_probs, secondary_threshold);
  std::vector<int> z(labels.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = (y2[i] == labels[i] && y1[i] != labels[i]) ? 1 : 0;
  }
  return z;
}

gbdt::GbdtModel fit_router(const FeatureMatrix& x, std::span<const int> targets,
                           const gbdt::GbdtParams& params) {
  if (x.rows() != targets.size()) throw InputError("fit_router: row/target count mismatch");
  // gbdt_fit turns single-class targets into a prior-only model; for all-zero
  // targets that prior is clamped at 1e-7, far below any admissible gamma.
  return gbdt::gbdt_fit(params, x, targets);
}

std::vector<double> CalibratedExpert::predict_raw(const FeatureMatrix& x) const {
  return std::visit(
      [&x](const auto& m) -> std::vector<double> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, gbdt::GbdtModel>) {
          return gbdt::gbdt_predict_proba(m, x);
        } else {
          return hybrid::predict_proba(m, x);
        }
      },
      model);
}

std::vector<double> CalibratedExpert::predict(const FeatureMatrix& x) const {
  return calibration::apply_temperature(temperature, predict_raw(x));
}

ExpertScores score(const CombinedModel& model, const FeatureMatrix& x) {
  return {model.primary.predict(x), model.secondary.predict(x),
          gbdt::gbdt_predict_proba(model.router, x)};
}

void validate_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("router threshold gamma must lie in (0, 1), got " + std::to_string(gamma));
  }
}

CombinedPrediction combine(const ExpertScores& scores, double gamma) {
  const std::size_t n = scores.router.size();
  if (scores.primary.size() != n || scores.secondary.size() != n) {
    throw InputError("combine: score vectors differ in length");
  }
  CombinedPrediction out;
  out.probs.resize(n);
  out.routed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.routed[i] = scores.router[i] > gamma ? 1 : 0;
    out.probs[i] = out.routed[i] ? scores.secondary[i] : scores.primary[i];
  }
  return out;
}

CombinedPrediction combined_predict(const CombinedModel& model, const FeatureMatrix& x,
                                    double gamma) {
  return combine(score(model, x), gamma);
}

std::vector<int> combined_hard_predictions(const ExpertScores& scores,
                                           const CombinedPrediction& mixed,
                                           double primary_threshold, double secondary_threshold) {
  std::vector<int> out(mixed.probs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mixed.routed[i] ? (scores.secondary[i] > secondary_threshold ? 1 : 0)
                             : (scores.primary[i] > primary_threshold ? 1 : 0);
  }
  return out;
}

double routed_fraction(std::span<const int> mask) {
  if (mask.empty()) throw InputError("routed_fraction: empty input");
  std::size_t n = 0;
  for (int r : mask) n += static_cast<std::size_t>(r != 0);
  return static_cast<double>(n) / static_cast<double>(mask.size());
}

double routed_fraction(const CombinedModel& model, const FeatureMatrix& x, double gamma) {
  if (x.rows() == 0) throw InputError("routed_fraction: empty input");
  const auto router = gbdt::gbdt_predict_proba(model.router, x);
  std::vector<int> mask(router.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = router[i] > gamma ? 1 : 0;
  return routed_fraction(mask);
}

}  // namespace qmoe::moe

#include "qmoe/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "qmoe/error.hpp"

namespace qmoe::metrics {
namespace {

struct SweepPoint {
  double threshold;
  std::size_t tp;
  std::size_t fp;
};

void check_aligned(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("metrics: scores/labels length mismatch");
}

std::size_t count_positives(std::span<const int> labels) {
  std::size_t n = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("metrics: labels must be 0 or 1");
    n += static_cast<std::size_t>(y);
  }
  return n;
}

// One entry per distinct score, descending, with cumulative counts.
std::vector<SweepPoint> sweep(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<SweepPoint> points;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t r = order[i];
    if (labels[r] == 1) ++tp; else ++fp;
    const bool last_of_tie = i + 1 == order.size() || scores[order[i + 1]] != scores[r];
    if (last_of_tie) points.push_back({scores[r], tp, fp});
  }
  return points;
}

std::size_t require_both_classes(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores, labels);
  const std::size_t pos = count_positives(labels);
  if (pos == 0 || pos == labels.size()) {
    throw InputError("metrics: both classes must be present");
  }
  return pos;
}

}  // namespace

PRCurve pr_curve(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n_pos = require_both_classes(scores, labels);
  PRCurve c;
  std::size_t last_tp = 0;
  for (const auto& p : sweep(scores, labels)) {
    if (p.tp == last_tp) continue;
    last_tp = p.tp;
    c.recall.push_back(static_cast<double>(p.tp) / static_cast<double>(n_pos));
    c.precision.push_back(static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp));
    c.thresholds.push_back(p.threshold);
  }
  return c;
}

double auprc_trapezoid(const PRCurve& curve) {
  double area = 0.0;
  double prev_r = 0.0;
  double prev_p = 1.0;
  for (std::size_t i = 0; i < curve.recall.size(); ++i) {
    area += (curve.recall[i] - prev_r) * 0.5 * (curve.precision[i] + prev_p);
    prev_r = curve.recall[i];
    prev_p = curve.precision[i];
  }
  return area;
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n_pos = require_both_classes(scores, labels);
  double ap = 0.0;
  std::size_t prev_tp = 0;
  for (const auto& p : sweep(scores, labels)) {
    const double delta_r =
        static_cast<double>(p.tp - prev_tp) / static_cast<double>(n_pos);
    ap += delta_r * static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
    prev_tp = p.tp;
  }
  return ap;
}

ThresholdMetrics precision_recall_of(std::span<const int> predictions,
                                     std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw InputError("metrics: predictions/labels length mismatch");
  }
  ThresholdMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] != 0;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++m.counts.tp;
    else if (pred) ++m.counts.fp;
    else if (pos) ++m.counts.fn;
    else ++m.counts.tn;
  }
  const std::size_t predicted = m.counts.tp + m.counts.fp;
  const std::size_t actual = m.counts.tp + m.counts.fn;
  m.no_predicted_positives = predicted == 0;
  m.no_actual_positives = actual == 0;
  m.precision = predicted ? static_cast<double>(m.counts.tp) / static_cast<double>(predicted) : 0.0;
  m.recall = actual ? static_cast<double>(m.counts.tp) / static_cast<double>(actual) : 0.0;
  return m;
}

ThresholdMetrics precision_recall_at(std::span<const double> scores, std::span<const int> labels,
                                     double threshold) {
  check_aligned(scores, labels);
  count_positives(labels);
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > threshold ? 1 : 0;
  return precision_recall_of(pred, labels);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n_pos = require_both_classes(scores, labels);
  const std::size_t n_neg = labels.size() - n_pos;
  RocCurve c;
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  for (const auto& p : sweep(scores, labels)) {
    c.fpr.push_back(static_cast<double>(p.fp) / static_cast<double>(n_neg));
    c.tpr.push_back(static_cast<double>(p.tp) / static_cast<double>(n_pos));
    c.thresholds.push_back(p.threshold);
  }
  return c;
}

void write_pr_curve_csv(std::ostream& out, const PRCurve& curve) {
  out << "threshold,precision,recall\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < curve.recall.size(); ++i) {
    out << curve.thresholds[i] << ',' << curve.precision[i] << ',' << curve.recall[i] << '\n';
  }
}

}  // namespace qmoe::metrics

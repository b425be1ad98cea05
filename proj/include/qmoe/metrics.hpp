#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace qmoe::metrics {

/// Precision-recall points sorted by ascending recall. Thresholds are swept
/// from the highest score down with all tied scores flipping together; one
/// point is kept for each achieved recall (the first, i.e. highest-precision,
/// threshold reaching it). A sample is positive iff score >= threshold.
struct PRCurve {
  std::vector<double> recall;
  std::vector<double> precision;
  std::vector<double> thresholds;
};

PRCurve pr_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under the curve over recall, anchored at (0, 1).
double auprc_trapezoid(const PRCurve& curve);

/// Step-wise sum of (R_n - R_{n-1}) * P_n over the descending-score sweep.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct ThresholdMetrics {
  double precision = 0.0;
  double recall = 0.0;
  ConfusionCounts counts;
  bool no_predicted_positives = false;  // precision reported as 0
  bool no_actual_positives = false;     // recall undefined, reported as 0
};

/// Positive iff score > threshold.
ThresholdMetrics precision_recall_at(std::span<const double> scores, std::span<const int> labels,
                                     double threshold);

/// Hard predictions (already thresholded) against labels.
ThresholdMetrics precision_recall_of(std::span<const int> predictions,
                                     std::span<const int> labels);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<double> thresholds;
};

/// ROC over distinct scores, starting at (0, 0); positive iff score >= threshold.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

/// CSV with header `threshold,precision,recall`.
void write_pr_curve_csv(std::ostream& out, const PRCurve& curve);

}  // namespace qmoe::metrics

#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "qmoe/calibration.hpp"
#include "qmoe/data.hpp"
#include "qmoe/gbdt.hpp"
#include "qmoe/hybrid.hpp"
#include "qmoe/matrix.hpp"

namespace qmoe::moe {

struct OperatingPoint {
  double threshold = 0.5;
  double j = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Maximizes TPR - FPR over candidate thresholds {0, 1} plus every observed
/// score, predicting positive iff score > threshold. Ties go to the smallest
/// threshold.
OperatingPoint youden_threshold(std::span<const double> scores, std::span<const int> labels);

std::vector<int> hard_predictions(std::span<const double> probs, double threshold);

/// z_i = 1 iff the secondary hard prediction is right and the primary's wrong.
std::vector<int> build_router_targets(std::span<const double> primary_probs,
                                      std::span<const double> secondary_probs,
                                      std::span<const int> labels, double primary_threshold,
                                      double secondary_threshold);

/// Router fitted on (x, targets); all-zero targets give a prior-only model
/// that routes nothing.
gbdt::GbdtModel fit_router(const FeatureMatrix& x, std::span<const int> targets,
                           const gbdt::GbdtParams& params = gbdt::GbdtParams::router_defaults());

/// Either expert family.
using ExpertModel = std::variant<gbdt::GbdtModel, hybrid::GqcModel>;

struct CalibratedExpert {
  ExpertModel model;
  calibration::TemperatureScaler temperature;

  std::vector<double> predict_raw(const FeatureMatrix& x) const;
  std::vector<double> predict(const FeatureMatrix& x) const;
};

/// Expects features already MinMax scaled with `scaler`.
struct CombinedModel {
  data::ScalerState scaler;
  CalibratedExpert primary;
  CalibratedExpert secondary;
  gbdt::GbdtModel router;
  double primary_threshold = 0.5;
  double secondary_threshold = 0.5;
  std::vector<double> gamma_grid{0.5, 0.6, 0.7, 0.8, 0.9};
};

/// Calibrated expert probabilities and router scores of a batch; reusable
/// across router thresholds.
struct ExpertScores {
  std::vector<double> primary;
  std::vector<double> secondary;
  std::vector<double> router;
};

ExpertScores score(const CombinedModel& model, const FeatureMatrix& x);

struct CombinedPrediction {
  std::vector<double> probs;
  std::vector<int> routed;  // r(x) = 1{g(x) > gamma}
};

CombinedPrediction combine(const ExpertScores& scores, double gamma);
CombinedPrediction combined_predict(const CombinedModel& model, const FeatureMatrix& x,
                                    double gamma);

/// Hard labels of the mixture at the experts' own operating thresholds.
std::vector<int> combined_hard_predictions(const ExpertScores& scores,
                                           const CombinedPrediction& mixed,
                                           double primary_threshold, double secondary_threshold);

double routed_fraction(std::span<const int> mask);
double routed_fraction(const CombinedModel& model, const FeatureMatrix& x, double gamma);

void validate_gamma(double gamma);

}  // namespace qmoe::moe

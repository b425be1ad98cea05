#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace qmoe::calibration {

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;

/// Binary temperature scaling: p -> sigmoid(logit(p) / t).
struct TemperatureScaler {
  double temperature = 1.0;
  double final_nll = 0.0;
  std::size_t iterations = 0;
  /// Set when the fitting labels contained a single class; temperature is 1.
  bool single_class = false;
};

/// Mean negative log-likelihood of labels under the temperature-scaled probabilities.
double temperature_nll(std::span<const double> probs, std::span<const int> labels,
                       double temperature);

/// Golden-section search over log t in [0.05, 20] (tolerance 1e-5 in log t).
TemperatureScaler fit_temperature(std::span<const double> probs, std::span<const int> labels);

double apply_temperature(double temperature, double prob);
std::vector<double> apply_temperature(const TemperatureScaler& scaler,
                                      std::span<const double> probs);

double logit(double p);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;  // NaN for empty bins
  double observed_rate = 0.0;    // NaN for empty bins
};

/// Equal-width bins over [0, 1]; p = 1 falls in the last bin.
std::vector<ReliabilityBin> reliability_bins(std::span<const double> probs,
                                             std::span<const int> labels, std::size_t n_bins = 10);

/// CSV with header `lower,upper,count,mean_confidence,observed_rate`.
void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityBin>& bins);

}  // namespace qmoe::calibration

#include "qmoe/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "qmoe/error.hpp"
#include "qmoe/neural.hpp"

namespace qmoe::calibration {
namespace {

constexpr double kLogTolerance = 1e-5;

double clamp_prob(double p) {
  return std::clamp(p, neural::kProbClamp, 1.0 - neural::kProbClamp);
}

}  // namespace

double logit(double p) {
  const double q = clamp_prob(p);
  return std::log(q / (1.0 - q));
}

double apply_temperature(double temperature, double prob) {
  // Keep the result inside the open interval when the scaled logit saturates.
  static const double kUpper = std::nextafter(1.0, 0.0);
  return std::clamp(neural::sigmoid(logit(prob) / temperature),
                    std::numeric_limits<double>::min(), kUpper);
}

std::vector<double> apply_temperature(const TemperatureScaler& scaler,
                                      std::span<const double> probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = apply_temperature(scaler.temperature, probs[i]);
  }
  return out;
}

double temperature_nll(std::span<const double> probs, std::span<const int> labels,
                       double temperature) {
  if (probs.size() != labels.size()) throw InputError("temperature: length mismatch");
  if (probs.empty()) throw InputError("temperature: empty input");
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double q = apply_temperature(temperature, probs[i]);
    acc -= labels[i] == 1 ? std::log(q) : std::log(1.0 - q);
  }
  return acc / static_cast<double>(probs.size());
}

TemperatureScaler fit_temperature(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw InputError("fit_temperature: length mismatch");
  if (probs.size() < 2) throw InputError("fit_temperature: need at least two samples");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("fit_temperature: labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  TemperatureScaler s;
  if (positives == 0 || positives == labels.size()) {
    s.single_class = true;
    s.final_nll = temperature_nll(probs, labels, 1.0);
    return s;
  }

  auto f = [&](double log_t) { return temperature_nll(probs, labels, std::exp(log_t)); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(kMinTemperature);
  double b = std::log(kMaxTemperature);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > kLogTolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++s.iterations;
  }
  double best_log_t = 0.5 * (a + b);
  double best = f(best_log_t);
  // The search assumes unimodality; t = 1 stays a candidate so the fit never
  // does worse than leaving the model untouched.
  if (const double at_one = f(0.0); at_one < best) {
    best = at_one;
    best_log_t = 0.0;
  }
  s.temperature = std::clamp(std::exp(best_log_t), kMinTemperature, kMaxTemperature);
  s.final_nll = best;
  return s;
}

std::vector<ReliabilityBin> reliability_bins(std::span<const double> probs,
                                             std::span<const int> labels, std::size_t n_bins) {
  if (probs.size() != labels.size()) throw InputError("reliability_bins: length mismatch");
  if (n_bins == 0) throw InputError("reliability_bins: need at least one bin");
  std::vector<ReliabilityBin> bins(n_bins);
  std::vector<double> conf(n_bins, 0.0), hits(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("reliability_bins: probabilities must lie in [0, 1]");
    const auto b = std::min(n_bins - 1, static_cast<std::size_t>(p * static_cast<double>(n_bins)));
    ++bins[b].count;
    conf[b] += p;
    hits[b] += labels[i];
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double n = static_cast<double>(bins[b].count);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    bins[b].mean_confidence = bins[b].count ? conf[b] / n : nan;
    bins[b].observed_rate = bins[b].count ? hits[b] / n : nan;
  }
  return bins;
}

void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityBin>& bins) {
  out << "lower,upper,count,mean_confidence,observed_rate\n";
  const auto old = out.precision(17);
  for (const auto& b : bins) {
    out << b.lower << ',' << b.upper << ',' << b.count << ',';
    if (b.count) out << b.mean_confidence << ',' << b.observed_rate;
    else out << ',';
    out << '\n';
  }
  out.precision(old);
}

}  // namespace qmoe::calibration

#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "qmoe/calibration.hpp"
#include "qmoe/error.hpp"
#include "qmoe/metrics.hpp"
#include "qmoe/rng.hpp"

using namespace qmoe;
using namespace qmoe::calibration;

TEST_CASE("apply temperature closed forms") {
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) {
    CHECK(std::abs(apply_temperature(1.0, p) - p) < 1e-12);
  }
  for (double t : {0.05, 0.3, 2.0, 20.0}) CHECK(apply_temperature(t, 0.5) == 0.5);
  const double want = 1.0 / (1.0 + std::exp(-std::log(9.0) / 2.0));
  CHECK(apply_temperature(2.0, 0.9) == doctest::Approx(want).epsilon(1e-12));
  CHECK(std::abs(apply_temperature(2.0, 0.9) - 0.75) < 1e-12);  // sigmoid(ln 3)
}

TEST_CASE("apply temperature is strictly monotone and stays in (0, 1)") {
  Rng rng(1);
  for (double t : {0.05, 0.4, 1.0, 3.0, 20.0}) {
    std::vector<double> p(200);
    for (double& v : p) v = rng.uniform(1e-6, 1 - 1e-6);
    std::sort(p.begin(), p.end());
    double prev = -1;
    for (double v : p) {
      const double q = apply_temperature(t, v);
      CHECK(q > 0.0);
      CHECK(q < 1.0);
      if (t >= 0.4) CHECK(q > prev);
      prev = q;
    }
  }
  CHECK(apply_temperature(0.05, 1.0) < 1.0);
  CHECK(apply_temperature(0.05, 0.0) > 0.0);
}

TEST_CASE("calibrated probabilities fit t near 1") {
  Rng rng(2);
  std::vector<double> p(20000);
  std::vector<int> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(0.02, 0.98);
    y[i] = rng.uniform() < p[i] ? 1 : 0;
  }
  const auto s = fit_temperature(p, y);
  CHECK(std::abs(s.temperature - 1.0) < 0.1);
  CHECK_FALSE(s.single_class);
}

TEST_CASE("overconfident probabilities fit t above 1") {
  Rng rng(3);
  std::vector<double> p(5000);
  std::vector<int> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool high = i % 2 == 0;
    p[i] = high ? 0.99 : 0.01;
    y[i] = rng.uniform() < (high ? 0.6 : 0.4) ? 1 : 0;
  }
  const auto s = fit_temperature(p, y);
  CHECK(s.temperature > 1.0);
  // A coarse grid scan agrees on where the minimum lies.
  double best_t = 0, best = 1e300;
  for (double lt = std::log(kMinTemperature); lt <= std::log(kMaxTemperature); lt += 0.01) {
    const double v = temperature_nll(p, y, std::exp(lt));
    if (v < best) {
      best = v;
      best_t = std::exp(lt);
    }
  }
  CHECK(std::abs(std::log(s.temperature) - std::log(best_t)) < 0.02);
  CHECK(s.final_nll <= best + 1e-12);
}

TEST_CASE("fit never does worse than t = 1 and stays in bounds") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> p(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      p[i] = rng.uniform(1e-4, 1 - 1e-4);
      y[i] = static_cast<int>(rng.index(2));
    }
    y[0] = 0;
    y[1] = 1;
    const auto s = fit_temperature(p, y);
    CHECK(s.final_nll <= temperature_nll(p, y, 1.0));
    CHECK(s.temperature >= kMinTemperature);
    CHECK(s.temperature <= kMaxTemperature);
    for (double q : apply_temperature(s, p)) {
      CHECK(q > 0.0);
      CHECK(q < 1.0);
    }
  }
}

TEST_CASE("single-class labels give t = 1 with the flag set") {
  const std::vector<double> p{0.2, 0.9, 0.6};
  const auto s = fit_temperature(p, std::vector<int>{1, 1, 1});
  CHECK(s.temperature == 1.0);
  CHECK(s.single_class);
  CHECK(fit_temperature(p, std::vector<int>{0, 0, 0}).single_class);
  CHECK_THROWS_AS(fit_temperature(std::vector<double>{0.5}, std::vector<int>{1}), InputError);
  CHECK_THROWS_AS(fit_temperature(p, std::vector<int>{1, 0}), InputError);
  CHECK_THROWS_AS(fit_temperature(p, std::vector<int>{1, 0, 2}), InputError);
}

TEST_CASE("ranking metrics are invariant under temperature") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(300);
    std::vector<int> y(300);
    for (std::size_t i = 0; i < 300; ++i) {
      y[i] = rng.uniform() < 0.2 ? 1 : 0;
      p[i] = std::clamp(0.3 * y[i] + rng.uniform(0.0, 0.7), 1e-6, 1 - 1e-6);
    }
    y[0] = 1;
    y[1] = 0;
    const double ap = metrics::average_precision(p, y);
    const double auc = metrics::auprc_trapezoid(metrics::pr_curve(p, y));
    for (double t : {0.2, 0.5, 1.7, 6.0, fit_temperature(p, y).temperature}) {
      TemperatureScaler s;
      s.temperature = t;
      const auto q = apply_temperature(s, p);
      CHECK(std::abs(metrics::average_precision(q, y) - ap) < 1e-12);
      CHECK(std::abs(metrics::auprc_trapezoid(metrics::pr_curve(q, y)) - auc) < 1e-12);
    }
  }
}

TEST_CASE("reliability bins") {
  const std::vector<double> p{0.05, 0.15, 0.12, 0.95, 1.0};
  const std::vector<int> y{0, 1, 0, 1, 1};
  const auto bins = reliability_bins(p, y, 10);
  REQUIRE(bins.size() == 10);
  CHECK(bins[0].count == 1);
  CHECK(bins[1].count == 2);
  CHECK(bins[1].observed_rate == 0.5);
  CHECK(bins[1].mean_confidence == doctest::Approx(0.135));
  CHECK(bins[9].count == 2);
  CHECK(std::isnan(bins[5].mean_confidence));
  std::ostringstream out;
  write_reliability_csv(out, bins);
  CHECK(out.str().rfind("lower,upper,count,mean_confidence,observed_rate\n", 0) == 0);
  CHECK_THROWS_AS(reliability_bins(p, y, 0), InputError);
}

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "qmoe/bench.hpp"
#include "qmoe/error.hpp"

using namespace qmoe;
using namespace qmoe::bench;
using nlohmann::json;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.synthetic.n_rows = 20000;
  c.gqc.encoder_hidden = {8};
  c.gqc.n_qubits = 3;
  c.gqc.n_layers = 2;
  c.gqc.epochs = 5;
  c.gqc.batch_size = 16;
  c.gqc.learning_rate = 1e-2;
  c.expert.n_estimators = 30;
  c.router.n_estimators = 20;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("qmoe_test_bench_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct CvRun {
  BenchmarkReport report;
  CurveSet curves;
};

const CvRun& shared_run() {
  static const CvRun run = [] {
    CvRun r;
    auto config = tiny_config();
    const auto dataset = load_dataset(config);
    r.report = run_cv(config, dataset, &r.curves);
    return r;
  }();
  return run;
}

FoldSplits fold_splits(const data::Dataset& d, std::uint64_t seed) {
  const auto plans = data::stratified_repeated_kfold(d.labels, 5, 1, seed);
  const auto& p = plans.front();
  return {d.subset(p.train), d.subset(p.test.validation), d.subset(p.test.analysis)};
}

}  // namespace

TEST_CASE("config defaults and json round trip") {
  const RunConfig c;
  CHECK(c.gamma_grid == std::vector<double>{0.5, 0.6, 0.7, 0.8, 0.9});
  CHECK(c.folds == 5);
  CHECK(c.repeats == 3);
  CHECK(c.gqc.n_qubits == 6);
  CHECK(c.gqc.n_layers == 6);
  const auto back = run_config_from_json(to_json(tiny_config()));
  CHECK(to_json(back) == to_json(tiny_config()));

  const auto partial = run_config_from_json(json::parse(R"({"folds": 3, "gqc": {"epochs": 2}})"));
  CHECK(partial.folds == 3);
  CHECK(partial.gqc.epochs == 2);
  CHECK(partial.gqc.n_qubits == 6);
  CHECK(partial.repeats == 3);
}

TEST_CASE("config rejects invalid input") {
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"fold": 3})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"gqc": {"qubits": 3}})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"gamma_grid": [0.5, 0.5]})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"gamma_grid": [0.7, 0.6]})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"gamma_grid": [0.0, 0.5]})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"gamma_grid": [0.5, 1.0]})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"folds": "five"})")), ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json(json::parse(R"({"data": {"csv": "a.csv", "synthetic": {}}})")),
      ConfigError);
  const auto dir = scratch_dir("badcfg");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "absent.json"), ConfigError);
}

TEST_CASE("dataset override from the environment") {
  const auto dir = scratch_dir("env");
  const auto small = data::synthesize(1200, 0.01, 3);
  data::save_csv(dir / "d.csv", small);
  RunConfig c;
  ::setenv(kDatasetEnv, (dir / "d.csv").c_str(), 1);
  const auto loaded = load_dataset(c);
  ::unsetenv(kDatasetEnv);
  REQUIRE(c.csv.has_value());
  CHECK(loaded.size() == 1200);
  CHECK(loaded.positives() == small.positives());

  RunConfig synth;
  synth.synthetic.n_rows = 1500;
  CHECK(load_dataset(synth).size() == 1500);
}

TEST_CASE("latency estimates") {
  const LatencyModel m;
  CHECK(m.per_task() == doctest::Approx(2.739).epsilon(1e-15));
  CHECK(latency_estimate(14000, 1.0) == doctest::Approx(38346.0).epsilon(1e-12));
  CHECK(latency_estimate(14000, 0.03) == doctest::Approx(1150.38).epsilon(1e-12));
  CHECK(latency_estimate(14000, 0.01) == doctest::Approx(383.46).epsilon(1e-12));
  CHECK(latency_estimate(0, 0.5) == 0.0);
  CHECK(latency_estimate(14000, 0.0) == 0.0);

  for (double n : {10.0, 500.0, 14000.0}) {
    for (double f : {0.01, 0.2, 0.5}) {
      CHECK(latency_estimate(2 * n, f) == doctest::Approx(2 * latency_estimate(n, f)));
      CHECK(latency_estimate(n, 2 * f) == doctest::Approx(2 * latency_estimate(n, f)));
    }
  }
  CHECK_THROWS_AS(latency_estimate(10, 1.5), InputError);
  CHECK_THROWS_AS(latency_estimate(10, -0.1), InputError);
  CHECK_THROWS_AS(latency_estimate(-1, 0.5), InputError);
  LatencyModel bad;
  bad.compile_time_s = -1;
  CHECK_THROWS_AS(latency_estimate(10, 0.5, bad), ConfigError);
}

TEST_CASE("summary statistics") {
  const auto s = summarize({1.0, 2.0, 4.0, 7.0});
  CHECK(s.n == 4);
  CHECK(s.mean == 3.5);
  CHECK(s.median == 3.0);
  CHECK(s.std == doctest::Approx(std::sqrt(7.0)).epsilon(1e-14));

  const auto odd = summarize({5.0, 1.0, 3.0});
  CHECK(odd.median == 3.0);
  CHECK(odd.std == 2.0);

  const auto one = summarize({0.25});
  CHECK(one.std == 0.0);
  CHECK(one.median == 0.25);

  const auto with_nan = summarize({1.0, std::numeric_limits<double>::quiet_NaN(), 3.0});
  CHECK(with_nan.n == 2);
  CHECK(with_nan.mean == 2.0);

  const auto empty = summarize({});
  CHECK(empty.n == 0);
  CHECK(std::isnan(empty.mean));
  CHECK(std::isnan(empty.median));
}

TEST_CASE("model persistence round trip") {
  auto config = tiny_config();
  config.synthetic.n_rows = 4000;
  config.synthetic.fraud_rate = 0.02;
  const auto data = load_dataset(config);
  const auto fitted = fit_combined(config, fold_splits(data, 5), 17);
  const auto dir = scratch_dir("model");
  save_model(fitted.model, dir / "m.json");
  const auto loaded = load_model(dir / "m.json");

  const auto a = score_raw(fitted.model, data.features);
  const auto b = score_raw(loaded, data.features);
  CHECK(a.primary == b.primary);
  CHECK(a.secondary == b.secondary);
  CHECK(a.router == b.router);
  CHECK(loaded.primary_threshold == fitted.model.primary_threshold);
  CHECK(loaded.secondary_threshold == fitted.model.secondary_threshold);
  CHECK(to_json(loaded) == to_json(fitted.model));

  SUBCASE("truncated file") {
    std::ifstream in(dir / "m.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    std::ofstream(dir / "cut.json") << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_model(dir / "cut.json"), FormatError);
  }
  SUBCASE("version mismatch") {
    auto j = to_json(fitted.model);
    j["version"] = kModelFormatVersion + 1;
    CHECK_THROWS_AS(combined_from_json(j), FormatError);
  }
  SUBCASE("wrong container") {
    CHECK_THROWS_AS(combined_from_json(json::parse(R"({"format": "other", "version": 1})")),
                    FormatError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), FormatError);
  }
}

TEST_CASE("cross validation smoke run") {
  const auto& run = shared_run();
  const auto& r = run.report;
  const auto config = tiny_config();
  REQUIRE(r.folds.size() == 15);
  CHECK(r.dataset_rows == 20000);
  for (const auto& f : r.folds) {
    REQUIRE(f.gammas.size() == config.gamma_grid.size());
    REQUIRE(f.baseline.has_value());
    REQUIRE(f.no_route.has_value());
    CHECK(std::isfinite(f.baseline->ap));
    CHECK(std::isfinite(f.baseline->aucpr));
    CHECK(f.no_route->ap == f.baseline->ap);
    CHECK(f.no_route->aucpr == f.baseline->aucpr);
    CHECK(f.n_validation + f.n_analysis + f.n_holdout + f.n_train == 20000);
    double prev = 1.0;
    for (std::size_t g = 0; g < f.gammas.size(); ++g) {
      const auto& e = f.gammas[g];
      CHECK(e.gamma == config.gamma_grid[g]);
      REQUIRE(e.metrics.has_value());
      CHECK(std::isfinite(e.metrics->ap));
      CHECK(std::isfinite(e.metrics->aucpr));
      CHECK(e.routed_fraction <= prev);
      prev = e.routed_fraction;
      CHECK(e.latency_s == doctest::Approx(latency_estimate(static_cast<double>(f.n_holdout),
                                                            e.routed_fraction)));
    }
  }
  // two model rows plus one per gamma
  CHECK(r.aggregates.size() == 2 + config.gamma_grid.size());
  CHECK(r.aggregates[0].name == "gbdt-baseline");
  CHECK(r.aggregates[1].name == "gqc-secondary");
  for (std::size_t g = 0; g < config.gamma_grid.size(); ++g) {
    CHECK(r.aggregates[2 + g].name == "combined");
    CHECK(r.aggregates[2 + g].ap.n == 15);
  }
  CHECK(run.curves.size() == 15 * (2 + config.gamma_grid.size()));
}

TEST_CASE("aggregates are recomputable from fold entries") {
  const auto& r = shared_run().report;
  std::vector<double> base_ap;
  for (const auto& f : r.folds) base_ap.push_back(f.baseline->ap);
  const auto s = summarize(base_ap);
  CHECK(std::abs(r.aggregates[0].ap.mean - s.mean) <= 1e-12);
  CHECK(std::abs(r.aggregates[0].ap.std - s.std) <= 1e-12);
  CHECK(std::abs(r.aggregates[0].ap.median - s.median) <= 1e-12);

  const auto again = aggregate(r.folds, tiny_config().gamma_grid);
  REQUIRE(again.size() == r.aggregates.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    for (auto part : {&ModelAggregate::aucpr, &ModelAggregate::ap, &ModelAggregate::precision,
                      &ModelAggregate::recall, &ModelAggregate::routed_fraction,
                      &ModelAggregate::latency_s}) {
      const Summary& x = again[i].*part;
      const Summary& y = r.aggregates[i].*part;
      CHECK(x.n == y.n);
      CHECK(std::abs(x.mean - y.mean) <= 1e-12);
      CHECK(std::abs(x.std - y.std) <= 1e-12);
      CHECK(std::abs(x.median - y.median) <= 1e-12);
    }
  }
}

TEST_CASE("report serialization and determinism") {
  const auto& run = shared_run();
  const auto back = report_from_json(to_json(run.report));
  CHECK(to_json(back) == to_json(run.report));
  CHECK(report_hash(back) == report_hash(run.report));

  auto config = tiny_config();
  const auto dataset = load_dataset(config);
  const auto second = run_cv(config, dataset);
  CHECK(to_json(second).dump() == to_json(run.report).dump());
  CHECK(report_hash(second) == report_hash(run.report));

  const auto dir = scratch_dir("report");
  write_report(run.report, dir, run.curves);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "folds.csv"));
  CHECK(std::filesystem::exists(dir / "curves"));
  const auto loaded = load_report(dir / "report.json");
  CHECK(report_hash(loaded) == report_hash(run.report));

  std::ifstream csv(dir / "folds.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "repeat,fold,model,gamma,aucpr,ap,precision,recall,routed_fraction,latency_s,flagged");
  std::size_t lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 15 * (2 + tiny_config().gamma_grid.size()));

  SUBCASE("malformed report") {
    auto j = to_json(run.report);
    j["schema_version"] = 99;
    CHECK_THROWS_AS(report_from_json(j), FormatError);
    CHECK_THROWS_AS(report_from_json(json::parse("[1, 2]")), FormatError);
  }
}

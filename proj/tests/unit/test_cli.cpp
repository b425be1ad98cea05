#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "qmoe/bench.hpp"
#include "qmoe/calibration.hpp"
#include "qmoe/cli.hpp"

using namespace qmoe;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"qmoe"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "qmoe_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    nlohmann::json cfg = {
        {"gqc",
         {{"encoder_hidden", {8}},
          {"n_qubits", 3},
          {"n_layers", 2},
          {"epochs", 3},
          {"batch_size", 16},
          {"learning_rate", 0.01}}},
        {"expert", {{"n_estimators", 20}}},
        {"router", {{"n_estimators", 10}}},
        {"folds", 3},
        {"repeats", 1}};
    std::ofstream(d / "cfg.json") << cfg.dump(2);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  auto r = cli({"bench", "--bogus"});
  CHECK(r.code == 2);
  CHECK(contains(r.err, "error"));
  CHECK(contains(r.err, "Usage"));

  r = cli({});
  CHECK(r.code == 2);
  r = cli({"frobnicate"});
  CHECK(r.code == 2);
  r = cli({"synth"});
  CHECK(r.code == 2);
  CHECK(contains(r.err, "--out"));

  r = cli({"--help"});
  CHECK(r.code == 0);
  for (const char* sub : {"synth", "train", "evaluate", "bench", "latency", "calibrate"}) {
    CHECK(contains(r.out, sub));
  }
}

TEST_CASE("structured errors exit with code 1") {
  auto r = cli({"evaluate", "--model", path("absent.json"), "--data", path("absent.csv")});
  CHECK(r.code == 1);
  CHECK(contains(r.err, "error:"));

  std::ofstream(workdir() / "badcfg.json") << R"({"gamma_grid": [0.9, 0.5]})";
  r = cli({"bench", "--config", path("badcfg.json"), "--out", path("never")});
  CHECK(r.code == 1);
  CHECK(contains(r.err, "gamma"));
  CHECK_FALSE(fs::exists(workdir() / "never"));

  r = cli({"latency", "--report", path("absent.json")});
  CHECK(r.code == 1);
  r = cli({"synth", "--rows", "4000", "--fraud-rate", "1.5", "--out", path("x.csv")});
  CHECK(r.code == 1);
}

TEST_CASE("synth, train, evaluate and calibrate") {
  auto r = cli({"synth", "--rows", "3000", "--fraud-rate", "0.02", "--seed", "4", "--out",
                path("synth.csv")});
  REQUIRE(r.code == 0);
  const auto d = data::load_csv(path("synth.csv"));
  CHECK(d.size() == 3000);
  CHECK(d.positives() == 60);

  r = cli({"train", "--config", path("cfg.json"), "--data", path("synth.csv"), "--model",
           path("model.json")});
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "saved"));
  const auto model = bench::load_model(path("model.json"));

  r = cli({"evaluate", "--model", path("model.json"), "--data", path("synth.csv"), "--gamma", "0.5",
           "--gamma", "0.8"});
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "gbdt-baseline"));
  CHECK(contains(r.out, "gqc-secondary"));
  CHECK(contains(r.out, "combined g=0.50"));
  CHECK(contains(r.out, "combined g=0.80"));
  CHECK_FALSE(contains(r.out, "combined g=0.60"));

  r = cli({"evaluate", "--model", path("model.json"), "--data", path("synth.csv"), "--gamma", "1.2"});
  CHECK(r.code == 1);

  r = cli({"calibrate", "--model", path("model.json"), "--data", path("synth.csv"), "--out",
           path("recal.json")});
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "primary: temperature"));
  const auto recal = bench::load_model(path("recal.json"));
  const auto x = data::minmax_transform(model.scaler, d.features);
  const auto t = calibration::fit_temperature(recal.primary.predict_raw(x), d.labels);
  CHECK(recal.primary.temperature.temperature == t.temperature);

  // the refitted threshold selects the same rows as before
  const auto before = moe::hard_predictions(model.primary.predict(x), model.primary_threshold);
  const auto after = moe::hard_predictions(recal.primary.predict(x), recal.primary_threshold);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < before.size(); ++i) differ += before[i] != after[i];
  CHECK(differ == 0);
}

TEST_CASE("bench and latency") {
  REQUIRE(cli({"synth", "--rows", "3000", "--fraud-rate", "0.02", "--seed", "5", "--out",
               path("bench.csv")})
              .code == 0);
  auto r = cli({"bench", "--config", path("cfg.json"), "--data", path("bench.csv"), "--out",
                path("run"), "--seed", "9"});
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "gbdt-baseline"));
  CHECK(fs::exists(workdir() / "run" / "report.json"));
  CHECK(fs::exists(workdir() / "run" / "folds.csv"));
  CHECK(fs::exists(workdir() / "run" / "timing.json"));
  CHECK(fs::is_directory(workdir() / "run" / "curves"));

  const auto report = bench::load_report(workdir() / "run" / "report.json");
  CHECK(report.folds.size() == 3);
  CHECK(report.seed == 9);

  r = cli({"latency", "--report", path("run/report.json"), "--n-points", "14000"});
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "gamma\trouted %\tseconds\tminutes"));
  CHECK(contains(r.out, "all\t100.000\t38346.0\t639.10"));
  for (const auto& a : report.aggregates) {
    if (a.name != "combined") continue;
    const double s = bench::latency_estimate(14000, a.routed_fraction.mean);
    char line[128];
    std::snprintf(line, sizeof line, "%.2f\t%.3f\t%.1f\t%.2f", a.gamma,
                  100.0 * a.routed_fraction.mean, s, s / 60.0);
    CHECK(contains(r.out, line));
  }

  r = cli({"latency", "--report", path("run/report.json"), "--exec-time", "-1"});
  CHECK(r.code == 1);
}

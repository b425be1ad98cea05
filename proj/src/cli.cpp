#include "qmoe/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qmoe/bench.hpp"
#include "qmoe/calibration.hpp"
#include "qmoe/error.hpp"

namespace qmoe {
namespace {

struct CommonFlags {
  std::string config;
  std::string data;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "RunConfig JSON file");
  sub->add_option("--data", f.data, "credit-card CSV (overrides the configured source)");
  sub->add_option("--seed", f.seed, "master seed");
}

bench::RunConfig resolve_config(const CommonFlags& f) {
  bench::RunConfig config = f.config.empty() ? bench::RunConfig{} : bench::load_run_config(f.config);
  if (!f.data.empty()) config.csv = f.data;
  if (f.seed) config.seed = *f.seed;
  config.validate();
  return config;
}

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_metrics_row(std::ostream& out, const std::string& name, const bench::Metrics& m,
                       double routed) {
  out << name << "\tAUCPR " << fixed(m.aucpr) << "\tAP " << fixed(m.ap) << "\tprecision "
      << fixed(m.precision) << (m.precision_degenerate ? "*" : "") << "\trecall "
      << fixed(m.recall) << "\trouted " << fixed(100.0 * routed, 2) << "%\n";
}

int cmd_synth(std::size_t rows, double rate, std::uint64_t seed, const std::string& path,
              std::ostream& out) {
  const auto d = data::synthesize(rows, rate, seed);
  data::save_csv(path, d);
  out << "wrote " << d.size() << " rows (" << d.positives() << " fraud) to " << path << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& model_path, std::ostream& out) {
  auto config = resolve_config(f);
  const auto dataset = bench::load_dataset(config);
  const auto plans =
      data::stratified_repeated_kfold(dataset.labels, config.folds, 1, config.seed);
  const auto& plan = plans.front();
  bench::FoldSplits splits{dataset.subset(plan.train), dataset.subset(plan.test.validation),
                           dataset.subset(plan.test.analysis)};
  const auto fitted = bench::fit_combined(config, splits, derive_seed(config.seed, 100));
  bench::save_model(fitted.model, model_path);
  for (const auto& w : fitted.diagnostics.warnings) out << "warning: " << w << '\n';
  out << "trained on " << splits.train.size() << " rows (" << fitted.diagnostics.balanced_rows
      << " after undersampling); primary threshold " << fixed(fitted.model.primary_threshold)
      << ", secondary threshold " << fixed(fitted.model.secondary_threshold) << '\n'
      << "saved " << model_path << '\n';
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::vector<double>& gammas_flag, std::ostream& out) {
  const auto model = bench::load_model(model_path);
  const auto d = data::load_csv(data_path);
  const auto scores = bench::score_raw(model, d.features);
  const auto gammas = gammas_flag.empty() ? model.gamma_grid : gammas_flag;
  out << "rows " << d.size() << ", fraud " << d.positives() << '\n';
  print_metrics_row(out, "gbdt-baseline",
                    bench::evaluate(scores.primary,
                                    moe::hard_predictions(scores.primary, model.primary_threshold),
                                    d.labels),
                    0.0);
  print_metrics_row(out, "gqc-secondary",
                    bench::evaluate(scores.secondary,
                                    moe::hard_predictions(scores.secondary, model.secondary_threshold),
                                    d.labels),
                    1.0);
  for (double g : gammas) {
    moe::validate_gamma(g);
    const auto mixed = moe::combine(scores, g);
    const auto hard = moe::combined_hard_predictions(scores, mixed, model.primary_threshold,
                                                     model.secondary_threshold);
    print_metrics_row(out, "combined g=" + fixed(g, 2), bench::evaluate(mixed.probs, hard, d.labels),
                      moe::routed_fraction(mixed.routed));
  }
  return 0;
}

int cmd_bench(const CommonFlags& f, const std::string& out_dir,
              std::optional<std::size_t> folds, std::optional<std::size_t> repeats,
              std::ostream& out) {
  auto config = resolve_config(f);
  if (folds) config.folds = *folds;
  if (repeats) config.repeats = *repeats;
  if (!out_dir.empty()) config.output_dir = out_dir;
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto dataset = bench::load_dataset(config);
  bench::CurveSet curves;
  const auto report = bench::run_cv(config, dataset, &curves);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bench::write_report(report, config.output_dir, curves);
  {
    std::ofstream t(config.output_dir / "timing.json");
    t << nlohmann::json{{"wall_seconds", seconds}}.dump(2) << '\n';
  }
  out << "model\tgamma\tAUCPR mean+-std (median)\tAP mean+-std (median)\trouted %\n";
  for (const auto& a : report.aggregates) {
    out << a.name << '\t' << (a.name == "combined" ? fixed(a.gamma, 2) : "-") << '\t'
        << fixed(a.aucpr.mean) << "+-" << fixed(a.aucpr.std) << " (" << fixed(a.aucpr.median)
        << ")\t" << fixed(a.ap.mean) << "+-" << fixed(a.ap.std) << " (" << fixed(a.ap.median)
        << ")\t" << fixed(100.0 * a.routed_fraction.mean, 2) << '\n';
  }
  out << report.warnings.size() << " warnings; report written to " << config.output_dir.string()
      << " in " << fixed(seconds, 1) << " s\n";
  return 0;
}

double mean_holdout(const bench::BenchmarkReport& r) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& f : r.folds) {
    if (f.n_holdout == 0) continue;
    total += static_cast<double>(f.n_holdout);
    ++n;
  }
  if (n == 0) throw InputError("latency: report has no folds with a holdout split");
  return total / static_cast<double>(n);
}

int cmd_latency(const std::string& report_path, std::optional<double> n_points,
                const bench::LatencyModel& lm, std::ostream& out) {
  lm.validate();
  const auto report = bench::load_report(report_path);
  const double n = n_points ? *n_points : mean_holdout(report);
  out << "points " << fixed(n, 1) << ", seconds per task " << fixed(lm.per_task(), 3) << '\n';
  out << "gamma\trouted %\tseconds\tminutes\n";
  for (const auto& a : report.aggregates) {
    if (a.name != "combined") continue;
    const double frac = a.routed_fraction.n ? a.routed_fraction.mean : 0.0;
    const double s = bench::latency_estimate(n, frac, lm);
    out << fixed(a.gamma, 2) << '\t' << fixed(100.0 * frac, 3) << '\t' << fixed(s, 1) << '\t'
        << fixed(s / 60.0, 2) << '\n';
  }
  const double all = bench::latency_estimate(n, 1.0, lm);
  out << "all\t100.000\t" << fixed(all, 1) << '\t' << fixed(all / 60.0, 2) << '\n';
  return 0;
}

double remap_threshold(double threshold, double old_t, double new_t) {
  const double raw = calibration::apply_temperature(1.0 / old_t, threshold);
  return calibration::apply_temperature(new_t, raw);
}

int cmd_calibrate(const std::string& model_path, const std::string& data_path,
                  const std::string& out_path, std::ostream& out) {
  auto model = bench::load_model(model_path);
  const auto d = data::load_csv(data_path);
  const auto x = data::minmax_transform(model.scaler, d.features);
  auto refit = [&](moe::CalibratedExpert& e, double& threshold, const char* name) {
    const auto t = calibration::fit_temperature(e.predict_raw(x), d.labels);
    threshold = remap_threshold(threshold, e.temperature.temperature, t.temperature);
    out << name << ": temperature " << fixed(e.temperature.temperature) << " -> "
        << fixed(t.temperature) << (t.single_class ? " (single-class labels)" : "") << '\n';
    e.temperature = t;
  };
  refit(model.primary, model.primary_threshold, "primary");
  refit(model.secondary, model.secondary_threshold, "secondary");
  const std::string target = out_path.empty() ? model_path : out_path;
  bench::save_model(model, target);
  out << "saved " << target << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum mixture-of-experts fraud detection toolkit", "qmoe"};
  app.require_subcommand(1);

  std::size_t synth_rows = 20000;
  double synth_rate = data::kDefaultFraudRate;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "emit a synthetic credit-card CSV");
  synth->add_option("--rows", synth_rows, "row count");
  synth->add_option("--fraud-rate", synth_rate, "fraud fraction");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output CSV")->required();

  CommonFlags train_flags;
  std::string train_model;
  auto* train = app.add_subcommand("train", "fit one combined model on the first CV split");
  add_common(train, train_flags);
  train->add_option("--model", train_model, "output model file")->required();

  std::string eval_model, eval_data;
  std::vector<double> eval_gammas;
  auto* evaluate = app.add_subcommand("evaluate", "metrics of a saved model on a CSV");
  evaluate->add_option("--model", eval_model, "model file")->required();
  evaluate->add_option("--data", eval_data, "labelled CSV")->required();
  evaluate->add_option("--gamma", eval_gammas, "router thresholds (default: model grid)");

  CommonFlags bench_flags;
  std::string bench_out;
  std::optional<std::size_t> bench_folds, bench_repeats;
  auto* benchmark = app.add_subcommand("bench", "repeated stratified cross-validation");
  add_common(benchmark, bench_flags);
  benchmark->add_option("--out", bench_out, "output directory");
  benchmark->add_option("--folds", bench_folds, "folds per repeat");
  benchmark->add_option("--repeats", bench_repeats, "repeats");

  std::string lat_report;
  std::optional<double> lat_points;
  bench::LatencyModel lat_model;
  auto* latency = app.add_subcommand("latency", "quantum inference latency table from a report");
  latency->add_option("--report", lat_report, "report.json")->required();
  latency->add_option("--n-points", lat_points, "points to score (default: mean holdout size)");
  latency->add_option("--server-time", lat_model.server_time_s, "seconds per task");
  latency->add_option("--compile-time", lat_model.compile_time_s, "seconds per task");
  latency->add_option("--exec-time", lat_model.exec_time_s, "seconds per task");

  std::string cal_model, cal_data, cal_out;
  auto* calibrate = app.add_subcommand("calibrate", "refit expert temperatures on a CSV");
  calibrate->add_option("--model", cal_model, "model file")->required();
  calibrate->add_option("--data", cal_data, "labelled CSV")->required();
  calibrate->add_option("--out", cal_out, "output model file (default: overwrite)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth) return cmd_synth(synth_rows, synth_rate, synth_seed, synth_out, out);
    if (*train) return cmd_train(train_flags, train_model, out);
    if (*evaluate) return cmd_evaluate(eval_model, eval_data, eval_gammas, out);
    if (*benchmark) return cmd_bench(bench_flags, bench_out, bench_folds, bench_repeats, out);
    if (*latency) return cmd_latency(lat_report, lat_points, lat_model, out);
    if (*calibrate) return cmd_calibrate(cal_model, cal_data, cal_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace qmoe

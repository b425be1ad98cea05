#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>

#include "qmoe/bench.hpp"
#include "qmoe/calibration.hpp"
#include "qmoe/error.hpp"
#include "qmoe/rng.hpp"

namespace qmoe::bench {
namespace {

bool has_both_classes(std::span<const int> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return pos > 0 && static_cast<std::size_t>(pos) < labels.size();
}

data::Dataset scaled(const data::ScalerState& s, const data::Dataset& d) {
  data::Dataset out = d;
  out.features = data::minmax_transform(s, d.features);
  return out;
}

double operating_threshold(std::span<const double> probs, std::span<const int> labels,
                           const char* which, std::vector<std::string>& warnings) {
  if (!has_both_classes(labels)) {
    warnings.push_back(std::string(which) +
                       ": validation split is single-class; operating threshold defaults to 0.5");
    return 0.5;
  }
  return moe::youden_threshold(probs, labels).threshold;
}

}  // namespace

FittedCombined fit_combined(const RunConfig& config, const FoldSplits& splits,
                            std::uint64_t seed) {
  splits.train.validate();
  splits.validation.validate();
  splits.analysis.validate();
  if (splits.validation.size() == 0 || splits.analysis.size() == 0) {
    throw InputError("fit_combined: validation and analysis splits must be non-empty");
  }
  FittedCombined out;
  auto& diag = out.diagnostics;
  auto& m = out.model;
  m.gamma_grid = config.gamma_grid;
  m.scaler = data::minmax_fit(splits.train.features);
  const auto val = scaled(m.scaler, splits.validation);
  const auto analysis = scaled(m.scaler, splits.analysis);

  bool not_smaller = false;
  const auto balanced =
      data::undersample_majority(scaled(m.scaler, splits.train), derive_seed(seed, 12), &not_smaller);
  if (not_smaller) diag.warnings.push_back("train: minority class not smaller; undersampling skipped");
  diag.train_rows = splits.train.size();
  diag.balanced_rows = balanced.size();

  m.primary.model = gbdt::gbdt_fit(config.expert, balanced.features, balanced.labels,
                                   gbdt::ValidationSet{val.features, val.labels});
  hybrid::GqcConfig gqc = config.gqc;
  gqc.seed = derive_seed(seed, 11);
  auto trained = hybrid::train(gqc, balanced, &val);
  diag.gqc_epochs = trained.report.epochs.size();
  m.secondary.model = std::move(trained.model);

  const auto val_primary_raw = m.primary.predict_raw(val.features);
  const auto val_secondary_raw = m.secondary.predict_raw(val.features);
  m.primary.temperature = calibration::fit_temperature(val_primary_raw, val.labels);
  m.secondary.temperature = calibration::fit_temperature(val_secondary_raw, val.labels);
  if (m.primary.temperature.single_class) {
    diag.warnings.push_back("validation: single-class labels; temperatures left at 1");
  }
  const auto val_primary = calibration::apply_temperature(m.primary.temperature, val_primary_raw);
  const auto val_secondary =
      calibration::apply_temperature(m.secondary.temperature, val_secondary_raw);
  m.primary_threshold = operating_threshold(val_primary, val.labels, "primary", diag.warnings);
  m.secondary_threshold =
      operating_threshold(val_secondary, val.labels, "secondary", diag.warnings);

  const auto targets =
      moe::build_router_targets(m.primary.predict(analysis.features),
                                m.secondary.predict(analysis.features), analysis.labels,
                                m.primary_threshold, m.secondary_threshold);
  diag.router_positive_targets =
      static_cast<std::size_t>(std::count(targets.begin(), targets.end(), 1));
  if (diag.router_positive_targets == 0) {
    diag.warnings.push_back("analysis: no router targets; router routes nothing");
  }
  m.router = moe::fit_router(analysis.features, targets, config.router);
  return out;
}

moe::ExpertScores score_raw(const moe::CombinedModel& model, const FeatureMatrix& raw) {
  return moe::score(model, data::minmax_transform(model.scaler, raw));
}

Metrics evaluate(std::span<const double> probs, std::span<const int> predictions,
                 std::span<const int> labels) {
  Metrics m;
  m.aucpr = metrics::auprc_trapezoid(metrics::pr_curve(probs, labels));
  m.ap = metrics::average_precision(probs, labels);
  const auto pr = metrics::precision_recall_of(predictions, labels);
  m.precision = pr.precision;
  m.recall = pr.recall;
  m.precision_degenerate = pr.no_predicted_positives;
  return m;
}

namespace {

FoldEntry run_fold(const RunConfig& config, const data::Dataset& dataset,
                   const data::FoldPlan& plan, std::uint64_t seed, CurveSet* curves) {
  FoldEntry e;
  e.repeat = plan.repeat;
  e.fold = plan.fold;
  if (plan.test.missing_positives) {
    e.warnings.push_back("test split: a sub-split received no positive rows");
  }
  FoldSplits splits{dataset.subset(plan.train), dataset.subset(plan.test.validation),
                    dataset.subset(plan.test.analysis)};
  const auto holdout = dataset.subset(plan.test.holdout);
  e.n_train = splits.train.size();
  e.n_validation = splits.validation.size();
  e.n_analysis = splits.analysis.size();
  e.n_holdout = holdout.size();
  e.holdout_positives = holdout.positives();

  auto fitted = fit_combined(config, splits, seed);
  const auto& model = fitted.model;
  e.n_balanced = fitted.diagnostics.balanced_rows;
  e.router_positive_targets = fitted.diagnostics.router_positive_targets;
  e.warnings.insert(e.warnings.end(), fitted.diagnostics.warnings.begin(),
                    fitted.diagnostics.warnings.end());
  e.primary_threshold = model.primary_threshold;
  e.secondary_threshold = model.secondary_threshold;
  e.primary_temperature = model.primary.temperature.temperature;
  e.secondary_temperature = model.secondary.temperature.temperature;

  const auto scores = score_raw(model, holdout.features);
  e.max_router_score = scores.router.empty()
                           ? 0.0
                           : *std::max_element(scores.router.begin(), scores.router.end());
  const bool usable = has_both_classes(holdout.labels);
  if (!usable) {
    e.flagged = true;
    e.warnings.push_back("holdout: single-class labels; ranking metrics undefined");
  }
  const std::string tag = "r" + std::to_string(plan.repeat) + "_f" + std::to_string(plan.fold);
  auto add_curve = [&](const std::string& name, const std::vector<double>& probs) {
    if (curves && usable) curves->emplace_back(tag + "_" + name, metrics::pr_curve(probs, holdout.labels));
  };

  if (usable) {
    e.baseline = evaluate(scores.primary, moe::hard_predictions(scores.primary, model.primary_threshold),
                          holdout.labels);
    e.secondary = evaluate(scores.secondary,
                           moe::hard_predictions(scores.secondary, model.secondary_threshold),
                           holdout.labels);
    const auto none = moe::combine(scores, e.max_router_score);
    e.no_route = evaluate(none.probs,
                          moe::combined_hard_predictions(scores, none, model.primary_threshold,
                                                         model.secondary_threshold),
                          holdout.labels);
    add_curve("baseline", scores.primary);
    add_curve("secondary", scores.secondary);
  }
  for (double gamma : config.gamma_grid) {
    GammaEntry g;
    g.gamma = gamma;
    const auto mixed = moe::combine(scores, gamma);
    g.routed_fraction = moe::routed_fraction(mixed.routed);
    g.latency_s = latency_estimate(static_cast<double>(holdout.size()), g.routed_fraction);
    if (usable) {
      g.metrics = evaluate(mixed.probs,
                           moe::combined_hard_predictions(scores, mixed, model.primary_threshold,
                                                          model.secondary_threshold),
                           holdout.labels);
      char name[32];
      std::snprintf(name, sizeof name, "gamma_%.2f", gamma);
      add_curve(name, mixed.probs);
    }
    e.gammas.push_back(g);
  }
  return e;
}

}  // namespace

BenchmarkReport run_cv(const RunConfig& config, const data::Dataset& dataset, CurveSet* curves) {
  config.validate();
  dataset.validate();
  if (dataset.features.cols() != config.gqc.input_dim) {
    throw InputError("run_cv: dataset has " + std::to_string(dataset.features.cols()) +
                     " features, configuration expects " + std::to_string(config.gqc.input_dim));
  }
  const auto plans =
      data::stratified_repeated_kfold(dataset.labels, config.folds, config.repeats, config.seed);

  BenchmarkReport report;
  report.config = to_json(config);
  report.seed = config.seed;
  report.dataset_rows = dataset.size();
  report.dataset_positives = dataset.positives();
  report.folds.resize(plans.size());
  std::vector<CurveSet> fold_curves(plans.size());

  const auto n = static_cast<std::int64_t>(plans.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& plan = plans[k];
    try {
      report.folds[k] = run_fold(config, dataset, plan, derive_seed(config.seed, 100 + k),
                                 curves ? &fold_curves[k] : nullptr);
    } catch (const std::exception& ex) {
      FoldEntry e;
      e.repeat = plan.repeat;
      e.fold = plan.fold;
      e.flagged = true;
      e.warnings.push_back(std::string("fold failed: ") + ex.what());
      report.folds[k] = std::move(e);
    }
  }
  for (std::size_t k = 0; k < plans.size(); ++k) {
    for (const auto& w : report.folds[k].warnings) {
      report.warnings.push_back("repeat " + std::to_string(plans[k].repeat) + " fold " +
                                std::to_string(plans[k].fold) + ": " + w);
    }
    if (curves) {
      for (auto& c : fold_curves[k]) curves->push_back(std::move(c));
    }
  }
  report.aggregates = aggregate(report.folds, config.gamma_grid);
  return report;
}

}  // namespace qmoe::bench

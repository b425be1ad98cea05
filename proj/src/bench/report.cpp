#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qmoe/bench.hpp"
#include "qmoe/error.hpp"

namespace qmoe::bench {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json metrics_json(const std::optional<Metrics>& m) {
  if (!m) return nullptr;
  return {{"aucpr", m->aucpr},
          {"ap", m->ap},
          {"precision", m->precision},
          {"recall", m->recall},
          {"precision_degenerate", m->precision_degenerate}};
}

std::optional<Metrics> metrics_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  Metrics m;
  m.aucpr = j.at("aucpr").get<double>();
  m.ap = j.at("ap").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.precision_degenerate = j.at("precision_degenerate").get<bool>();
  return m;
}

json summary_json(const Summary& s) {
  return {{"n", s.n}, {"mean", number(s.mean)}, {"std", number(s.std)}, {"median", number(s.median)}};
}

Summary summary_from(const json& j) {
  return {j.at("n").get<std::size_t>(), number_from(j.at("mean")), number_from(j.at("std")),
          number_from(j.at("median"))};
}

template <typename Get>
std::vector<double> column(const std::vector<FoldEntry>& folds, Get&& get) {
  std::vector<double> v;
  for (const auto& f : folds) v.push_back(get(f));
  return v;
}

void fill_metrics(ModelAggregate& a, const std::vector<std::optional<Metrics>>& ms) {
  auto pick = [&](auto field) {
    std::vector<double> v;
    for (const auto& m : ms) v.push_back(m ? (*m).*field : kNaN);
    return summarize(v);
  };
  a.aucpr = pick(&Metrics::aucpr);
  a.ap = pick(&Metrics::ap);
  a.precision = pick(&Metrics::precision);
  a.recall = pick(&Metrics::recall);
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

Summary summarize(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values) {
    if (!std::isnan(x)) v.push_back(x);
  }
  Summary s;
  s.n = v.size();
  if (v.empty()) {
    s.mean = s.std = s.median = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  return s;
}

std::vector<ModelAggregate> aggregate(const std::vector<FoldEntry>& folds,
                                      const std::vector<double>& gamma_grid,
                                      const LatencyModel& latency) {
  (void)latency;
  std::vector<ModelAggregate> out;
  auto fixed_row = [&](const char* name, auto member) {
    ModelAggregate a;
    a.name = name;
    std::vector<std::optional<Metrics>> ms;
    for (const auto& f : folds) ms.push_back(f.*member);
    fill_metrics(a, ms);
    a.routed_fraction = summarize(column(folds, [&](const FoldEntry&) {
      return std::string(name) == "gqc-secondary" ? 1.0 : 0.0;
    }));
    a.latency_s = summarize(column(folds, [&](const FoldEntry& f) {
      return std::string(name) == "gqc-secondary"
                 ? latency_estimate(static_cast<double>(f.n_holdout), 1.0, latency)
                 : 0.0;
    }));
    out.push_back(std::move(a));
  };
  fixed_row("gbdt-baseline", &FoldEntry::baseline);
  fixed_row("gqc-secondary", &FoldEntry::secondary);
  for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
    ModelAggregate a;
    a.name = "combined";
    a.gamma = gamma_grid[g];
    std::vector<std::optional<Metrics>> ms;
    std::vector<double> routed;
    std::vector<double> lat;
    for (const auto& f : folds) {
      const bool present = g < f.gammas.size();
      ms.push_back(present ? f.gammas[g].metrics : std::nullopt);
      routed.push_back(present ? f.gammas[g].routed_fraction : kNaN);
      lat.push_back(present ? f.gammas[g].latency_s : kNaN);
    }
    fill_metrics(a, ms);
    a.routed_fraction = summarize(routed);
    a.latency_s = summarize(lat);
    out.push_back(std::move(a));
  }
  return out;
}

nlohmann::json to_json(const BenchmarkReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    json gammas = json::array();
    for (const auto& g : f.gammas) {
      gammas.push_back({{"gamma", g.gamma},
                        {"metrics", metrics_json(g.metrics)},
                        {"routed_fraction", g.routed_fraction},
                        {"latency_s", g.latency_s}});
    }
    folds.push_back({{"repeat", f.repeat},
                     {"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_balanced", f.n_balanced},
                     {"n_validation", f.n_validation},
                     {"n_analysis", f.n_analysis},
                     {"n_holdout", f.n_holdout},
                     {"holdout_positives", f.holdout_positives},
                     {"router_positive_targets", f.router_positive_targets},
                     {"primary_threshold", f.primary_threshold},
                     {"secondary_threshold", f.secondary_threshold},
                     {"primary_temperature", f.primary_temperature},
                     {"secondary_temperature", f.secondary_temperature},
                     {"max_router_score", f.max_router_score},
                     {"flagged", f.flagged},
                     {"warnings", f.warnings},
                     {"baseline", metrics_json(f.baseline)},
                     {"secondary", metrics_json(f.secondary)},
                     {"no_route", metrics_json(f.no_route)},
                     {"gammas", std::move(gammas)}});
  }
  json aggs = json::array();
  for (const auto& a : r.aggregates) {
    aggs.push_back({{"name", a.name},
                    {"gamma", a.gamma},
                    {"aucpr", summary_json(a.aucpr)},
                    {"ap", summary_json(a.ap)},
                    {"precision", summary_json(a.precision)},
                    {"recall", summary_json(a.recall)},
                    {"routed_fraction", summary_json(a.routed_fraction)},
                    {"latency_s", summary_json(a.latency_s)}});
  }
  return {{"schema", "qmoe-benchmark-report"},
          {"schema_version", BenchmarkReport::kSchemaVersion},
          {"seed", r.seed},
          {"dataset_rows", r.dataset_rows},
          {"dataset_positives", r.dataset_positives},
          {"config", r.config},
          {"folds", std::move(folds)},
          {"aggregates", std::move(aggs)},
          {"warnings", r.warnings}};
}

BenchmarkReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", std::string{}) != "qmoe-benchmark-report") {
      throw FormatError("report: not a benchmark report");
    }
    if (j.at("schema_version").get<int>() != BenchmarkReport::kSchemaVersion) {
      throw FormatError("report: unsupported schema version");
    }
    BenchmarkReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.dataset_rows = j.at("dataset_rows").get<std::size_t>();
    r.dataset_positives = j.at("dataset_positives").get<std::size_t>();
    r.config = j.at("config");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& f : j.at("folds")) {
      FoldEntry e;
      e.repeat = f.at("repeat").get<std::size_t>();
      e.fold = f.at("fold").get<std::size_t>();
      e.n_train = f.at("n_train").get<std::size_t>();
      e.n_balanced = f.at("n_balanced").get<std::size_t>();
      e.n_validation = f.at("n_validation").get<std::size_t>();
      e.n_analysis = f.at("n_analysis").get<std::size_t>();
      e.n_holdout = f.at("n_holdout").get<std::size_t>();
      e.holdout_positives = f.at("holdout_positives").get<std::size_t>();
      e.router_positive_targets = f.at("router_positive_targets").get<std::size_t>();
      e.primary_threshold = f.at("primary_threshold").get<double>();
      e.secondary_threshold = f.at("secondary_threshold").get<double>();
      e.primary_temperature = f.at("primary_temperature").get<double>();
      e.secondary_temperature = f.at("secondary_temperature").get<double>();
      e.max_router_score = f.at("max_router_score").get<double>();
      e.flagged = f.at("flagged").get<bool>();
      e.warnings = f.at("warnings").get<std::vector<std::string>>();
      e.baseline = metrics_from(f.at("baseline"));
      e.secondary = metrics_from(f.at("secondary"));
      e.no_route = metrics_from(f.at("no_route"));
      for (const auto& g : f.at("gammas")) {
        GammaEntry ge;
        ge.gamma = g.at("gamma").get<double>();
        ge.metrics = metrics_from(g.at("metrics"));
        ge.routed_fraction = g.at("routed_fraction").get<double>();
        ge.latency_s = g.at("latency_s").get<double>();
        e.gammas.push_back(ge);
      }
      r.folds.push_back(std::move(e));
    }
    for (const auto& a : j.at("aggregates")) {
      ModelAggregate m;
      m.name = a.at("name").get<std::string>();
      m.gamma = a.at("gamma").get<double>();
      m.aucpr = summary_from(a.at("aucpr"));
      m.ap = summary_from(a.at("ap"));
      m.precision = summary_from(a.at("precision"));
      m.recall = summary_from(a.at("recall"));
      m.routed_fraction = summary_from(a.at("routed_fraction"));
      m.latency_s = summary_from(a.at("latency_s"));
      r.aggregates.push_back(std::move(m));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

BenchmarkReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report " + path.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError("report " + path.string() + " is corrupt: " + e.what());
  }
}

void write_report(const BenchmarkReport& report, const std::filesystem::path& dir,
                  const CurveSet& curves) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw FormatError("cannot write " + (dir / "report.json").string());
    out << to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "folds.csv");
    out << "repeat,fold,model,gamma,aucpr,ap,precision,recall,routed_fraction,latency_s,flagged\n";
    auto row = [&](const FoldEntry& f, const std::string& model, double gamma,
                   const std::optional<Metrics>& m, double routed, double latency) {
      out << f.repeat << ',' << f.fold << ',' << model << ',' << fmt(gamma) << ','
          << (m ? fmt(m->aucpr) : "") << ',' << (m ? fmt(m->ap) : "") << ','
          << (m ? fmt(m->precision) : "") << ',' << (m ? fmt(m->recall) : "") << ','
          << fmt(routed) << ',' << fmt(latency) << ',' << (f.flagged ? 1 : 0) << '\n';
    };
    for (const auto& f : report.folds) {
      row(f, "gbdt-baseline", kNaN, f.baseline, 0.0, 0.0);
      row(f, "gqc-secondary", kNaN, f.secondary, 1.0,
          latency_estimate(static_cast<double>(f.n_holdout), 1.0));
      for (const auto& g : f.gammas) row(f, "combined", g.gamma, g.metrics, g.routed_fraction, g.latency_s);
    }
  }
  if (!curves.empty()) {
    std::filesystem::create_directories(dir / "curves");
    for (const auto& [name, curve] : curves) {
      std::ofstream out(dir / "curves" / (name + ".csv"));
      metrics::write_pr_curve_csv(out, curve);
    }
  }
}

std::uint64_t report_hash(const BenchmarkReport& report) {
  const std::string text = to_json(report).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace qmoe::bench

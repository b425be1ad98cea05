#include <cstdlib>
#include <fstream>
#include <set>

#include "json_io.hpp"
#include "qmoe/bench.hpp"
#include "qmoe/error.hpp"

namespace qmoe::bench {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

hybrid::GqcConfig gqc_from(const json& j, hybrid::GqcConfig c) {
  reject_unknown(j,
                 {"input_dim", "encoder_hidden", "n_qubits", "n_layers", "head_hidden",
                  "head_all_qubits", "lambda", "batch_size", "epochs", "patience",
                  "learning_rate", "seed"},
                 "gqc");
  read(j, "input_dim", c.input_dim);
  read(j, "encoder_hidden", c.encoder_hidden);
  read(j, "n_qubits", c.n_qubits);
  read(j, "n_layers", c.n_layers);
  read(j, "head_hidden", c.head_hidden);
  read(j, "head_all_qubits", c.head_all_qubits);
  read(j, "lambda", c.lambda);
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "patience", c.patience);
  read(j, "learning_rate", c.learning_rate);
  read(j, "seed", c.seed);
  return c;
}

gbdt::GbdtParams gbdt_from(const json& j, gbdt::GbdtParams p, const std::string& where) {
  reject_unknown(j,
                 {"n_estimators", "max_depth", "learning_rate", "l2", "min_split_gain",
                  "min_child_weight", "early_stopping_rounds", "seed"},
                 where);
  read(j, "n_estimators", p.n_estimators);
  read(j, "max_depth", p.max_depth);
  read(j, "learning_rate", p.learning_rate);
  read(j, "l2", p.l2);
  read(j, "min_split_gain", p.min_split_gain);
  read(j, "min_child_weight", p.min_child_weight);
  read(j, "early_stopping_rounds", p.early_stopping_rounds);
  read(j, "seed", p.seed);
  return p;
}

}  // namespace

void RunConfig::validate() const {
  gqc.validate();
  expert.validate();
  router.validate();
  if (gamma_grid.empty()) throw ConfigError("gamma_grid must not be empty");
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    moe::validate_gamma(gamma_grid[i]);
    if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1])) {
      throw ConfigError("gamma_grid must be strictly increasing");
    }
  }
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (repeats == 0) throw ConfigError("repeats must be positive");
  if (!csv && synthetic.n_rows < 1000) throw ConfigError("synthetic n_rows must be at least 1000");
  if (gqc.input_dim != data::kFeatureCount) {
    throw ConfigError("gqc.input_dim must equal the dataset feature count (" +
                      std::to_string(data::kFeatureCount) + ")");
  }
}

nlohmann::json to_json(const RunConfig& c) {
  json data;
  if (c.csv) {
    data = {{"csv", c.csv->string()}};
  } else {
    data = {{"synthetic",
             {{"n_rows", c.synthetic.n_rows},
              {"fraud_rate", c.synthetic.fraud_rate},
              {"seed", c.synthetic.seed}}}};
  }
  return {{"data", std::move(data)},
          {"gqc", gqc_config_json(c.gqc)},
          {"expert", gbdt_params_to_json(c.expert)},
          {"router", gbdt_params_to_json(c.router)},
          {"gamma_grid", c.gamma_grid},
          {"folds", c.folds},
          {"repeats", c.repeats},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  try {
    reject_unknown(j, {"data", "gqc", "expert", "router", "gamma_grid", "folds", "repeats", "seed",
                       "output_dir"},
                   "config");
    RunConfig c;
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"csv", "synthetic"}, "data");
      if (d.contains("csv") && d.contains("synthetic")) {
        throw ConfigError("data: give either csv or synthetic, not both");
      }
      if (d.contains("csv")) c.csv = d.at("csv").get<std::string>();
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        reject_unknown(s, {"n_rows", "fraud_rate", "seed"}, "data.synthetic");
        read(s, "n_rows", c.synthetic.n_rows);
        read(s, "fraud_rate", c.synthetic.fraud_rate);
        read(s, "seed", c.synthetic.seed);
      }
    }
    if (j.contains("gqc")) c.gqc = gqc_from(j.at("gqc"), c.gqc);
    if (j.contains("expert")) c.expert = gbdt_from(j.at("expert"), c.expert, "expert");
    if (j.contains("router")) c.router = gbdt_from(j.at("router"), c.router, "router");
    read(j, "gamma_grid", c.gamma_grid);
    read(j, "folds", c.folds);
    read(j, "repeats", c.repeats);
    read(j, "seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

data::Dataset load_dataset(RunConfig& config) {
  if (const char* env = std::getenv(kDatasetEnv); env != nullptr && *env != '\0') {
    config.csv = std::filesystem::path(env);
  }
  if (config.csv) return data::load_csv(*config.csv);
  return data::synthesize(config.synthetic.n_rows, config.synthetic.fraud_rate,
                          config.synthetic.seed);
}

void LatencyModel::validate() const {
  if (!(server_time_s >= 0.0 && compile_time_s >= 0.0 && exec_time_s >= 0.0)) {
    throw ConfigError("latency times must be non-negative");
  }
}

double latency_estimate(double n_points, double routed_fraction, const LatencyModel& model) {
  model.validate();
  if (!(routed_fraction >= 0.0 && routed_fraction <= 1.0)) {
    throw InputError("latency_estimate: routed fraction must lie in [0, 1]");
  }
  if (!(n_points >= 0.0)) throw InputError("latency_estimate: n_points must be non-negative");
  return n_points * routed_fraction * model.per_task();
}

}  // namespace qmoe::bench

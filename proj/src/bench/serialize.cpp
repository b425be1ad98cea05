#include <fstream>
#include <sstream>

#include "qmoe/bench.hpp"
#include "json_io.hpp"
#include "qmoe/error.hpp"

namespace qmoe::bench {
namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "qmoe-combined-model";

json matrix_json(const neural::Matrix& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", v}};
}

neural::Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto v = j.at("values").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || v.size() != static_cast<std::size_t>(rows * cols)) {
    throw FormatError("model file: matrix shape and values disagree");
  }
  neural::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = v[static_cast<std::size_t>(i * cols + j2)];
  }
  return m;
}

json mlp_json(const neural::MlpParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"weights", matrix_json(l.weights)},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return layers;
}

neural::MlpParams mlp_from(const json& j) {
  neural::MlpParams p;
  for (const auto& l : j) {
    const auto b = l.at("bias").get<std::vector<double>>();
    neural::DenseLayer layer;
    layer.weights = matrix_from(l.at("weights"));
    layer.bias = Eigen::Map<const neural::Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

json gbdt_params_json(const gbdt::GbdtParams& p) {
  return {{"n_estimators", p.n_estimators},
          {"max_depth", p.max_depth},
          {"learning_rate", p.learning_rate},
          {"l2", p.l2},
          {"min_split_gain", p.min_split_gain},
          {"min_child_weight", p.min_child_weight},
          {"early_stopping_rounds", p.early_stopping_rounds},
          {"seed", p.seed}};
}

json gbdt_json(const gbdt::GbdtModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    // One record per node: feature, threshold, left, right, weight.
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.weight});
    trees.push_back(std::move(nodes));
  }
  return {{"kind", "gbdt"},
          {"base_score", m.base_score},
          {"learning_rate", m.learning_rate},
          {"n_features", m.n_features},
          {"single_class", m.single_class},
          {"trees", std::move(trees)}};
}

gbdt::GbdtModel gbdt_from(const json& j) {
  gbdt::GbdtModel m;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.single_class = j.at("single_class").get<bool>();
  for (const auto& t : j.at("trees")) {
    gbdt::Tree tree;
    for (const auto& n : t) {
      if (!n.is_array() || n.size() != 5) throw FormatError("model file: malformed tree node");
      tree.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                            n[4].get<double>()});
    }
    const auto count = static_cast<int>(tree.nodes.size());
    if (count == 0) throw FormatError("model file: empty tree");
    for (const auto& n : tree.nodes) {
      if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count ||
                           static_cast<std::size_t>(n.feature) >= m.n_features)) {
        throw FormatError("model file: tree node references out of range");
      }
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace

nlohmann::json gqc_config_json(const hybrid::GqcConfig& c) {
  return {{"input_dim", c.input_dim},   {"encoder_hidden", c.encoder_hidden},
          {"n_qubits", c.n_qubits},     {"n_layers", c.n_layers},
          {"head_hidden", c.head_hidden}, {"head_all_qubits", c.head_all_qubits},
          {"lambda", c.lambda},         {"batch_size", c.batch_size},
          {"epochs", c.epochs},         {"patience", c.patience},
          {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}

nlohmann::json gbdt_params_to_json(const gbdt::GbdtParams& p) { return gbdt_params_json(p); }

namespace {

json gqc_json(const hybrid::GqcModel& m) {
  return {{"kind", "gqc"},
          {"config", gqc_config_json(m.config)},
          {"encoder", mlp_json(m.encoder)},
          {"decoder", mlp_json(m.decoder)},
          {"head", mlp_json(m.head)},
          {"theta", m.theta}};
}

hybrid::GqcConfig gqc_config_from_model(const json& j) {
  hybrid::GqcConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
  c.n_qubits = j.at("n_qubits").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.head_hidden = j.at("head_hidden").get<std::size_t>();
  c.head_all_qubits = j.at("head_all_qubits").get<bool>();
  c.lambda = j.at("lambda").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

hybrid::GqcModel gqc_from(const json& j) {
  hybrid::GqcModel m = hybrid::GqcModel::zeros(gqc_config_from_model(j.at("config")));
  m.encoder = mlp_from(j.at("encoder"));
  m.decoder = mlp_from(j.at("decoder"));
  m.head = mlp_from(j.at("head"));
  m.theta = j.at("theta").get<std::vector<double>>();
  m.check_shape();
  return m;
}

json expert_json(const moe::CalibratedExpert& e) {
  json model = std::visit(
      [](const auto& m) -> json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, gbdt::GbdtModel>) {
          return gbdt_json(m);
        } else {
          return gqc_json(m);
        }
      },
      e.model);
  return {{"model", std::move(model)},
          {"temperature",
           {{"t", e.temperature.temperature},
            {"final_nll", e.temperature.final_nll},
            {"iterations", e.temperature.iterations},
            {"single_class", e.temperature.single_class}}}};
}

moe::CalibratedExpert expert_from(const json& j) {
  moe::CalibratedExpert e;
  const auto& m = j.at("model");
  const auto kind = m.at("kind").get<std::string>();
  if (kind == "gbdt") {
    e.model = gbdt_from(m);
  } else if (kind == "gqc") {
    e.model = gqc_from(m);
  } else {
    throw FormatError("model file: unknown expert kind '" + kind + "'");
  }
  const auto& t = j.at("temperature");
  e.temperature.temperature = t.at("t").get<double>();
  e.temperature.final_nll = t.at("final_nll").get<double>();
  e.temperature.iterations = t.at("iterations").get<std::size_t>();
  e.temperature.single_class = t.at("single_class").get<bool>();
  if (!(e.temperature.temperature > 0.0)) throw FormatError("model file: non-positive temperature");
  return e;
}

}  // namespace

nlohmann::json to_json(const moe::CombinedModel& model) {
  return {{"format", kModelFormat},
          {"version", kModelFormatVersion},
          {"scaler", {{"min", model.scaler.min}, {"max", model.scaler.max}}},
          {"primary", expert_json(model.primary)},
          {"secondary", expert_json(model.secondary)},
          {"router", gbdt_json(model.router)},
          {"primary_threshold", model.primary_threshold},
          {"secondary_threshold", model.secondary_threshold},
          {"gamma_grid", model.gamma_grid}};
}

moe::CombinedModel combined_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string{}) != kModelFormat) {
      throw FormatError("model file: not a combined-model container");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("model file: version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    moe::CombinedModel m;
    m.scaler.min = j.at("scaler").at("min").get<std::vector<double>>();
    m.scaler.max = j.at("scaler").at("max").get<std::vector<double>>();
    if (m.scaler.min.size() != m.scaler.max.size()) throw FormatError("model file: scaler shape");
    m.primary = expert_from(j.at("primary"));
    m.secondary = expert_from(j.at("secondary"));
    m.router = gbdt_from(j.at("router"));
    m.primary_threshold = j.at("primary_threshold").get<double>();
    m.secondary_threshold = j.at("secondary_threshold").get<double>();
    m.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

void save_model(const moe::CombinedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write model file " + path.string());
  out << to_json(model).dump() << '\n';
  if (!out) throw FormatError("failed writing model file " + path.string());
}

moe::CombinedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file " + path.string() + " is corrupt or truncated: " + e.what());
  }
  return combined_from_json(j);
}

}  // namespace qmoe::bench

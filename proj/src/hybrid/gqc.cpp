#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>

#include "qmoe/error.hpp"
#include "qmoe/hybrid.hpp"
#include "qmoe/metrics.hpp"
#include "qmoe/rng.hpp"
#include "common/error_slot.hpp"

namespace qmoe::hybrid {
namespace {

using neural::Vector;

void check_finite_features(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("gqc: non-finite feature value");
  }
}

Vector to_vector(std::span<const double> x) {
  Vector v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

neural::MlpSpec encoder_spec_of(const GqcConfig& c) {
  neural::MlpSpec s;
  s.layer_sizes.push_back(c.input_dim);
  s.layer_sizes.insert(s.layer_sizes.end(), c.encoder_hidden.begin(), c.encoder_hidden.end());
  s.layer_sizes.push_back(c.n_qubits);
  s.hidden = neural::Activation::ReLU;
  s.output = neural::Activation::Linear;
  return s;
}

neural::MlpSpec decoder_spec_of(const GqcConfig& c) {
  neural::MlpSpec s;
  s.layer_sizes.push_back(c.n_qubits);
  s.layer_sizes.insert(s.layer_sizes.end(), c.encoder_hidden.rbegin(), c.encoder_hidden.rend());
  s.layer_sizes.push_back(c.input_dim);
  s.hidden = neural::Activation::ReLU;
  s.output = neural::Activation::Sigmoid;  // inputs are MinMax scaled
  return s;
}

neural::MlpSpec head_spec_of(const GqcConfig& c) {
  neural::MlpSpec s;
  s.layer_sizes = {c.head_all_qubits ? c.n_qubits : std::size_t{1}, c.head_hidden, 1};
  s.hidden = neural::Activation::ReLU;
  s.output = neural::Activation::Sigmoid;
  return s;
}

void check_batch(const GqcModel& model, const FeatureMatrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw InputError("gqc: empty batch");
  if (x.rows() != y.size()) throw InputError("gqc: row/label count mismatch");
  if (x.cols() != model.config.input_dim) {
    throw InputError("gqc: expected " + std::to_string(model.config.input_dim) +
                     " features, got " + std::to_string(x.cols()));
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw InputError("gqc: labels must be 0 or 1");
  }
  check_finite_features(x.values());
}

double clamped(double p) {
  return std::clamp(p, neural::kProbClamp, 1.0 - neural::kProbClamp);
}

double row_bce(int y, double p) {
  const double q = clamped(p);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double row_bce_grad(int y, double p) {
  if (p <= neural::kProbClamp || p >= 1.0 - neural::kProbClamp) return 0.0;
  return y == 1 ? -1.0 / p : 1.0 / (1.0 - p);
}

struct RowContribution {
  double bce = 0.0;
  double mse = 0.0;
  neural::MlpGradients encoder;
  neural::MlpGradients decoder;  // params empty for fraud rows
  neural::MlpGradients head;
  std::vector<double> theta;
  bool reconstructed = false;
};

RowContribution row_gradients(const GqcModel& m, std::span<const double> xrow, int y,
                              double cls_weight, double rec_weight, bool parallel_shift) {
  RowContribution out;
  const Vector x = to_vector(xrow);
  const auto enc = neural::mlp_forward(m.encoder_spec, m.encoder, x);
  const Vector& z = enc.output;
  const auto angles = latent_to_angles(z);
  const auto spec = m.ansatz();
  const std::size_t n = m.config.n_qubits;

  Vector head_in;
  std::vector<double> all_values;
  if (m.config.head_all_qubits) {
    all_values = qsim::circuit_values(spec, m.theta, angles);
    head_in = to_vector(all_values);
  } else {
    head_in = Vector::Constant(1, qsim::circuit_value(spec, m.theta, angles));
  }
  const auto head = neural::mlp_forward(m.head_spec, m.head, head_in);
  const double p = head.output[0];
  out.bce = row_bce(y, p);

  Vector dz = Vector::Zero(static_cast<Eigen::Index>(n));
  const double dp = cls_weight * row_bce_grad(y, p);
  out.head = neural::mlp_backward(m.head_spec, m.head, head.cache, Vector::Constant(1, dp));
  out.theta.assign(m.theta.size(), 0.0);
  const Vector& dc = out.head.input;
  if (dc.cwiseAbs().maxCoeff() != 0.0) {
    std::vector<double> d_angle(n, 0.0);
    if (m.config.head_all_qubits) {
      const auto jac = qsim::parameter_shift_jacobian(spec, m.theta, angles);
      for (std::size_t q = 0; q < n; ++q) {
        const double w = dc[static_cast<Eigen::Index>(q)];
        for (std::size_t s = 0; s < m.theta.size(); ++s) {
          out.theta[s] += w * jac.params[q * m.theta.size() + s];
        }
        for (std::size_t k = 0; k < n; ++k) d_angle[k] += w * jac.features[q * n + k];
      }
    } else {
      const auto g = parallel_shift ? qsim::parameter_shift_grad(spec, m.theta, angles)
                                    : qsim::parameter_shift_grad_serial(spec, m.theta, angles);
      for (std::size_t s = 0; s < m.theta.size(); ++s) out.theta[s] = dc[0] * g.params[s];
      for (std::size_t k = 0; k < n; ++k) d_angle[k] = dc[0] * g.features[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double t = std::tanh(z[static_cast<Eigen::Index>(k)]);
      dz[static_cast<Eigen::Index>(k)] += d_angle[k] * std::numbers::pi * (1.0 - t * t);
    }
  }

  if (y == 0) {
    out.reconstructed = true;
    const auto dec = neural::mlp_forward(m.decoder_spec, m.decoder, z);
    const auto mse = neural::mse_loss(x, dec.output);
    out.mse = mse.loss;
    out.decoder =
        neural::mlp_backward(m.decoder_spec, m.decoder, dec.cache, rec_weight * mse.grad);
    dz += out.decoder.input;
  }
  out.encoder = neural::mlp_backward(m.encoder_spec, m.encoder, enc.cache, dz);
  return out;
}

LossAndGradients loss_and_gradients_impl(const GqcModel& model, const FeatureMatrix& x,
                                         std::span<const int> y, double lambda, bool parallel) {
  model.check_shape();
  check_batch(model, x, y);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("gqc: lambda must lie in [0, 1]");
  const std::size_t rows = x.rows();
  const auto nominal = static_cast<std::size_t>(std::count(y.begin(), y.end(), 0));
  const double cls_weight = (1.0 - lambda) / static_cast<double>(rows);
  const double rec_weight = nominal ? lambda / static_cast<double>(nominal) : 0.0;

  std::vector<RowContribution> parts(rows);
  const auto n = static_cast<std::int64_t>(rows);
  detail::ErrorSlot error;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    // Rows already occupy the threads, so shifts inside a row stay serial.
    error.run([&] { parts[r] = row_gradients(model, x.row(r), y[r], cls_weight, rec_weight, false); });
  }
  error.rethrow();

  LossAndGradients out;
  out.grads.encoder = neural::MlpParams::zeros(model.encoder_spec);
  out.grads.decoder = neural::MlpParams::zeros(model.decoder_spec);
  out.grads.head = neural::MlpParams::zeros(model.head_spec);
  out.grads.theta.assign(model.theta.size(), 0.0);
  double bce = 0.0;
  double mse = 0.0;
  for (const auto& p : parts) {
    bce += p.bce;
    neural::accumulate(out.grads.encoder, p.encoder.params);
    neural::accumulate(out.grads.head, p.head.params);
    for (std::size_t s = 0; s < p.theta.size(); ++s) out.grads.theta[s] += p.theta[s];
    if (p.reconstructed) {
      mse += p.mse;
      neural::accumulate(out.grads.decoder, p.decoder.params);
    }
  }
  out.loss.classification = bce / static_cast<double>(rows);
  out.loss.reconstruction = nominal ? mse / static_cast<double>(nominal) : 0.0;
  out.loss.total = lambda * out.loss.reconstruction + (1.0 - lambda) * out.loss.classification;
  return out;
}

}  // namespace

void GqcConfig::validate() const {
  if (input_dim == 0) throw ConfigError("gqc: input_dim must be positive");
  for (std::size_t h : encoder_hidden) {
    if (h == 0) throw ConfigError("gqc: hidden sizes must be positive");
  }
  if (n_qubits == 0 || n_qubits > qsim::kMaxQubits) {
    throw ConfigError("gqc: n_qubits must be in [1, " + std::to_string(qsim::kMaxQubits) + "]");
  }
  if (n_layers == 0) throw ConfigError("gqc: n_layers must be positive");
  if (head_hidden == 0) throw ConfigError("gqc: head_hidden must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("gqc: lambda must lie in [0, 1]");
  if (batch_size == 0) throw ConfigError("gqc: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("gqc: learning_rate must be positive");
}

GqcModel GqcModel::zeros(const GqcConfig& config) {
  config.validate();
  GqcModel m;
  m.config = config;
  m.encoder_spec = encoder_spec_of(config);
  m.decoder_spec = decoder_spec_of(config);
  m.head_spec = head_spec_of(config);
  m.encoder = neural::MlpParams::zeros(m.encoder_spec);
  m.decoder = neural::MlpParams::zeros(m.decoder_spec);
  m.head = neural::MlpParams::zeros(m.head_spec);
  m.theta.assign(m.ansatz().param_count(), 0.0);
  return m;
}

GqcModel GqcModel::initialize(const GqcConfig& config) {
  GqcModel m = zeros(config);
  Rng enc_rng(derive_seed(config.seed, 1));
  Rng dec_rng(derive_seed(config.seed, 2));
  Rng head_rng(derive_seed(config.seed, 3));
  Rng theta_rng(derive_seed(config.seed, 4));
  m.encoder = neural::MlpParams::initialize(m.encoder_spec, enc_rng);
  m.decoder = neural::MlpParams::initialize(m.decoder_spec, dec_rng);
  m.head = neural::MlpParams::initialize(m.head_spec, head_rng);
  for (double& t : m.theta) t = theta_rng.uniform(0.0, 2.0 * std::numbers::pi);
  return m;
}

qsim::AnsatzSpec GqcModel::ansatz() const {
  return {config.n_qubits, config.n_layers, 0};
}

std::size_t GqcModel::head_input_size() const {
  return config.head_all_qubits ? config.n_qubits : 1;
}

void GqcModel::check_shape() const {
  config.validate();
  encoder.check_shape(encoder_spec);
  decoder.check_shape(decoder_spec);
  head.check_shape(head_spec);
  if (encoder_spec.output_size() != config.n_qubits ||
      decoder_spec.input_size() != config.n_qubits ||
      head_spec.input_size() != head_input_size()) {
    throw ConfigError("gqc: component shapes disagree with the configuration");
  }
  if (theta.size() != ansatz().param_count()) throw ConfigError("gqc: circuit parameter count mismatch");
}

std::vector<double> latent_to_angles(const neural::Vector& latent) {
  std::vector<double> a(static_cast<std::size_t>(latent.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::numbers::pi * std::tanh(latent[static_cast<Eigen::Index>(i)]);
  }
  return a;
}

GqcOutput gqc_forward(const GqcModel& model, std::span<const double> x) {
  if (x.size() != model.config.input_dim) {
    throw InputError("gqc_forward: expected " + std::to_string(model.config.input_dim) +
                     " features, got " + std::to_string(x.size()));
  }
  check_finite_features(x);
  const Vector in = to_vector(x);
  const Vector z = neural::mlp_predict(model.encoder_spec, model.encoder, in);
  GqcOutput out;
  out.angles = latent_to_angles(z);
  const auto spec = model.ansatz();
  const auto values = qsim::circuit_values(spec, model.theta, out.angles);
  out.vqc_value = values[spec.measured_qubit];
  out.head_inputs = model.config.head_all_qubits ? values : std::vector<double>{out.vqc_value};
  out.prob = neural::mlp_predict(model.head_spec, model.head, to_vector(out.head_inputs))[0];
  out.reconstruction = neural::mlp_predict(model.decoder_spec, model.decoder, z);
  return out;
}

LossBreakdown total_loss(const GqcModel& model, const FeatureMatrix& x, std::span<const int> y,
                         double lambda) {
  check_batch(model, x, y);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("gqc: lambda must lie in [0, 1]");
  double bce = 0.0;
  double mse = 0.0;
  std::size_t nominal = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto out = gqc_forward(model, x.row(r));
    bce += row_bce(y[r], out.prob);
    if (y[r] == 0) {
      mse += neural::mse_loss(to_vector(x.row(r)), out.reconstruction).loss;
      ++nominal;
    }
  }
  LossBreakdown l;
  l.classification = bce / static_cast<double>(x.rows());
  l.reconstruction = nominal ? mse / static_cast<double>(nominal) : 0.0;
  l.total = lambda * l.reconstruction + (1.0 - lambda) * l.classification;
  return l;
}

LossAndGradients loss_and_gradients(const GqcModel& model, const FeatureMatrix& x,
                                    std::span<const int> y, double lambda) {
  return loss_and_gradients_impl(model, x, y, lambda, true);
}

LossAndGradients loss_and_gradients_serial(const GqcModel& model, const FeatureMatrix& x,
                                           std::span<const int> y, double lambda) {
  return loss_and_gradients_impl(model, x, y, lambda, false);
}

namespace {

void check_inference(const GqcModel& model, const FeatureMatrix& x) {
  model.check_shape();
  if (x.rows() > 0 && x.cols() != model.config.input_dim) {
    throw InputError("gqc predict: expected " + std::to_string(model.config.input_dim) +
                     " features, got " + std::to_string(x.cols()));
  }
  check_finite_features(x.values());
}

}  // namespace

std::vector<double> predict_proba(const GqcModel& model, const FeatureMatrix& x) {
  check_inference(model, x);
  std::vector<double> out(x.rows());
  const auto n = static_cast<std::int64_t>(x.rows());
  detail::ErrorSlot error;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    error.run([&] { out[r] = gqc_forward(model, x.row(r)).prob; });
  }
  error.rethrow();
  return out;
}

std::vector<double> predict_proba_serial(const GqcModel& model, const FeatureMatrix& x) {
  check_inference(model, x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = gqc_forward(model, x.row(r)).prob;
  return out;
}

int sign_baseline_predict(double circuit_value) { return circuit_value >= 0.0 ? 1 : 0; }

int sign_baseline_predict(const qsim::AnsatzSpec& spec, std::span<const double> theta,
                          std::span<const double> features) {
  return sign_baseline_predict(qsim::circuit_value(spec, theta, features));
}

TrainResult train(const GqcConfig& config, const data::Dataset& train_set,
                  const data::Dataset* validation) {
  config.validate();
  train_set.validate();
  if (train_set.size() == 0) throw InputError("gqc train: empty training set");

  TrainResult result{GqcModel::initialize(config), {}};
  GqcModel& model = result.model;
  model.check_shape();
  check_batch(model, train_set.features, train_set.labels);

  const bool use_validation = validation != nullptr && validation->size() > 0 &&
                              validation->positives() > 0 &&
                              validation->positives() < validation->size();
  neural::OptimizerState opt;
  opt.config.learning_rate = config.learning_rate;
  Rng order_rng(derive_seed(config.seed, 5));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  GqcModel best = model;
  double best_ap = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    order_rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const FeatureMatrix xb = train_set.features.select_rows(idx);
      std::vector<int> yb;
      for (std::size_t i : idx) yb.push_back(train_set.labels[i]);

      auto lg = loss_and_gradients(model, xb, yb, config.lambda);
      if (!std::isfinite(lg.loss.total)) {
        throw NumericError("gqc train: non-finite loss at epoch " + std::to_string(epoch) +
                           " (L_R = " + std::to_string(lg.loss.reconstruction) +
                           ", L_C = " + std::to_string(lg.loss.classification) + ")");
      }
      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      for (auto v : model.encoder.views()) params.push_back(v);
      for (auto v : model.decoder.views()) params.push_back(v);
      for (auto v : model.head.views()) params.push_back(v);
      params.emplace_back(model.theta);
      const auto& cg = lg.grads;
      for (auto v : std::as_const(cg.encoder).views()) grads.push_back(v);
      for (auto v : std::as_const(cg.decoder).views()) grads.push_back(v);
      for (auto v : std::as_const(cg.head).views()) grads.push_back(v);
      grads.emplace_back(cg.theta);
      neural::optimizer_step(opt, params, grads);
      model.encoder.touch();
      model.decoder.touch();
      model.head.touch();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = total_loss(model, train_set.features, train_set.labels, config.lambda);
    if (!std::isfinite(rec.train.total)) {
      throw NumericError("gqc train: non-finite training loss after epoch " + std::to_string(epoch));
    }
    rec.validation_ap = std::numeric_limits<double>::quiet_NaN();
    if (use_validation) {
      const auto probs = predict_proba(model, validation->features);
      rec.validation_ap = metrics::average_precision(probs, validation->labels);
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.report.epochs.push_back(rec);

    if (use_validation) {
      if (rec.validation_ap > best_ap) {
        best_ap = rec.validation_ap;
        best = model;
        result.report.best_epoch = epoch;
        since_best = 0;
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        result.report.early_stopped = true;
        break;
      }
    } else {
      result.report.best_epoch = epoch;
    }
  }
  if (use_validation) model = std::move(best);
  return result;
}

}  // namespace qmoe::hybrid

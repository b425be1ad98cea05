#include <cmath>
#include <string>

#include "qmoe/error.hpp"
#include "qmoe/neural.hpp"

namespace qmoe::neural {
namespace {

double activate(Activation a, double x, double scale) {
  switch (a) {
    case Activation::Linear: return x;
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::ScaledTanh: return scale * std::tanh(x);
  }
  return x;
}

// Derivative expressed through the pre-activation.
double activate_grad(Activation a, double x, double scale) {
  switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::ScaledTanh: {
      const double t = std::tanh(x);
      return scale * (1.0 - t * t);
    }
  }
  return 1.0;
}

Vector apply_activation(Activation a, const Vector& z, double scale) {
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = activate(a, z[i], scale);
  return out;
}

void check_input(const MlpSpec& spec, const MlpParams& params, const Vector& input) {
  params.check_shape(spec);
  if (static_cast<std::size_t>(input.size()) != spec.input_size()) {
    throw ConfigError("mlp: input has " + std::to_string(input.size()) + " entries, expected " +
                      std::to_string(spec.input_size()));
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("MlpSpec: need at least two layer sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("MlpSpec: layer sizes must be positive");
  }
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_sizes[l]);
    const auto out = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
    p.layers.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
  }
  return p;
}

MlpParams MlpParams::initialize(const MlpSpec& spec, Rng& rng) {
  MlpParams p = zeros(spec);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    auto& w = p.layers[l].weights;
    const double fan_in = static_cast<double>(w.cols());
    const double fan_out = static_cast<double>(w.rows());
    const double limit = spec.activation_of(l) == Activation::ReLU
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    // Column-major fill order is fixed by Eigen's storage.
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
    }
  }
  return p;
}

std::size_t MlpParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

std::vector<std::span<double>> MlpParams::views() {
  std::vector<std::span<double>> v;
  for (auto& l : layers) {
    v.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    v.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return v;
}

std::vector<std::span<const double>> MlpParams::views() const {
  std::vector<std::span<const double>> v;
  for (const auto& l : layers) {
    v.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    v.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return v;
}

void MlpParams::check_shape(const MlpSpec& spec) const {
  spec.validate();
  if (layers.size() != spec.n_layers()) throw ConfigError("mlp: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_sizes[l]);
    const auto out = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
    if (layers[l].weights.rows() != out || layers[l].weights.cols() != in ||
        layers[l].bias.size() != out) {
      throw ConfigError("mlp: layer " + std::to_string(l) + " shape mismatch");
    }
  }
}

ForwardResult mlp_forward(const MlpSpec& spec, const MlpParams& params, const Vector& input) {
  check_input(spec, params, input);
  ForwardResult r;
  r.cache.params = &params;
  r.cache.generation = params.generation;
  Vector a = input;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    Vector z = params.layers[l].weights * a + params.layers[l].bias;
    r.cache.inputs.push_back(std::move(a));
    a = apply_activation(spec.activation_of(l), z, spec.output_scale);
    r.cache.pre_activations.push_back(std::move(z));
  }
  r.output = std::move(a);
  return r;
}

Vector mlp_predict(const MlpSpec& spec, const MlpParams& params, const Vector& input) {
  check_input(spec, params, input);
  Vector a = input;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    Vector z = params.layers[l].weights * a + params.layers[l].bias;
    a = apply_activation(spec.activation_of(l), z, spec.output_scale);
  }
  return a;
}

MlpGradients mlp_backward(const MlpSpec& spec, const MlpParams& params, const MlpCache& cache,
                          const Vector& upstream) {
  if (cache.params != &params || cache.generation != params.generation ||
      cache.inputs.size() != spec.n_layers()) {
    throw MisuseError("mlp_backward: cache does not belong to the current parameters");
  }
  if (static_cast<std::size_t>(upstream.size()) != spec.output_size()) {
    throw ConfigError("mlp_backward: upstream gradient has the wrong length");
  }
  MlpGradients g;
  g.params = MlpParams::zeros(spec);
  Vector delta = upstream;
  for (std::size_t l = spec.n_layers(); l-- > 0;) {
    const Vector& z = cache.pre_activations[l];
    const Activation act = spec.activation_of(l);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      delta[i] *= activate_grad(act, z[i], spec.output_scale);
    }
    g.params.layers[l].weights.noalias() = delta * cache.inputs[l].transpose();
    g.params.layers[l].bias = delta;
    delta = params.layers[l].weights.transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

void accumulate(MlpParams& dst, const MlpParams& src, double scale) {
  if (dst.layers.size() != src.layers.size()) throw ConfigError("accumulate: shape mismatch");
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    dst.layers[l].weights += scale * src.layers[l].weights;
    dst.layers[l].bias += scale * src.layers[l].bias;
  }
}

}  // namespace qmoe::neural

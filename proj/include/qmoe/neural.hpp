#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qmoe/rng.hpp"

namespace qmoe::neural {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { Linear, ReLU, Sigmoid, Tanh, ScaledTanh };

/// Layer widths from input to output. Hidden layers share one activation;
/// ScaledTanh computes output_scale * tanh(x).
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation hidden = Activation::ReLU;
  Activation output = Activation::Linear;
  double output_scale = 1.0;

  std::size_t n_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == n_layers() ? output : hidden;
  }
  void validate() const;
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  /// Bumped on every in-library mutation; forward caches remember it.
  std::uint64_t generation = 0;

  static MlpParams zeros(const MlpSpec& spec);
  /// He-uniform for ReLU layers, Glorot-uniform otherwise; zero biases.
  static MlpParams initialize(const MlpSpec& spec, Rng& rng);

  std::size_t scalar_count() const;
  /// Contiguous views over every weight matrix and bias vector, layer by layer.
  std::vector<std::span<double>> views();
  std::vector<std::span<const double>> views() const;
  void check_shape(const MlpSpec& spec) const;
  void touch() { ++generation; }
};

struct MlpCache {
  std::vector<Vector> inputs;          // input to each layer
  std::vector<Vector> pre_activations; // affine output of each layer
  const MlpParams* params = nullptr;
  std::uint64_t generation = 0;
};

struct ForwardResult {
  Vector output;
  MlpCache cache;
};

ForwardResult mlp_forward(const MlpSpec& spec, const MlpParams& params, const Vector& input);

/// Same arithmetic as mlp_forward without keeping a cache.
Vector mlp_predict(const MlpSpec& spec, const MlpParams& params, const Vector& input);

struct MlpGradients {
  MlpParams params;  // same shape as the network
  Vector input;
};

/// Reverse-mode pass from dLoss/dOutput. ReLU uses subgradient 0 at 0.
MlpGradients mlp_backward(const MlpSpec& spec, const MlpParams& params, const MlpCache& cache,
                          const Vector& upstream);

/// Adds `src` into `dst` (same shapes).
void accumulate(MlpParams& dst, const MlpParams& src, double scale = 1.0);

struct LossResult {
  double loss = 0.0;
  Vector grad;
};

/// Mean squared error between target x and prediction y; grad is w.r.t. y.
LossResult mse_loss(const Vector& x, const Vector& y);

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross entropy; probabilities clamped to [1e-7, 1 - 1e-7].
/// The gradient is w.r.t. the unclamped probabilities and is zero where
/// the clamp is active.
LossResult bce_loss(const Vector& labels, const Vector& probs);

double sigmoid(double x);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for an ordered list of parameter blocks. Moments are sized
/// on the first step; later steps must present identically shaped blocks.
struct OptimizerState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
};

void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads);

void optimizer_step(OptimizerState& state, MlpParams& params, const MlpParams& grads);

}  // namespace qmoe::neural

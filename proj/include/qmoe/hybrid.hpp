#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qmoe/data.hpp"
#include "qmoe/matrix.hpp"
#include "qmoe/neural.hpp"
#include "qmoe/qsim.hpp"

namespace qmoe::hybrid {

struct GqcConfig {
  std::size_t input_dim = data::kFeatureCount;
  std::vector<std::size_t> encoder_hidden{256, 128, 64};
  std::size_t n_qubits = 6;  // latent width
  std::size_t n_layers = 6;
  std::size_t head_hidden = 8;
  /// Head reads <Z_q> of every qubit instead of only the measured one.
  bool head_all_qubits = false;
  double lambda = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  /// Epochs without validation-AP improvement before stopping; 0 disables.
  std::size_t patience = 5;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Encoder -> pi*tanh latent angles -> ansatz -> head, with a mirrored decoder
/// that only contributes the reconstruction loss.
struct GqcModel {
  GqcConfig config;
  neural::MlpSpec encoder_spec;
  neural::MlpSpec decoder_spec;
  neural::MlpSpec head_spec;
  neural::MlpParams encoder;
  neural::MlpParams decoder;
  neural::MlpParams head;
  std::vector<double> theta;

  /// Randomly initialized from config.seed.
  static GqcModel initialize(const GqcConfig& config);
  /// Every weight, bias and circuit angle zero.
  static GqcModel zeros(const GqcConfig& config);

  qsim::AnsatzSpec ansatz() const;
  std::size_t head_input_size() const;
  void check_shape() const;
};

struct GqcOutput {
  neural::Vector reconstruction;
  double prob = 0.5;
  std::vector<double> angles;
  double vqc_value = 1.0;           // <Z> of the measured qubit
  std::vector<double> head_inputs;  // what the head consumed
};

/// Elementwise pi * tanh(z); always inside (-pi, pi).
std::vector<double> latent_to_angles(const neural::Vector& latent);

GqcOutput gqc_forward(const GqcModel& model, std::span<const double> x);

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;  // mean MSE over non-fraud rows, 0 if none
  double classification = 0.0;  // mean BCE over all rows
};

LossBreakdown total_loss(const GqcModel& model, const FeatureMatrix& x, std::span<const int> y,
                         double lambda);

struct GqcGradients {
  neural::MlpParams encoder;
  neural::MlpParams decoder;
  neural::MlpParams head;
  std::vector<double> theta;
};

struct LossAndGradients {
  LossBreakdown loss;
  GqcGradients grads;
};

/// Loss and exact gradients of the batch. Per-row work (including the
/// parameter-shift evaluations) runs on OpenMP threads; row contributions are
/// summed in row order.
LossAndGradients loss_and_gradients(const GqcModel& model, const FeatureMatrix& x,
                                    std::span<const int> y, double lambda);

/// Single-threaded reference for loss_and_gradients.
LossAndGradients loss_and_gradients_serial(const GqcModel& model, const FeatureMatrix& x,
                                           std::span<const int> y, double lambda);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  double validation_ap = 0.0;  // NaN when no usable validation set
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

struct TrainResult {
  GqcModel model;
  TrainReport report;
};

/// Mini-batch joint training under lambda * L_R + (1 - lambda) * L_C with one
/// Adam optimizer over encoder, decoder, circuit and head. The model with the
/// best validation AP is returned when a validation set with both classes is
/// given.
TrainResult train(const GqcConfig& config, const data::Dataset& train_set,
                  const data::Dataset* validation = nullptr);

/// Row-parallel inference.
std::vector<double> predict_proba(const GqcModel& model, const FeatureMatrix& x);
std::vector<double> predict_proba_serial(const GqcModel& model, const FeatureMatrix& x);

/// Hard label of the sign readout: (sign(C) + 1) / 2 with sign(0) = +1.
int sign_baseline_predict(double circuit_value);
int sign_baseline_predict(const qsim::AnsatzSpec& spec, std::span<const double> theta,
                          std::span<const double> features);

}  // namespace qmoe::hybrid

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace qmoe::qsim {

using Amplitude = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 16;

struct RY {
  std::size_t qubit;
  double angle;
};
struct RZ {
  std::size_t qubit;
  double angle;
};
struct CNOT {
  std::size_t control;
  std::size_t target;
};
using Gate = std::variant<RY, RZ, CNOT>;

/// Kernel family used by StateVector::apply.
enum class Backend { Auto, Serial, Parallel };

/// Pure state over n qubits. Qubit 0 is the most significant bit of the
/// basis-state index; global phase is not tracked.
class StateVector {
 public:
  /// |0...0>
  explicit StateVector(std::size_t n_qubits);

  /// Takes ownership of explicit amplitudes; length must be a power of two.
  static StateVector from_amplitudes(std::vector<Amplitude> amplitudes);

  std::size_t n_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return amplitudes_.size(); }
  std::span<const Amplitude> amplitudes() const { return amplitudes_; }

  void apply(const Gate& gate, Backend backend = Backend::Auto);

  double norm_squared() const;

 private:
  StateVector() = default;
  std::size_t n_qubits_ = 0;
  std::vector<Amplitude> amplitudes_;
};

StateVector apply_gate(StateVector state, const Gate& gate);

/// Check indices and angle of a gate against a register size.
void validate_gate(const Gate& gate, std::size_t n_qubits);

/// Alternating layered ansatz: per layer, RY on every qubit, RZ on every
/// qubit, then the CNOT ring 0->1, ..., (n-2)->(n-1), (n-1)->0. The ring is
/// omitted for a single qubit. Within a layer the RY angles come first
/// (one per qubit, in qubit order), followed by the RZ angles.
struct AnsatzSpec {
  std::size_t n_qubits = 1;
  std::size_t n_layers = 1;
  std::size_t measured_qubit = 0;

  std::size_t param_count() const { return 2 * n_qubits * n_layers; }
  void validate() const;
};

/// Gate list of the ansatz in application order.
std::vector<Gate> ansatz_gates(const AnsatzSpec& spec, std::span<const double> params);

/// Tensor product of RY(x_k)|0> over qubits.
StateVector angle_encode(std::span<const double> features);

StateVector ansatz_forward(const AnsatzSpec& spec, std::span<const double> params,
                           StateVector encoded);

double expectation_z(const StateVector& state, std::size_t qubit);
std::vector<double> expectation_z_all(const StateVector& state);

/// <Z_m> after encoding `features` and applying the ansatz, m = spec.measured_qubit.
double circuit_value(const AnsatzSpec& spec, std::span<const double> params,
                     std::span<const double> features);

/// <Z_q> for every qubit q of the same circuit.
std::vector<double> circuit_values(const AnsatzSpec& spec, std::span<const double> params,
                                   std::span<const double> features);

struct CircuitGradient {
  std::vector<double> params;
  std::vector<double> features;
};

/// Parameter-shift derivatives of circuit_value with respect to every circuit
/// parameter and every encoding angle. Shift evaluations are spread over
/// OpenMP threads; each lands in its own slot so the result is deterministic.
CircuitGradient parameter_shift_grad(const AnsatzSpec& spec, std::span<const double> params,
                                     std::span<const double> features);

/// Single-threaded reference for parameter_shift_grad.
CircuitGradient parameter_shift_grad_serial(const AnsatzSpec& spec,
                                            std::span<const double> params,
                                            std::span<const double> features);

/// Jacobian of circuit_values: row-major, n_qubits rows.
struct CircuitJacobian {
  std::size_t n_outputs = 0;
  std::vector<double> params;    // n_outputs x param_count
  std::vector<double> features;  // n_outputs x n_qubits
};

CircuitJacobian parameter_shift_jacobian(const AnsatzSpec& spec, std::span<const double> params,
                                         std::span<const double> features);

}  // namespace qmoe::qsim

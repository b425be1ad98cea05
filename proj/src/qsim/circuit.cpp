#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <type_traits>

#include "qmoe/error.hpp"
#include "qmoe/qsim.hpp"
#include "qmoe/qsim_kernels.hpp"

namespace qmoe::qsim {
namespace {

constexpr double kShift = std::numbers::pi / 2.0;

void check_qubit(std::size_t qubit, std::size_t n_qubits, const char* what) {
  if (qubit >= n_qubits) {
    throw ConfigError(std::string(what) + " index " + std::to_string(qubit) +
                      " out of range for " + std::to_string(n_qubits) + " qubits");
  }
}

void check_angle(double angle) {
  if (!std::isfinite(angle)) throw InputError("gate angle is not finite");
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError(std::string(what) + " contains a non-finite entry");
  }
}

void check_dims(const AnsatzSpec& spec, std::span<const double> params,
                std::span<const double> features) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw ConfigError("ansatz expects " + std::to_string(spec.param_count()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  if (features.size() != spec.n_qubits) {
    throw InputError("ansatz over " + std::to_string(spec.n_qubits) + " qubits got " +
                     std::to_string(features.size()) + " features");
  }
}

// Forward pass without re-validating; used in the shift loops.
StateVector run_circuit(const AnsatzSpec& spec, std::span<const double> params,
                        std::span<const double> features) {
  return ansatz_forward(spec, params, angle_encode(features));
}

}  // namespace

StateVector::StateVector(std::size_t n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits == 0 || n_qubits > kMaxQubits) {
    throw ConfigError("StateVector: qubit count must be in [1, " + std::to_string(kMaxQubits) +
                      "], got " + std::to_string(n_qubits));
  }
  amplitudes_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
  amplitudes_[0] = 1.0;
}

StateVector StateVector::from_amplitudes(std::vector<Amplitude> amplitudes) {
  const std::size_t dim = amplitudes.size();
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw ConfigError("StateVector: amplitude count must be a power of two >= 2");
  }
  StateVector s;
  s.n_qubits_ = static_cast<std::size_t>(std::countr_zero(dim));
  if (s.n_qubits_ > kMaxQubits) throw ConfigError("StateVector: too many qubits");
  s.amplitudes_ = std::move(amplitudes);
  return s;
}

double StateVector::norm_squared() const {
  double acc = 0.0;
  for (const auto& a : amplitudes_) acc += std::norm(a);
  return acc;
}

void validate_gate(const Gate& gate, std::size_t n_qubits) {
  std::visit(
      [n_qubits](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, CNOT>) {
          check_qubit(g.control, n_qubits, "CNOT control");
          check_qubit(g.target, n_qubits, "CNOT target");
          if (g.control == g.target) throw ConfigError("CNOT control equals target");
        } else {
          check_qubit(g.qubit, n_qubits, "rotation qubit");
          check_angle(g.angle);
        }
      },
      gate);
}

void StateVector::apply(const Gate& gate, Backend backend) {
  validate_gate(gate, n_qubits_);
  const bool parallel = backend == Backend::Parallel ||
                        (backend == Backend::Auto && n_qubits_ >= kernels::kParallelMinQubits);
  std::span<Amplitude> amps(amplitudes_);
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, RY>) {
          parallel ? kernels::omp::ry(amps, n_qubits_, g.qubit, g.angle)
                   : kernels::serial::ry(amps, n_qubits_, g.qubit, g.angle);
        } else if constexpr (std::is_same_v<G, RZ>) {
          parallel ? kernels::omp::rz(amps, n_qubits_, g.qubit, g.angle)
                   : kernels::serial::rz(amps, n_qubits_, g.qubit, g.angle);
        } else {
          parallel ? kernels::omp::cnot(amps, n_qubits_, g.control, g.target)
                   : kernels::serial::cnot(amps, n_qubits_, g.control, g.target);
        }
      },
      gate);
}

StateVector apply_gate(StateVector state, const Gate& gate) {
  state.apply(gate);
  return state;
}

void AnsatzSpec::validate() const {
  if (n_qubits == 0 || n_qubits > kMaxQubits) {
    throw ConfigError("AnsatzSpec: n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
  }
  if (n_layers == 0) throw ConfigError("AnsatzSpec: n_layers must be positive");
  check_qubit(measured_qubit, n_qubits, "measured qubit");
}

std::vector<Gate> ansatz_gates(const AnsatzSpec& spec, std::span<const double> params) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw ConfigError("ansatz expects " + std::to_string(spec.param_count()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  const std::size_t n = spec.n_qubits;
  std::vector<Gate> gates;
  gates.reserve(spec.n_layers * (3 * n));
  for (std::size_t layer = 0; layer < spec.n_layers; ++layer) {
    const std::size_t base = 2 * n * layer;
    for (std::size_t q = 0; q < n; ++q) gates.emplace_back(RY{q, params[base + q]});
    for (std::size_t q = 0; q < n; ++q) gates.emplace_back(RZ{q, params[base + n + q]});
    if (n > 1) {
      for (std::size_t q = 0; q + 1 < n; ++q) gates.emplace_back(CNOT{q, q + 1});
      gates.emplace_back(CNOT{n - 1, 0});
    }
  }
  return gates;
}

StateVector angle_encode(std::span<const double> features) {
  if (features.empty() || features.size() > kMaxQubits) {
    throw InputError("angle_encode: feature count must be in [1, " +
                     std::to_string(kMaxQubits) + "]");
  }
  check_finite(features, "angle_encode features");
  StateVector state(features.size());
  for (std::size_t q = 0; q < features.size(); ++q) state.apply(RY{q, features[q]});
  return state;
}

StateVector ansatz_forward(const AnsatzSpec& spec, std::span<const double> params,
                           StateVector encoded) {
  if (encoded.n_qubits() != spec.n_qubits) {
    throw ConfigError("ansatz_forward: state has " + std::to_string(encoded.n_qubits()) +
                      " qubits, ansatz " + std::to_string(spec.n_qubits));
  }
  for (const Gate& g : ansatz_gates(spec, params)) encoded.apply(g);
  return encoded;
}

double expectation_z(const StateVector& state, std::size_t qubit) {
  check_qubit(qubit, state.n_qubits(), "measured qubit");
  return kernels::serial::expectation_z(state.amplitudes(), state.n_qubits(), qubit);
}

std::vector<double> expectation_z_all(const StateVector& state) {
  std::vector<double> out(state.n_qubits());
  for (std::size_t q = 0; q < out.size(); ++q) out[q] = expectation_z(state, q);
  return out;
}

double circuit_value(const AnsatzSpec& spec, std::span<const double> params,
                     std::span<const double> features) {
  check_dims(spec, params, features);
  return expectation_z(run_circuit(spec, params, features), spec.measured_qubit);
}

std::vector<double> circuit_values(const AnsatzSpec& spec, std::span<const double> params,
                                   std::span<const double> features) {
  check_dims(spec, params, features);
  return expectation_z_all(run_circuit(spec, params, features));
}

namespace {

// Shift slot s < P shifts params[s]; slot P + k shifts features[k].
template <typename Eval>
double shifted_difference(std::span<const double> params, std::span<const double> features,
                          std::size_t slot, Eval&& eval) {
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> f(features.begin(), features.end());
  double& target = slot < p.size() ? p[slot] : f[slot - p.size()];
  const double original = target;
  target = original + kShift;
  const double plus = eval(p, f);
  target = original - kShift;
  const double minus = eval(p, f);
  return 0.5 * (plus - minus);
}

CircuitGradient grad_impl(const AnsatzSpec& spec, std::span<const double> params,
                          std::span<const double> features, bool parallel) {
  check_dims(spec, params, features);
  check_finite(params, "circuit parameters");
  check_finite(features, "encoding angles");
  const std::size_t n_params = params.size();
  const auto n_slots = static_cast<std::int64_t>(n_params + features.size());
  std::vector<double> slots(static_cast<std::size_t>(n_slots));
  auto eval = [&spec](const std::vector<double>& p, const std::vector<double>& f) {
    return expectation_z(run_circuit(spec, p, f), spec.measured_qubit);
  };
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t s = 0; s < n_slots; ++s) {
    slots[static_cast<std::size_t>(s)] =
        shifted_difference(params, features, static_cast<std::size_t>(s), eval);
  }
  CircuitGradient g;
  g.params.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(n_params));
  g.features.assign(slots.begin() + static_cast<std::ptrdiff_t>(n_params), slots.end());
  return g;
}

}  // namespace

CircuitGradient parameter_shift_grad(const AnsatzSpec& spec, std::span<const double> params,
                                     std::span<const double> features) {
  return grad_impl(spec, params, features, true);
}

CircuitGradient parameter_shift_grad_serial(const AnsatzSpec& spec,
                                            std::span<const double> params,
                                            std::span<const double> features) {
  return grad_impl(spec, params, features, false);
}

CircuitJacobian parameter_shift_jacobian(const AnsatzSpec& spec, std::span<const double> params,
                                         std::span<const double> features) {
  check_dims(spec, params, features);
  check_finite(params, "circuit parameters");
  check_finite(features, "encoding angles");
  const std::size_t n_params = params.size();
  const std::size_t n_out = spec.n_qubits;
  const auto n_slots = static_cast<std::int64_t>(n_params + features.size());
  // columns[s] holds d<Z_q>/d(slot s) for every q.
  std::vector<std::vector<double>> columns(static_cast<std::size_t>(n_slots));
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n_slots; ++s) {
    std::vector<double> p(params.begin(), params.end());
    std::vector<double> f(features.begin(), features.end());
    const auto slot = static_cast<std::size_t>(s);
    double& target = slot < n_params ? p[slot] : f[slot - n_params];
    const double original = target;
    target = original + kShift;
    const auto plus = expectation_z_all(run_circuit(spec, p, f));
    target = original - kShift;
    const auto minus = expectation_z_all(run_circuit(spec, p, f));
    auto& col = columns[slot];
    col.resize(n_out);
    for (std::size_t q = 0; q < n_out; ++q) col[q] = 0.5 * (plus[q] - minus[q]);
  }
  CircuitJacobian jac;
  jac.n_outputs = n_out;
  jac.params.assign(n_out * n_params, 0.0);
  jac.features.assign(n_out * features.size(), 0.0);
  for (std::size_t q = 0; q < n_out; ++q) {
    for (std::size_t s = 0; s < n_params; ++s) jac.params[q * n_params + s] = columns[s][q];
    for (std::size_t k = 0; k < features.size(); ++k) {
      jac.features[q * features.size() + k] = columns[n_params + k][q];
    }
  }
  return jac;
}

}  // namespace qmoe::qsim

#pragma once

// In-place single-gate kernels over a raw amplitude buffer. Qubit 0 is the most
// significant bit of the basis index. Each gate visits disjoint amplitude pairs,
// so the OpenMP variants produce results bit-identical to the serial ones.

#include <complex>
#include <cstddef>
#include <span>

namespace qmoe::qsim::kernels {

using Amplitude = std::complex<double>;

/// States with at least this many qubits use the OpenMP kernels by default.
inline constexpr std::size_t kParallelMinQubits = 12;

namespace serial {
void ry(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle);
void rz(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle);
void cnot(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t control,
          std::size_t target);
double expectation_z(std::span<const Amplitude> amps, std::size_t n_qubits,
                     std::size_t qubit);
}  // namespace serial

namespace omp {
void ry(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle);
void rz(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle);
void cnot(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t control,
          std::size_t target);
}  // namespace omp

}  // namespace qmoe::qsim::kernels

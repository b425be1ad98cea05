#include "qmoe/qsim_kernels.hpp"

#include <cmath>
#include <cstdint>
#include <utility>

namespace qmoe::qsim::kernels {
namespace {

std::size_t bit_of(std::size_t n_qubits, std::size_t qubit) {
  return std::size_t{1} << (n_qubits - 1 - qubit);
}

// k-th index (of dim/2) whose bit `stride` is zero.
inline std::size_t insert_zero(std::size_t k, std::size_t stride) {
  return ((k & ~(stride - 1)) << 1) | (k & (stride - 1));
}

inline void ry_pair(Amplitude* a, std::size_t k, std::size_t stride, double c, double s) {
  const std::size_t i0 = insert_zero(k, stride);
  const std::size_t i1 = i0 | stride;
  const Amplitude v0 = a[i0];
  const Amplitude v1 = a[i1];
  a[i0] = c * v0 - s * v1;
  a[i1] = s * v0 + c * v1;
}

inline void rz_entry(Amplitude* a, std::size_t i, std::size_t stride, Amplitude lo,
                     Amplitude hi) {
  a[i] *= (i & stride) ? hi : lo;
}

inline void cnot_pair(Amplitude* a, std::size_t k, std::size_t cbit, std::size_t tbit) {
  const std::size_t i0 = insert_zero(k, tbit);
  if (i0 & cbit) std::swap(a[i0], a[i0 | tbit]);
}

}  // namespace

namespace serial {

void ry(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle) {
  const std::size_t stride = bit_of(n_qubits, qubit);
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const std::size_t half = amps.size() / 2;
  for (std::size_t k = 0; k < half; ++k) ry_pair(amps.data(), k, stride, c, s);
}

void rz(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle) {
  const std::size_t stride = bit_of(n_qubits, qubit);
  const Amplitude lo = std::polar(1.0, -angle / 2.0);
  const Amplitude hi = std::polar(1.0, angle / 2.0);
  for (std::size_t i = 0; i < amps.size(); ++i) rz_entry(amps.data(), i, stride, lo, hi);
}

void cnot(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t control,
          std::size_t target) {
  const std::size_t cbit = bit_of(n_qubits, control);
  const std::size_t tbit = bit_of(n_qubits, target);
  const std::size_t half = amps.size() / 2;
  for (std::size_t k = 0; k < half; ++k) cnot_pair(amps.data(), k, cbit, tbit);
}

double expectation_z(std::span<const Amplitude> amps, std::size_t n_qubits,
                     std::size_t qubit) {
  const std::size_t stride = bit_of(n_qubits, qubit);
  double acc = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    acc += (i & stride) ? -p : p;
  }
  return acc;
}

}  // namespace serial

namespace omp {

void ry(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle) {
  const std::size_t stride = bit_of(n_qubits, qubit);
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const auto half = static_cast<std::int64_t>(amps.size() / 2);
  Amplitude* a = amps.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < half; ++k) ry_pair(a, static_cast<std::size_t>(k), stride, c, s);
}

void rz(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t qubit, double angle) {
  const std::size_t stride = bit_of(n_qubits, qubit);
  const Amplitude lo = std::polar(1.0, -angle / 2.0);
  const Amplitude hi = std::polar(1.0, angle / 2.0);
  const auto dim = static_cast<std::int64_t>(amps.size());
  Amplitude* a = amps.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < dim; ++i) rz_entry(a, static_cast<std::size_t>(i), stride, lo, hi);
}

void cnot(std::span<Amplitude> amps, std::size_t n_qubits, std::size_t control,
          std::size_t target) {
  const std::size_t cbit = bit_of(n_qubits, control);
  const std::size_t tbit = bit_of(n_qubits, target);
  const auto half = static_cast<std::int64_t>(amps.size() / 2);
  Amplitude* a = amps.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < half; ++k) cnot_pair(a, static_cast<std::size_t>(k), cbit, tbit);
}

}  // namespace omp
}  // namespace qmoe::qsim::kernels

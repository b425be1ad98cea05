#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "qmoe/error.hpp"
#include "qmoe/qsim.hpp"
#include "qmoe/qsim_kernels.hpp"
#include "qmoe/rng.hpp"
#include "support/oracles.hpp"

using namespace qmoe;
using namespace qmoe::qsim;
constexpr double kPi = std::numbers::pi;

namespace {

std::vector<double> random_angles(Rng& rng, std::size_t n, double span = 2 * kPi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-span, span);
  return v;
}

StateVector random_state(Rng& rng, std::size_t n) {
  std::vector<Amplitude> a(std::size_t{1} << n);
  double norm = 0;
  for (auto& c : a) {
    c = {rng.normal(), rng.normal()};
    norm += std::norm(c);
  }
  for (auto& c : a) c /= std::sqrt(norm);
  return StateVector::from_amplitudes(std::move(a));
}

}  // namespace

TEST_CASE("RY(pi) flips |0> to |1>") {
  StateVector s(1);
  s.apply(RY{0, kPi});
  CHECK(std::abs(s.amplitudes()[0]) < 1e-15);
  CHECK(std::abs(s.amplitudes()[1] - Amplitude(1, 0)) < 1e-15);
}

TEST_CASE("RZ leaves <Z> of |0> at 1") {
  for (double a : {0.0, 0.3, -2.0, 17.5}) {
    StateVector s(1);
    s.apply(RZ{0, a});
    CHECK(expectation_z(s, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("every gate on a random 3-qubit state matches the dense unitary") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_state(rng, 3);
    std::vector<Gate> gates;
    for (std::size_t q = 0; q < 3; ++q) {
      gates.push_back(RY{q, rng.uniform(-4, 4)});
      gates.push_back(RZ{q, rng.uniform(-4, 4)});
      for (std::size_t t = 0; t < 3; ++t) {
        if (t != q) gates.push_back(CNOT{q, t});
      }
    }
    for (const auto& g : gates) {
      const auto out = apply_gate(s, g);
      const oracle::CVector want = oracle::gate_matrix(g, 3) * oracle::to_eigen(s.amplitudes());
      CHECK((oracle::to_eigen(out.amplitudes()) - want).norm() < 1e-12);
    }
  }
}

TEST_CASE("gate validation") {
  StateVector s(2);
  CHECK_THROWS_AS(s.apply(RY{2, 0.1}), ConfigError);
  CHECK_THROWS_AS(s.apply(CNOT{0, 0}), ConfigError);
  CHECK_THROWS_AS(s.apply(CNOT{0, 5}), ConfigError);
  CHECK_THROWS_AS(s.apply(RZ{0, std::nan("")}), InputError);
  CHECK_THROWS_AS(s.apply(RY{0, INFINITY}), InputError);
  CHECK_THROWS_AS(StateVector(0), ConfigError);
  CHECK_THROWS_AS(StateVector(kMaxQubits + 1), ConfigError);
  CHECK_THROWS_AS(StateVector::from_amplitudes(std::vector<Amplitude>(3)), ConfigError);
}

TEST_CASE("angle encoding") {
  SUBCASE("zero features give |0...0>") {
    const std::vector<double> f(4, 0.0);
    const auto s = angle_encode(f);
    CHECK(s.amplitudes()[0] == Amplitude(1, 0));
    CHECK(expectation_z(s, 0) == 1.0);
  }
  SUBCASE("single qubit at pi/2") {
    const std::vector<double> f{kPi / 2};
    const auto s = angle_encode(f);
    CHECK(s.amplitudes()[0].real() == doctest::Approx(std::cos(kPi / 4)).epsilon(1e-15));
    CHECK(s.amplitudes()[1].real() == doctest::Approx(std::sin(kPi / 4)).epsilon(1e-15));
  }
  SUBCASE("(pi, 0) is |10>") {
    const std::vector<double> f{kPi, 0.0};
    const auto s = angle_encode(f);
    CHECK(std::abs(s.amplitudes()[2] - Amplitude(1, 0)) < 1e-15);
    CHECK(std::abs(s.amplitudes()[0]) < 1e-15);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(angle_encode(std::vector<double>{}), InputError);
  }
}

TEST_CASE("ansatz structure") {
  SUBCASE("zero params on |0...0> stay at |0...0>") {
    AnsatzSpec spec{3, 2};
    const std::vector<double> p(spec.param_count(), 0.0);
    const auto out = ansatz_forward(spec, p, StateVector(3));
    CHECK(std::abs(out.amplitudes()[0] - Amplitude(1, 0)) < 1e-15);
  }
  SUBCASE("4 qubits, 1 layer: RY block, RZ block, ring with wraparound") {
    AnsatzSpec spec{4, 1};
    CHECK(spec.param_count() == 8);
    std::vector<double> p(8);
    for (std::size_t i = 0; i < 8; ++i) p[i] = 0.1 * static_cast<double>(i + 1);
    const auto gates = ansatz_gates(spec, p);
    REQUIRE(gates.size() == 12);
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& ry = std::get<RY>(gates[q]);
      CHECK(ry.qubit == q);
      CHECK(ry.angle == p[q]);
      const auto& rz = std::get<RZ>(gates[4 + q]);
      CHECK(rz.qubit == q);
      CHECK(rz.angle == p[4 + q]);
    }
    const std::pair<std::size_t, std::size_t> ring[] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& c = std::get<CNOT>(gates[8 + k]);
      CHECK(c.control == ring[k].first);
      CHECK(c.target == ring[k].second);
    }
  }
  SUBCASE("a single qubit has no ring") {
    AnsatzSpec spec{1, 3};
    const std::vector<double> p(spec.param_count(), 0.2);
    CHECK(ansatz_gates(spec, p).size() == 6);
  }
  SUBCASE("parameter count mismatch") {
    AnsatzSpec spec{2, 1};
    CHECK_THROWS_AS(ansatz_gates(spec, std::vector<double>(3)), ConfigError);
    CHECK_THROWS_AS(circuit_value(spec, std::vector<double>(4), std::vector<double>(3)), InputError);
  }
  SUBCASE("2 qubits, 1 layer matches the dense product") {
    Rng rng(5);
    AnsatzSpec spec{2, 1};
    for (int t = 0; t < 20; ++t) {
      const auto p = random_angles(rng, 4);
      const auto s0 = random_state(rng, 2);
      const auto out = ansatz_forward(spec, p, s0);
      oracle::CVector want = oracle::to_eigen(s0.amplitudes());
      for (const auto& g : ansatz_gates(spec, p)) want = oracle::gate_matrix(g, 2) * want;
      CHECK((oracle::to_eigen(out.amplitudes()) - want).norm() < 1e-12);
    }
  }
}

TEST_CASE("expectation values") {
  CHECK(expectation_z(StateVector(1), 0) == 1.0);
  StateVector s(1);
  s.apply(RY{0, kPi / 2});
  CHECK(std::abs(expectation_z(s, 0)) < 1e-12);
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto r = random_state(rng, 3);
    const auto psi = oracle::to_eigen(r.amplitudes());
    const auto all = expectation_z_all(r);
    for (std::size_t q = 0; q < 3; ++q) {
      const double want = (psi.adjoint() * oracle::z_full(q, 3) * psi)(0, 0).real();
      CHECK(std::abs(expectation_z(r, q) - want) < 1e-12);
      CHECK(all[q] == expectation_z(r, q));
    }
  }
  CHECK_THROWS_AS(expectation_z(StateVector(2), 2), ConfigError);
}

TEST_CASE("circuit value closed forms") {
  const std::vector<double> zeros6(72, 0.0), zf(6, 0.0);
  CHECK(circuit_value(AnsatzSpec{6, 6}, zeros6, zf) == doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> p{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    CHECK(circuit_value(AnsatzSpec{1, 1}, p, std::vector<double>{0.0}) ==
          doctest::Approx(std::cos(p[0])).epsilon(1e-13));
  }
}

TEST_CASE("circuit value matches the dense oracle up to 6 qubits") {
  Rng rng(21);
  for (std::size_t n = 1; n <= 6; ++n) {
    const std::size_t layers = n == 6 ? 6 : 2;
    AnsatzSpec spec{n, layers};
    for (int t = 0; t < 10; ++t) {
      const auto p = random_angles(rng, spec.param_count());
      const auto f = random_angles(rng, n, kPi);
      const double v = circuit_value(spec, p, f);
      CHECK(std::abs(v - oracle::circuit_value(n, layers, p, f)) < 1e-10);
    }
  }
}

TEST_CASE("measured qubit is configurable") {
  Rng rng(4);
  AnsatzSpec spec{3, 2, 2};
  const auto p = random_angles(rng, spec.param_count());
  const auto f = random_angles(rng, 3);
  CHECK(std::abs(circuit_value(spec, p, f) - oracle::circuit_value(3, 2, p, f, 2)) < 1e-10);
  CHECK(circuit_values(spec, p, f)[2] == circuit_value(spec, p, f));
  CHECK_THROWS_AS((AnsatzSpec{3, 2, 3}.validate()), ConfigError);
}

TEST_CASE("properties: norm, periodicity, range") {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.index(5);
    AnsatzSpec spec{n, 1 + rng.index(3)};
    auto p = random_angles(rng, spec.param_count(), 10);
    const auto f = random_angles(rng, n, 10);
    const auto out = ansatz_forward(spec, p, angle_encode(f));
    CHECK(std::abs(out.norm_squared() - 1.0) < 1e-10);
    const double v = circuit_value(spec, p, f);
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
    const std::size_t i = rng.index(p.size());
    p[i] += 2 * kPi;
    CHECK(std::abs(circuit_value(spec, p, f) - v) < 1e-10);
  }
}

TEST_CASE("parameter shift") {
  SUBCASE("stationary point at zero") {
    const auto g = parameter_shift_grad(AnsatzSpec{1, 1}, std::vector<double>{0.0, 0.0},
                                        std::vector<double>{0.0});
    CHECK(std::abs(g.params[0]) < 1e-15);
  }
  SUBCASE("matches central differences for params and features") {
    Rng rng(123);
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 1 + rng.index(4);
      AnsatzSpec spec{n, 1 + rng.index(3)};
      const auto p = random_angles(rng, spec.param_count());
      const auto f = random_angles(rng, n, kPi);
      const auto g = parameter_shift_grad(spec, p, f);
      const auto fd_p = oracle::central_difference(
          [&](std::span<const double> x) { return circuit_value(spec, x, f); }, p);
      const auto fd_f = oracle::central_difference(
          [&](std::span<const double> x) { return circuit_value(spec, p, x); }, f);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(oracle::close_rel(g.params[i], fd_p[i], 1e-4, 1e-6));
      for (std::size_t i = 0; i < n; ++i) CHECK(oracle::close_rel(g.features[i], fd_f[i], 1e-4, 1e-6));
    }
  }
  SUBCASE("feature gradient vanishes at the maximal circuit") {
    AnsatzSpec spec{3, 2};
    const std::vector<double> p(spec.param_count(), 0.0), f(3, 0.0);
    const auto g = parameter_shift_grad(spec, p, f);
    const auto fd = oracle::central_difference(
        [&](std::span<const double> x) { return circuit_value(spec, p, x); }, f);
    for (std::size_t i = 0; i < 3; ++i) CHECK(oracle::close_rel(g.features[i], fd[i], 1e-4, 1e-6));
  }
  SUBCASE("parallel and serial agree bit for bit") {
    Rng rng(8);
    AnsatzSpec spec{6, 6};
    const auto p = random_angles(rng, spec.param_count());
    const auto f = random_angles(rng, 6);
    const auto a = parameter_shift_grad(spec, p, f);
    const auto b = parameter_shift_grad_serial(spec, p, f);
    CHECK(a.params == b.params);
    CHECK(a.features == b.features);
  }
  SUBCASE("jacobian rows match per-qubit differences") {
    Rng rng(31);
    AnsatzSpec spec{3, 2};
    const auto p = random_angles(rng, spec.param_count());
    const auto f = random_angles(rng, 3);
    const auto jac = parameter_shift_jacobian(spec, p, f);
    REQUIRE(jac.n_outputs == 3);
    for (std::size_t q = 0; q < 3; ++q) {
      const auto fd = oracle::central_difference(
          [&](std::span<const double> x) { return circuit_values(spec, x, f)[q]; }, p);
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(oracle::close_rel(jac.params[q * p.size() + i], fd[i], 1e-4, 1e-6));
      }
      const auto fdf = oracle::central_difference(
          [&](std::span<const double> x) { return circuit_values(spec, p, x)[q]; }, f);
      for (std::size_t i = 0; i < 3; ++i) CHECK(oracle::close_rel(jac.features[q * 3 + i], fdf[i], 1e-4, 1e-6));
    }
  }
}

TEST_CASE("OpenMP kernels agree with serial kernels") {
  Rng rng(2024);
  for (std::size_t n : {1u, 3u, 8u, 13u}) {
    auto base = random_state(rng, n);
    std::vector<Amplitude> a(base.amplitudes().begin(), base.amplitudes().end());
    auto b = a;
    for (std::size_t q = 0; q < n; ++q) {
      const double t = rng.uniform(-3, 3);
      kernels::serial::ry(a, n, q, t);
      kernels::omp::ry(b, n, q, t);
      kernels::serial::rz(a, n, q, -t);
      kernels::omp::rz(b, n, q, -t);
      if (n > 1) {
        kernels::serial::cnot(a, n, q, (q + 1) % n);
        kernels::omp::cnot(b, n, q, (q + 1) % n);
      }
    }
    CHECK(a == b);
  }
  // Backends selected explicitly through StateVector agree as well.
  StateVector s1(12), s2(12);
  for (std::size_t q = 0; q < 12; ++q) {
    s1.apply(RY{q, 0.1 * static_cast<double>(q)}, Backend::Serial);
    s2.apply(RY{q, 0.1 * static_cast<double>(q)}, Backend::Parallel);
  }
  CHECK(std::equal(s1.amplitudes().begin(), s1.amplitudes().end(), s2.amplitudes().begin()));
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "poq/errors.hpp"
#include "poq/sim.hpp"

using namespace poq;
using oracle::Complex;
using oracle::Matrix;

namespace {

constexpr double kPi = std::numbers::pi;

StateVector random_state(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Amplitude> amps(std::size_t{1} << n);
  double norm = 0.0;
  for (auto& a : amps) {
    a = {rng.uniform01() - 0.5, rng.uniform01() - 0.5};
    norm += std::norm(a);
  }
  for (auto& a : amps) a /= std::sqrt(norm);
  return StateVector::from_amplitudes(amps);
}

GateOp random_gate(int n, Rng& rng) {
  const auto kind = static_cast<GateKind>(rng.uniform_below(8));
  const int a = static_cast<int>(rng.uniform_below(n));
  int b = static_cast<int>(rng.uniform_below(n - 1));
  if (b >= a) ++b;
  const double t = 2 * kPi * rng.uniform01();
  switch (kind) {
    case GateKind::h: return GateOp::h(a);
    case GateKind::x: return GateOp::x(a);
    case GateKind::rx: return GateOp::rx(a, t);
    case GateKind::ry: return GateOp::ry(a, t);
    case GateKind::rz: return GateOp::rz(a, t);
    case GateKind::cnot: return GateOp::cnot(a, b);
    case GateKind::xx: return GateOp::xx(a, b, t);
    case GateKind::cphase: return GateOp::cphase(a, b, t);
  }
  return GateOp::h(a);
}

}  // namespace

TEST(Gates, HadamardOnZero) {
  StateVector s(1);
  s.apply(GateOp::h(0));
  EXPECT_NEAR(s.amplitude(0).real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.amplitude(1).real(), 1 / std::sqrt(2.0), 1e-15);
}

TEST(Gates, HadamardIsAnInvolution) {
  auto s = random_state(4, 1);
  const auto before = oracle::to_vector(s);
  for (int q = 0; q < 4; ++q) {
    s.apply(GateOp::h(q));
    s.apply(GateOp::h(q));
  }
  EXPECT_LT((oracle::to_vector(s) - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gates, XxMatchesMatrixExponential) {
  // exp(i pi/4 X(x)X) = (I + i XX) / sqrt(2), built from the Pauli matrices directly.
  const Matrix xx = oracle::kron(oracle::pauli('X'), oracle::pauli('X'));
  const Matrix expected = (Matrix::Identity(4, 4) + Complex(0, 1) * xx) / std::sqrt(2.0);
  for (std::uint64_t k = 0; k < 4; ++k) {
    auto s = StateVector::basis_state(2, k);
    s.apply(GateOp::xx(0, 1, kPi / 4));
    EXPECT_LT((oracle::to_vector(s) - expected.col(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gates, EveryKindMatchesDenseOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_below(3));
    const auto gate = random_gate(n, rng);
    const auto psi = random_state(n, 100 + trial);
    auto s = psi;
    s.apply(gate);
    const oracle::Vector expected = oracle::gate_matrix(gate, n) * oracle::to_vector(psi);
    EXPECT_LT((oracle::to_vector(s) - expected).cwiseAbs().maxCoeff(), 1e-9) << format_gate(gate);
  }
}

TEST(Gates, SequencesMatchDenseOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4;
    std::vector<GateOp> gates;
    for (int k = 0; k < 12; ++k) gates.push_back(random_gate(n, rng));
    auto s = StateVector(n);
    s.apply_all(gates);
    const oracle::Vector expected = oracle::circuit_matrix(gates, n).col(0);
    EXPECT_LT((oracle::to_vector(s) - expected).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Gates, NormPreservedOnTwelveQubits) {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_state(12, trial);
    for (int k = 0; k < 10; ++k) s.apply(random_gate(12, rng));
    EXPECT_NEAR(s.norm_squared(), 1.0, 1e-10);
  }
}

TEST(Gates, InvalidIndicesAreRejected) {
  StateVector s(2);
  EXPECT_THROW(s.apply(GateOp::h(2)), ContractViolation);
  EXPECT_THROW(s.apply(GateOp::cnot(1, 1)), ContractViolation);
  EXPECT_THROW(s.apply(GateOp::xx(0, -1, 0.1)), ContractViolation);
  EXPECT_THROW(StateVector(0), ContractViolation);
  EXPECT_THROW(StateVector(kMaxQubits + 1), ContractViolation);
}

TEST(DiagonalPhase, ZeroPhaseIsIdentity) {
  auto s = random_state(3, 5);
  const auto before = oracle::to_vector(s);
  const std::vector<int> reg{0, 1, 2};
  s.apply_diagonal_phase(reg, [](std::uint64_t) { return 0.0; });
  EXPECT_LT((oracle::to_vector(s) - before).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DiagonalPhase, FactoringPhaseOnBasisState) {
  // N = 8 layout x(2) y(3): x=1, y=1 picks up 2 pi / 8.
  const std::vector<int> reg{0, 1, 2, 3, 4};
  auto s = StateVector::basis_state(5, (1 << 3) | 1);
  s.apply_diagonal_phase(reg, [](std::uint64_t k) {
    const auto x = k >> 3, y = k & 7;
    return 2 * kPi * static_cast<double>(x * x * y) / 8.0;
  });
  EXPECT_NEAR(std::arg(s.amplitude((1 << 3) | 1)), 2 * kPi / 8, 1e-12);
}

TEST(DiagonalPhase, MagnitudesUnchanged) {
  auto s = random_state(4, 8);
  const auto before = oracle::to_vector(s).cwiseAbs().eval();
  const std::vector<int> reg{1, 3};
  const std::vector<double> phases{0.1, 2.0, -1.0, 3.3};
  s.apply_diagonal_phase(reg, phases);
  EXPECT_LT((oracle::to_vector(s).cwiseAbs() - before).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fourier, SingleQubitInverseIsHadamard) {
  auto a = random_state(1, 3);
  auto b = a;
  const std::vector<int> reg{0};
  a.qft_inv(reg);
  b.apply(GateOp::h(0));
  EXPECT_LT((oracle::to_vector(a) - oracle::to_vector(b)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fourier, MatchesDenseDftOnSubregister) {
  // Register {1, 2, 3} of a 5-qubit state; the other qubits untouched.
  const auto psi = random_state(5, 11);
  auto s = psi;
  const std::vector<int> reg{1, 2, 3};
  s.qft(reg);
  const Matrix u = oracle::kron(oracle::kron(Matrix::Identity(2, 2), oracle::dft(3, +1.0)), Matrix::Identity(2, 2));
  EXPECT_LT((oracle::to_vector(s) - u * oracle::to_vector(psi)).cwiseAbs().maxCoeff(), 1e-12);
  s.qft_inv(reg);
  EXPECT_LT((oracle::to_vector(s) - oracle::to_vector(psi)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fourier, InverseOnUniformGivesZero) {
  StateVector s(4);
  for (int q = 0; q < 4; ++q) s.apply(GateOp::h(q));
  const std::vector<int> reg{0, 1, 2, 3};
  s.qft_inv(reg);
  EXPECT_NEAR(std::norm(s.amplitude(0)), 1.0, 1e-12);
}

TEST(Measurement, BellStateCollapses) {
  int ones = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    StateVector s(2);
    s.apply(GateOp::h(0));
    s.apply(GateOp::cnot(0, 1));
    Rng rng(seed);
    const std::vector<int> first{0};
    const auto rec = s.measure(first, rng);
    EXPECT_NEAR(rec.probability, 0.5, 1e-12);
    const std::uint64_t survivor = rec.outcome[0] == 1 ? 3 : 0;
    EXPECT_NEAR(std::norm(s.amplitude(survivor)), 1.0, 1e-12);
    ones += rec.outcome[0];
  }
  EXPECT_NEAR(ones / 2000.0, 0.5, 4 * 0.5 / std::sqrt(2000.0));
}

TEST(Measurement, BasisStateIsDeterministic) {
  auto s = StateVector::basis_state(4, 0b1011);
  Rng rng(1);
  const std::vector<int> reg{0, 1, 2, 3};
  const auto rec = s.measure(reg, rng);
  EXPECT_EQ(rec.outcome.str(), "1011");
  EXPECT_NEAR(rec.probability, 1.0, 1e-15);
}

TEST(Measurement, FrequenciesFollowBornRule) {
  const auto psi = random_state(3, 21);
  const std::vector<int> reg{0, 2};
  const auto dist = psi.register_distribution(reg);
  std::vector<int> counts(4, 0);
  Rng rng(5);
  const int shots = 100000;
  for (int i = 0; i < shots; ++i) {
    auto s = psi;
    ++counts[decode_bits(s.measure(reg, rng).outcome)];
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(counts[k] / double(shots), dist[k], 4 / std::sqrt(double(shots)));
}

TEST(Measurement, ProjectRejectsImpossibleOutcome) {
  StateVector s(2);
  const std::vector<int> reg{0};
  EXPECT_THROW(s.project(reg, 1), std::runtime_error);
}

TEST(Measurement, IntermediateBasisProbabilities) {
  const double c2 = std::pow(std::cos(kPi / 8), 2);
  const std::vector<int> q0{0};
  // |+> and |0> both land on the + eigenstate of Z+X with cos^2(pi/8).
  for (bool plus : {true, false}) {
    StateVector s(1);
    if (plus) s.apply(GateOp::h(0));
    auto r = s;
    r.apply_all(basis_rotation(0, Basis::z_plus_x));
    EXPECT_NEAR(r.register_distribution(q0)[0], c2, 1e-12);
  }
  // Outcome 0 of Z-X on |+> is the minority outcome.
  StateVector s(1);
  s.apply(GateOp::h(0));
  s.apply_all(basis_rotation(0, Basis::z_minus_x));
  EXPECT_NEAR(s.register_distribution(q0)[0], 1 - c2, 1e-12);
}

TEST(Measurement, BasisRotationTargetsNamedEigenstate) {
  // Eigenvector of (Z + s X)/sqrt(2) with eigenvalue +1, checked against the Eigen oracle.
  for (auto [basis, sign] : {std::pair{Basis::z_plus_x, 1.0}, {Basis::z_minus_x, -1.0}, {Basis::x, 0.0}}) {
    Matrix op = basis == Basis::x ? oracle::pauli('X')
                                  : Matrix((oracle::pauli('Z') + sign * oracle::pauli('X')) / std::sqrt(2.0));
    Eigen::SelfAdjointEigenSolver<Matrix> es(op);
    const oracle::Vector plus = es.eigenvectors().col(1);  // ascending eigenvalues
    auto s = StateVector::from_amplitudes({plus(0), plus(1)});
    s.apply_all(basis_rotation(0, basis));
    EXPECT_NEAR(std::norm(s.amplitude(0)), 1.0, 1e-12) << to_string(basis);
  }
}

TEST(Measurement, MeasureInBasisLeavesEigenstate) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    StateVector s(1);
    s.apply(GateOp::h(0));
    const auto rec = s.measure_in_basis(0, Basis::z_plus_x, rng);
    auto check = s;
    check.apply_all(basis_rotation(0, Basis::z_plus_x));
    EXPECT_NEAR(std::norm(check.amplitude(static_cast<std::uint64_t>(rec.outcome[0]))), 1.0, 1e-12);
  }
  StateVector z(1);
  EXPECT_EQ(z.measure_in_basis(0, Basis::z, rng).outcome[0], 0);
}

TEST(Dump, GateLinesRoundTrip) {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto g = random_gate(6, rng);
    EXPECT_EQ(parse_gate(format_gate(g)), g) << format_gate(g);
  }
  EXPECT_EQ(format_gate(GateOp::cnot(0, 3)), "CNOT 0 3");
  EXPECT_THROW(parse_gate("FOO 1"), ContractViolation);
  EXPECT_THROW(parse_gate("RX 1"), ContractViolation);
  for (auto b : {Basis::z, Basis::x, Basis::z_plus_x, Basis::z_minus_x}) EXPECT_EQ(parse_basis(to_string(b)), b);
}

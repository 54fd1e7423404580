#pragma once

// Dense statevector simulation. Qubit 0 is the most significant bit of the
// basis-state index, and every register is read most-significant qubit first.

#include <array>
#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "poq/numtheory.hpp"
#include "poq/rng.hpp"

namespace poq {

using Amplitude = std::complex<double>;

inline constexpr int kMaxQubits = 24;

enum class GateKind { h, x, rx, ry, rz, cnot, xx, cphase };

/// Rx, Ry, Rz(theta) = exp(-i theta P / 2); XX(theta) = exp(+i theta X (x) X);
/// CPhase(theta) = diag(1, 1, 1, e^{i theta}). CNOT qubits are (control, target).
struct GateOp {
  GateKind kind = GateKind::h;
  std::vector<int> qubits;
  double angle = 0.0;

  static GateOp h(int q) { return {GateKind::h, {q}, 0.0}; }
  static GateOp x(int q) { return {GateKind::x, {q}, 0.0}; }
  static GateOp rx(int q, double t) { return {GateKind::rx, {q}, t}; }
  static GateOp ry(int q, double t) { return {GateKind::ry, {q}, t}; }
  static GateOp rz(int q, double t) { return {GateKind::rz, {q}, t}; }
  static GateOp cnot(int c, int t) { return {GateKind::cnot, {c, t}, 0.0}; }
  static GateOp xx(int a, int b, double t) { return {GateKind::xx, {a, b}, t}; }
  static GateOp cphase(int a, int b, double t) { return {GateKind::cphase, {a, b}, t}; }

  bool operator==(const GateOp&) const = default;
};

std::string gate_name(GateKind kind);
bool gate_has_angle(GateKind kind);
std::size_t gate_arity(GateKind kind);

/// `KIND q_i [q_j] [theta]`, theta printed with 17 significant digits.
std::string format_gate(const GateOp& gate);
GateOp parse_gate(const std::string& line);

enum class Basis { z, x, z_plus_x, z_minus_x };

std::string to_string(Basis basis);
Basis parse_basis(const std::string& text);

struct MeasurementRecord {
  std::vector<int> qubits;
  Basis basis = Basis::z;
  BitString outcome;
  double probability = 0.0;
};

class StateVector {
 public:
  /// |0...0> on n qubits, 1 <= n <= kMaxQubits.
  explicit StateVector(int n_qubits);
  /// Basis state |index>.
  static StateVector basis_state(int n_qubits, std::uint64_t index);
  static StateVector from_amplitudes(std::vector<Amplitude> amplitudes);

  int n_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return amps_.size(); }
  std::span<const Amplitude> amplitudes() const { return amps_; }
  Amplitude amplitude(std::uint64_t index) const { return amps_[index]; }
  double norm_squared() const;

  void apply(const GateOp& gate);
  void apply_all(std::span<const GateOp> gates);
  /// Arbitrary 2x2 unitary (row-major) on one qubit.
  void apply_single(int qubit, const std::array<Amplitude, 4>& m);
  /// Multiplies the amplitude of every basis state by e^{i phase(k)}, k the register value.
  void apply_diagonal_phase(std::span<const int> reg, const std::function<double(std::uint64_t)>& phase);
  void apply_diagonal_phase(std::span<const int> reg, std::span<const double> phases);
  /// Exact (inverse) discrete Fourier transform on a register, dimension 2^|reg|.
  void qft(std::span<const int> reg);
  void qft_inv(std::span<const int> reg);

  /// Born-rule probability of each register value, length 2^|reg|.
  std::vector<double> register_distribution(std::span<const int> reg) const;

  /// Samples the register, collapses and renormalises.
  MeasurementRecord measure(std::span<const int> reg, Rng& rng);
  /// Collapses onto a given outcome. Throws std::runtime_error when its probability is ~0.
  MeasurementRecord project(std::span<const int> reg, std::uint64_t outcome);
  /// Single-qubit measurement; outcome 0 labels the +1 eigenstate of the named operator.
  MeasurementRecord measure_in_basis(int qubit, Basis basis, Rng& rng);

 private:
  void check_register(std::span<const int> reg) const;
  void apply_fourier(std::span<const int> reg, double sign);
  std::uint64_t mask(int qubit) const { return std::uint64_t{1} << (n_qubits_ - 1 - qubit); }
  std::uint64_t register_value(std::uint64_t index, std::span<const int> reg) const;

  int n_qubits_;
  std::vector<Amplitude> amps_;
};

/// Basis change applied before a Z measurement so outcome 0 is the +1 eigenstate.
std::vector<GateOp> basis_rotation(int qubit, Basis basis);

}  // namespace poq

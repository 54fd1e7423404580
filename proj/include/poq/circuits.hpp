#pragma once

// Commit circuits for both protocols and the branch-dependent measurement suffixes.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "poq/sim.hpp"
#include "poq/tcf.hpp"

namespace poq {

/// Pauli-Z expansion of e^{2 pi i x^2 y / N} on the layout x = qubits [0, n_x),
/// y = qubits [n_x, n_x + n_y):
///   U = e^{i global_phase} prod exp(i alpha Z Z Z) prod exp(i beta Z Z) prod exp(i gamma Z).
/// Keys are circuit qubit indices; alpha keys are (x, x, y) with the two x qubits ascending.
/// Every angle lies in [0, 2 pi).
struct PhaseTermSet {
  std::map<std::array<int, 3>, double> alpha;
  std::map<std::array<int, 2>, double> beta;
  std::map<int, double> gamma;
  double global_phase = 0.0;
};

PhaseTermSet compute_phase_terms(std::uint64_t modulus, unsigned n_x, unsigned n_y);

/// exp(i theta Y (x) Y) on two qubits.
std::vector<GateOp> yy_gates(int a, int b, double theta);
/// exp(i theta Z (x) Z) on two qubits.
std::vector<GateOp> zz_gates(int a, int b, double theta);

struct CascadeTarget {
  int qubit;
  double theta;
};

/// prod_t exp(-i theta_t Y_a Z_b X_t): YY conjugation around a chain of XX(theta_t).
std::vector<GateOp> zzz_cascade(int a, int b, const std::vector<CascadeTarget>& targets);

/// prod_t exp(i alpha_t Z_a Z_b Z_t): zzz_cascade wrapped in local basis changes.
std::vector<GateOp> zzz_phase_gates(int a, int b, const std::vector<CascadeTarget>& targets);

/// Gate-level (inverse) QFT on a register read most significant qubit first;
/// matches StateVector::qft / qft_inv up to numerical error.
std::vector<GateOp> qft_gates(const std::vector<int>& reg, bool inverse);

/// Inverse of a gate sequence: reversed order, negated angles.
std::vector<GateOp> inverse_gates(const std::vector<GateOp>& gates);

/// Gate list for the compiled phase oracle (global phase dropped).
std::vector<GateOp> compile_phase_terms(const PhaseTermSet& terms);

struct Register {
  std::string name;
  int offset = 0;
  int size = 0;

  std::vector<int> qubits() const;
};

/// Diagonal phase e^{i phases[k]} keyed on the register value k.
struct PhaseOracle {
  std::vector<int> qubits;
  std::vector<double> phases;
};

/// Measurement of `qubits`. A single-qubit point without a basis takes the
/// basis from the verifier at run time.
struct MeasurePoint {
  std::string label;
  std::vector<int> qubits;
  std::optional<Basis> basis = Basis::z;
};

using PlanStep = std::variant<GateOp, PhaseOracle, MeasurePoint>;

struct CircuitPlan {
  int n_qubits = 0;
  std::vector<Register> registers;
  std::vector<PlanStep> steps;

  const Register& reg(const std::string& name) const;
  /// Number of GateOps, oracle and measurement steps excluded.
  std::size_t gate_count() const;
  /// One line per step; gates use the sim dump format.
  std::string dump() const;
};

enum class Branch { standard, interference };

std::string to_string(Branch branch);
Branch parse_branch(const std::string& text);

/// Layout x(n_x), y(n_y), anc(1). `compiled` selects the ZZZ/ZZ/Z gate form
/// over a direct diagonal oracle. Ends with the "w" measurement of y.
CircuitPlan build_factoring_commit(const RabinInstance& inst, bool compiled);

/// Layout b(1), x(n log2 q), anc(log2 q), out(m). Ends with the "w" measurement of out.
CircuitPlan build_lwe_commit(const LweInstance& inst);

CircuitPlan build_commit(const PublicInstance& inst, bool compiled = true);

/// Steps after the commitment. Branch A: "x" measurement of the preimage register.
/// LWE branch B: Hadamards then "d". Factoring branch B: parity CNOTs selected by r
/// into the ancilla, Hadamards on x, "d", then "outcome" on the ancilla in `basis`
/// (left unset when not yet chosen).
std::vector<PlanStep> build_branch_suffix(const CircuitPlan& commit, ProtocolKind kind, Branch branch,
                                          const BitString& r = {}, std::optional<Basis> basis = std::nullopt);

/// Qubits of the register the prover reads out in branch A (LWE: b then x).
std::vector<int> preimage_qubits(const CircuitPlan& commit, ProtocolKind kind);

/// Runs steps in order. MeasurePoints with an unset basis query `choose`.
/// Measurement records are returned keyed by label.
using BasisChooser = std::function<Basis(const MeasurePoint&)>;
std::map<std::string, MeasurementRecord> execute_steps(StateVector& state, const std::vector<PlanStep>& steps,
                                                       Rng& rng, const BasisChooser& choose = {});

/// Applies every unitary step and skips measurements.
void apply_unitary_steps(StateVector& state, const std::vector<PlanStep>& steps);

}  // namespace poq

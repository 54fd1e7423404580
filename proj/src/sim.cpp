#include "poq/sim.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "poq/errors.hpp"

namespace poq {

namespace {

constexpr double kPi = std::numbers::pi;
const Amplitude kI{0.0, 1.0};

struct GateInfo {
  GateKind kind;
  const char* name;
  std::size_t arity;
  bool angle;
};

constexpr GateInfo kGateTable[] = {
    {GateKind::h, "H", 1, false},      {GateKind::x, "X", 1, false},       {GateKind::rx, "RX", 1, true},
    {GateKind::ry, "RY", 1, true},     {GateKind::rz, "RZ", 1, true},      {GateKind::cnot, "CNOT", 2, false},
    {GateKind::xx, "XX", 2, true},     {GateKind::cphase, "CPHASE", 2, true},
};

const GateInfo& info(GateKind kind) {
  for (const auto& g : kGateTable)
    if (g.kind == kind) return g;
  throw ContractViolation("unknown gate kind");
}

}  // namespace

std::string gate_name(GateKind kind) { return info(kind).name; }
bool gate_has_angle(GateKind kind) { return info(kind).angle; }
std::size_t gate_arity(GateKind kind) { return info(kind).arity; }

std::string format_gate(const GateOp& gate) {
  std::ostringstream out;
  out << gate_name(gate.kind);
  for (int q : gate.qubits) out << ' ' << q;
  if (gate_has_angle(gate.kind)) out << ' ' << std::setprecision(17) << gate.angle;
  return out.str();
}

GateOp parse_gate(const std::string& line) {
  std::istringstream in(line);
  std::string name;
  in >> name;
  for (const auto& g : kGateTable) {
    if (name != g.name) continue;
    GateOp op{g.kind, std::vector<int>(g.arity), 0.0};
    for (auto& q : op.qubits)
      if (!(in >> q)) throw ContractViolation("parse_gate: missing qubit index in '" + line + "'");
    if (g.angle && !(in >> op.angle)) throw ContractViolation("parse_gate: missing angle in '" + line + "'");
    std::string extra;
    if (in >> extra) throw ContractViolation("parse_gate: trailing tokens in '" + line + "'");
    return op;
  }
  throw ContractViolation("parse_gate: unknown gate '" + name + "'");
}

std::string to_string(Basis basis) {
  switch (basis) {
    case Basis::z: return "Z";
    case Basis::x: return "X";
    case Basis::z_plus_x: return "Z+X";
    case Basis::z_minus_x: return "Z-X";
  }
  return "?";
}

Basis parse_basis(const std::string& text) {
  if (text == "Z") return Basis::z;
  if (text == "X") return Basis::x;
  if (text == "Z+X") return Basis::z_plus_x;
  if (text == "Z-X") return Basis::z_minus_x;
  throw ContractViolation("unknown basis '" + text + "'");
}

std::vector<GateOp> basis_rotation(int qubit, Basis basis) {
  switch (basis) {
    case Basis::z: return {};
    case Basis::x: return {GateOp::h(qubit)};
    case Basis::z_plus_x: return {GateOp::ry(qubit, -kPi / 4)};
    case Basis::z_minus_x: return {GateOp::ry(qubit, kPi / 4)};
  }
  return {};
}

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  require(n_qubits >= 1 && n_qubits <= kMaxQubits, "StateVector: qubit count must be in [1, 24]");
  amps_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
  amps_[0] = 1.0;
}

StateVector StateVector::basis_state(int n_qubits, std::uint64_t index) {
  StateVector s(n_qubits);
  require(index < s.dimension(), "basis_state: index out of range");
  s.amps_[0] = 0.0;
  s.amps_[index] = 1.0;
  return s;
}

StateVector StateVector::from_amplitudes(std::vector<Amplitude> amplitudes) {
  const std::size_t dim = amplitudes.size();
  require(dim >= 2 && (dim & (dim - 1)) == 0, "from_amplitudes: dimension must be a power of two");
  int n = 0;
  while ((std::size_t{1} << n) < dim) ++n;
  StateVector s(n);
  s.amps_ = std::move(amplitudes);
  require(std::abs(s.norm_squared() - 1.0) < 1e-10, "from_amplitudes: state is not normalised");
  return s;
}

double StateVector::norm_squared() const {
  double total = 0.0;
  for (const auto& a : amps_) total += std::norm(a);
  return total;
}

void StateVector::check_register(std::span<const int> reg) const {
  require(!reg.empty(), "register must be non-empty");
  std::uint64_t seen = 0;
  for (int q : reg) {
    require(q >= 0 && q < n_qubits_, "qubit index out of range");
    require((seen & mask(q)) == 0, "qubit indices must be distinct");
    seen |= mask(q);
  }
}

std::uint64_t StateVector::register_value(std::uint64_t index, std::span<const int> reg) const {
  std::uint64_t v = 0;
  for (int q : reg) v = (v << 1) | ((index & mask(q)) ? 1U : 0U);
  return v;
}

void StateVector::apply_single(int qubit, const std::array<Amplitude, 4>& m) {
  const std::uint64_t bit = mask(qubit);
  for (std::uint64_t i = 0; i < amps_.size(); ++i) {
    if (i & bit) continue;
    const Amplitude a0 = amps_[i];
    const Amplitude a1 = amps_[i | bit];
    amps_[i] = m[0] * a0 + m[1] * a1;
    amps_[i | bit] = m[2] * a0 + m[3] * a1;
  }
}

void StateVector::apply(const GateOp& gate) {
  require(gate.qubits.size() == gate_arity(gate.kind), "gate has wrong number of qubits");
  check_register(gate.qubits);
  const double c = std::cos(gate.angle / 2);
  const double s = std::sin(gate.angle / 2);
  switch (gate.kind) {
    case GateKind::h: {
      const double r = 1.0 / std::sqrt(2.0);
      apply_single(gate.qubits[0], {r, r, r, -r});
      break;
    }
    case GateKind::x: apply_single(gate.qubits[0], {0.0, 1.0, 1.0, 0.0}); break;
    case GateKind::rx: apply_single(gate.qubits[0], {c, -kI * s, -kI * s, c}); break;
    case GateKind::ry: apply_single(gate.qubits[0], {c, -s, s, c}); break;
    case GateKind::rz:
      apply_single(gate.qubits[0], {std::exp(-kI * (gate.angle / 2)), 0.0, 0.0, std::exp(kI * (gate.angle / 2))});
      break;
    case GateKind::cnot: {
      const std::uint64_t cb = mask(gate.qubits[0]);
      const std::uint64_t tb = mask(gate.qubits[1]);
      for (std::uint64_t i = 0; i < amps_.size(); ++i)
        if ((i & cb) && !(i & tb)) std::swap(amps_[i], amps_[i | tb]);
      break;
    }
    case GateKind::xx: {
      const std::uint64_t flip = mask(gate.qubits[0]) | mask(gate.qubits[1]);
      const double cc = std::cos(gate.angle);
      const Amplitude is = kI * std::sin(gate.angle);
      for (std::uint64_t i = 0; i < amps_.size(); ++i) {
        const std::uint64_t j = i ^ flip;
        if (j < i) continue;
        const Amplitude a = amps_[i];
        const Amplitude b = amps_[j];
        amps_[i] = cc * a + is * b;
        amps_[j] = cc * b + is * a;
      }
      break;
    }
    case GateKind::cphase: {
      const std::uint64_t both = mask(gate.qubits[0]) | mask(gate.qubits[1]);
      const Amplitude phase = std::exp(kI * gate.angle);
      for (std::uint64_t i = 0; i < amps_.size(); ++i)
        if ((i & both) == both) amps_[i] *= phase;
      break;
    }
  }
}

void StateVector::apply_all(std::span<const GateOp> gates) {
  for (const auto& g : gates) apply(g);
}

void StateVector::apply_diagonal_phase(std::span<const int> reg, const std::function<double(std::uint64_t)>& phase) {
  check_register(reg);
  for (std::uint64_t i = 0; i < amps_.size(); ++i) amps_[i] *= std::exp(kI * phase(register_value(i, reg)));
}

void StateVector::apply_diagonal_phase(std::span<const int> reg, std::span<const double> phases) {
  check_register(reg);
  require(phases.size() == (std::size_t{1} << reg.size()), "apply_diagonal_phase: phase table size mismatch");
  for (std::uint64_t i = 0; i < amps_.size(); ++i) amps_[i] *= std::exp(kI * phases[register_value(i, reg)]);
}

void StateVector::apply_fourier(std::span<const int> reg, double sign) {
  check_register(reg);
  const std::size_t len = reg.size();
  const std::size_t m = std::size_t{1} << len;
  std::uint64_t reg_mask = 0;
  for (int q : reg) reg_mask |= mask(q);

  // Basis index for each register value at a given setting of the other qubits.
  std::vector<std::uint64_t> offsets(m);
  for (std::size_t v = 0; v < m; ++v) {
    std::uint64_t off = 0;
    for (std::size_t t = 0; t < len; ++t)
      if ((v >> (len - 1 - t)) & 1U) off |= mask(reg[t]);
    offsets[v] = off;
  }
  std::vector<Amplitude> roots(m);
  for (std::size_t k = 0; k < m; ++k) roots[k] = std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(k) / m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));

  std::vector<Amplitude> in(m);
  for (std::uint64_t base = 0; base < amps_.size(); ++base) {
    if (base & reg_mask) continue;
    for (std::size_t v = 0; v < m; ++v) in[v] = amps_[base | offsets[v]];
    for (std::size_t k = 0; k < m; ++k) {
      Amplitude acc{0.0, 0.0};
      for (std::size_t a = 0; a < m; ++a) acc += in[a] * roots[(a * k) % m];
      amps_[base | offsets[k]] = acc * scale;
    }
  }
}

void StateVector::qft(std::span<const int> reg) { apply_fourier(reg, +1.0); }
void StateVector::qft_inv(std::span<const int> reg) { apply_fourier(reg, -1.0); }

std::vector<double> StateVector::register_distribution(std::span<const int> reg) const {
  check_register(reg);
  std::vector<double> dist(std::size_t{1} << reg.size(), 0.0);
  for (std::uint64_t i = 0; i < amps_.size(); ++i) dist[register_value(i, reg)] += std::norm(amps_[i]);
  return dist;
}

MeasurementRecord StateVector::project(std::span<const int> reg, std::uint64_t outcome) {
  const auto dist = register_distribution(reg);
  require(outcome < dist.size(), "project: outcome out of range");
  const double p = dist[outcome];
  if (!(p > 1e-300)) throw std::runtime_error("measurement outcome has zero probability");
  const double scale = 1.0 / std::sqrt(p);
  for (std::uint64_t i = 0; i < amps_.size(); ++i) {
    if (register_value(i, reg) == outcome)
      amps_[i] *= scale;
    else
      amps_[i] = 0.0;
  }
  return MeasurementRecord{std::vector<int>(reg.begin(), reg.end()), Basis::z, encode_bits(outcome, reg.size()), p};
}

MeasurementRecord StateVector::measure(std::span<const int> reg, Rng& rng) {
  const auto dist = register_distribution(reg);
  double total = 0.0;
  for (double p : dist) total += p;
  if (!(total > 1e-300)) throw std::runtime_error("measure: register has zero total probability");
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  std::uint64_t outcome = dist.size() - 1;
  for (std::uint64_t v = 0; v < dist.size(); ++v) {
    acc += dist[v];
    if (u < acc && dist[v] > 0.0) {
      outcome = v;
      break;
    }
  }
  // Floating slack at the top end: fall back to the last outcome with weight.
  while (dist[outcome] <= 0.0 && outcome > 0) --outcome;
  return project(reg, outcome);
}

MeasurementRecord StateVector::measure_in_basis(int qubit, Basis basis, Rng& rng) {
  const auto rotation = basis_rotation(qubit, basis);
  apply_all(rotation);
  const int reg[] = {qubit};
  auto rec = measure(reg, rng);
  rec.basis = basis;
  // Undo the rotation so the post-measurement state is the named eigenstate.
  for (auto it = rotation.rbegin(); it != rotation.rend(); ++it) {
    GateOp inv = *it;
    if (inv.kind != GateKind::h) inv.angle = -inv.angle;
    apply(inv);
  }
  return rec;
}

}  // namespace poq

#include "poq/circuits.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "poq/errors.hpp"

namespace poq {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0) a += kTwoPi;
  // fmod can land on 2 pi after the shift for tiny negatives.
  return a >= kTwoPi ? 0.0 : a;
}

bool negligible(double angle) {
  const double a = wrap(angle);
  return a < 1e-13 || kTwoPi - a < 1e-13;
}

void require_distinct(std::vector<int> qubits, const char* what) {
  std::set<int> seen(qubits.begin(), qubits.end());
  require(seen.size() == qubits.size(), what);
}

}  // namespace

PhaseTermSet compute_phase_terms(std::uint64_t modulus, unsigned n_x, unsigned n_y) {
  require(modulus >= 2, "compute_phase_terms: N must be >= 2");
  require(n_x >= 1 && n_y >= ceil_log2(modulus), "compute_phase_terms: n_y must be >= ceil(log2 N)");
  require(n_x + n_y <= static_cast<unsigned>(kMaxQubits), "compute_phase_terms: too many qubits");

  // Bit i (least significant = 0) of x sits on qubit n_x-1-i; bit k of y on n_x+n_y-1-k.
  auto xq = [&](unsigned i) { return static_cast<int>(n_x - 1 - i); };
  auto yq = [&](unsigned k) { return static_cast<int>(n_x + n_y - 1 - k); };

  PhaseTermSet t;
  auto add2 = [&](int a, int b, double v) { t.beta[{std::min(a, b), std::max(a, b)}] += v; };
  const double unit = kTwoPi / static_cast<double>(modulus);

  // x^2 y = sum_{i,j,k} 2^{i+j+k} x_i x_j y_k with x_i = (1 - z_i) / 2.
  for (unsigned k = 0; k < n_y; ++k) {
    for (unsigned i = 0; i < n_x; ++i) {
      // Diagonal i = j: x_i y_k = (1 - z_i - z_k + z_i z_k) / 4.
      const double c = unit * std::ldexp(1.0, static_cast<int>(2 * i + k)) / 4.0;
      t.global_phase += c;
      t.gamma[xq(i)] -= c;
      t.gamma[yq(k)] -= c;
      add2(xq(i), yq(k), c);
      for (unsigned j = i + 1; j < n_x; ++j) {
        // Both orderings of (i, j): 2 x_i x_j y_k = 2 (1-z_i)(1-z_j)(1-z_k) / 8.
        const double d = unit * 2.0 * std::ldexp(1.0, static_cast<int>(i + j + k)) / 8.0;
        t.global_phase += d;
        t.gamma[xq(i)] -= d;
        t.gamma[xq(j)] -= d;
        t.gamma[yq(k)] -= d;
        add2(xq(i), xq(j), d);
        add2(xq(i), yq(k), d);
        add2(xq(j), yq(k), d);
        const int a = std::min(xq(i), xq(j));
        const int b = std::max(xq(i), xq(j));
        t.alpha[{a, b, yq(k)}] -= d;
      }
    }
  }
  for (auto& [key, v] : t.alpha) v = wrap(v);
  for (auto& [key, v] : t.beta) v = wrap(v);
  for (auto& [key, v] : t.gamma) v = wrap(v);
  t.global_phase = wrap(t.global_phase);
  return t;
}

std::vector<GateOp> yy_gates(int a, int b, double theta) {
  require(a != b, "yy_gates: qubits must differ");
  return {GateOp::rz(a, -kPi / 2), GateOp::rz(b, -kPi / 2), GateOp::xx(a, b, theta), GateOp::rz(a, kPi / 2),
          GateOp::rz(b, kPi / 2)};
}

std::vector<GateOp> zz_gates(int a, int b, double theta) {
  require(a != b, "zz_gates: qubits must differ");
  return {GateOp::ry(a, kPi / 2), GateOp::ry(b, kPi / 2), GateOp::xx(a, b, theta), GateOp::ry(a, -kPi / 2),
          GateOp::ry(b, -kPi / 2)};
}

std::vector<GateOp> zzz_cascade(int a, int b, const std::vector<CascadeTarget>& targets) {
  std::vector<int> all{a, b};
  for (const auto& t : targets) all.push_back(t.qubit);
  require_distinct(all, "zzz_cascade: control pair and targets must be distinct");

  // exp(-i pi/4 Y_a Y_b) exp(i theta X_b X_t) exp(i pi/4 Y_a Y_b) = exp(-i theta Y_a Z_b X_t).
  std::vector<GateOp> out = yy_gates(a, b, kPi / 4);
  for (const auto& t : targets) out.push_back(GateOp::xx(b, t.qubit, t.theta));
  auto tail = yy_gates(a, b, -kPi / 4);
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

std::vector<GateOp> zzz_phase_gates(int a, int b, const std::vector<CascadeTarget>& targets) {
  // Rx(-pi/2) turns Z_a into Y_a and Ry(pi/2) turns Z_t into X_t under conjugation.
  std::vector<GateOp> pre{GateOp::rx(a, -kPi / 2)};
  std::vector<CascadeTarget> flipped;
  for (const auto& t : targets) {
    pre.push_back(GateOp::ry(t.qubit, kPi / 2));
    flipped.push_back({t.qubit, -t.theta});
  }
  std::vector<GateOp> out = pre;
  const auto core = zzz_cascade(a, b, flipped);
  out.insert(out.end(), core.begin(), core.end());
  const auto post = inverse_gates(pre);
  out.insert(out.end(), post.begin(), post.end());
  return out;
}

std::vector<GateOp> qft_gates(const std::vector<int>& reg, bool inverse) {
  require_distinct(reg, "qft_gates: register qubits must be distinct");
  std::vector<GateOp> out;
  const std::size_t len = reg.size();
  for (std::size_t j = 0; j < len; ++j) {
    out.push_back(GateOp::h(reg[j]));
    for (std::size_t k = j + 1; k < len; ++k)
      out.push_back(GateOp::cphase(reg[k], reg[j], kTwoPi / std::ldexp(1.0, static_cast<int>(k - j + 1))));
  }
  for (std::size_t j = 0; j < len / 2; ++j) {
    const int a = reg[j];
    const int b = reg[len - 1 - j];
    out.push_back(GateOp::cnot(a, b));
    out.push_back(GateOp::cnot(b, a));
    out.push_back(GateOp::cnot(a, b));
  }
  return inverse ? inverse_gates(out) : out;
}

std::vector<GateOp> inverse_gates(const std::vector<GateOp>& gates) {
  std::vector<GateOp> out(gates.rbegin(), gates.rend());
  for (auto& g : out)
    if (gate_has_angle(g.kind)) g.angle = -g.angle;
  return out;
}

std::vector<GateOp> compile_phase_terms(const PhaseTermSet& terms) {
  std::vector<GateOp> out;
  for (const auto& [q, gamma] : terms.gamma)
    if (!negligible(gamma)) out.push_back(GateOp::rz(q, -2.0 * gamma));
  for (const auto& [pair, beta] : terms.beta) {
    if (negligible(beta)) continue;
    const auto g = zz_gates(pair[0], pair[1], beta);
    out.insert(out.end(), g.begin(), g.end());
  }
  // One cascade per x pair, sharing the YY conjugation across its y targets.
  std::map<std::array<int, 2>, std::vector<CascadeTarget>> cascades;
  for (const auto& [key, alpha] : terms.alpha)
    if (!negligible(alpha)) cascades[{key[0], key[1]}].push_back({key[2], alpha});
  for (const auto& [pair, targets] : cascades) {
    const auto g = zzz_phase_gates(pair[0], pair[1], targets);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

std::vector<int> Register::qubits() const {
  std::vector<int> q(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) q[static_cast<std::size_t>(i)] = offset + i;
  return q;
}

const Register& CircuitPlan::reg(const std::string& name) const {
  for (const auto& r : registers)
    if (r.name == name) return r;
  throw ContractViolation("CircuitPlan: no register named '" + name + "'");
}

std::size_t CircuitPlan::gate_count() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += std::holds_alternative<GateOp>(s) ? 1 : 0;
  return n;
}

namespace {

std::string dump_step(const PlanStep& step) {
  std::ostringstream out;
  if (const auto* g = std::get_if<GateOp>(&step)) return format_gate(*g);
  if (const auto* o = std::get_if<PhaseOracle>(&step)) {
    out << "ORACLE";
    for (int q : o->qubits) out << ' ' << q;
    return out.str();
  }
  const auto& m = std::get<MeasurePoint>(step);
  out << "MEASURE " << m.label << ' ' << (m.basis ? to_string(*m.basis) : std::string("?"));
  for (int q : m.qubits) out << ' ' << q;
  return out.str();
}

void append(std::vector<PlanStep>& steps, const std::vector<GateOp>& gates) {
  steps.insert(steps.end(), gates.begin(), gates.end());
}

}  // namespace

std::string CircuitPlan::dump() const {
  std::string out;
  for (const auto& s : steps) out += dump_step(s) + "\n";
  return out;
}

std::string to_string(Branch branch) { return branch == Branch::standard ? "A" : "B"; }

Branch parse_branch(const std::string& text) {
  if (text == "A") return Branch::standard;
  if (text == "B") return Branch::interference;
  throw ContractViolation("unknown branch '" + text + "'");
}

CircuitPlan build_factoring_commit(const RabinInstance& inst, bool compiled) {
  const int nx = static_cast<int>(inst.input_bits);
  const int ny = static_cast<int>(inst.output_bits);
  CircuitPlan plan;
  plan.n_qubits = nx + ny + 1;
  require(plan.n_qubits <= kMaxQubits, "build_factoring_commit: instance exceeds simulator size");
  plan.registers = {{"x", 0, nx}, {"y", nx, ny}, {"anc", nx + ny, 1}};
  const auto x = plan.reg("x").qubits();
  const auto y = plan.reg("y").qubits();

  for (int q : x) plan.steps.emplace_back(GateOp::h(q));
  for (int q : y) plan.steps.emplace_back(GateOp::h(q));
  if (compiled) {
    append(plan.steps, compile_phase_terms(compute_phase_terms(inst.modulus, inst.input_bits, inst.output_bits)));
  } else {
    std::vector<int> xy = x;
    xy.insert(xy.end(), y.begin(), y.end());
    std::vector<double> phases(std::size_t{1} << (nx + ny));
    for (std::uint64_t xv = 0; xv < (std::uint64_t{1} << nx); ++xv)
      for (std::uint64_t yv = 0; yv < (std::uint64_t{1} << ny); ++yv) {
        const std::uint64_t e = mul_mod(mul_mod(xv, xv, inst.modulus), yv, inst.modulus);
        phases[(xv << ny) | yv] = kTwoPi * static_cast<double>(e) / static_cast<double>(inst.modulus);
      }
    plan.steps.emplace_back(PhaseOracle{xy, std::move(phases)});
  }
  append(plan.steps, qft_gates(y, true));
  plan.steps.emplace_back(MeasurePoint{"w", y, Basis::z});
  return plan;
}

CircuitPlan build_lwe_commit(const LweInstance& inst) {
  require(is_power_of_two(inst.modulus), "build_lwe_commit: q must be a power of two");
  const int len = static_cast<int>(inst.coordinate_bits());
  const int n = static_cast<int>(inst.cols());
  const int m = static_cast<int>(inst.rows());
  CircuitPlan plan;
  plan.n_qubits = 1 + n * len + len + m;
  require(plan.n_qubits <= kMaxQubits, "build_lwe_commit: instance exceeds simulator size");
  plan.registers = {{"b", 0, 1}, {"x", 1, n * len}, {"anc", 1 + n * len, len}, {"out", 1 + n * len + len, m}};
  const int b = 0;
  const auto x = plan.reg("x").qubits();
  const auto anc = plan.reg("anc").qubits();
  const auto out = plan.reg("out").qubits();
  const double q = static_cast<double>(inst.modulus);

  plan.steps.emplace_back(GateOp::h(b));
  for (int qb : x) plan.steps.emplace_back(GateOp::h(qb));

  for (int i = 0; i < m; ++i) {
    // Fourier-basis addition of A_i . x + b y_i into the ancilla.
    std::vector<GateOp> compute = qft_gates(anc, false);
    for (int t = 0; t < len; ++t) {
      const double weight_t = std::ldexp(1.0, len - 1 - t);
      for (int j = 0; j < n; ++j) {
        const double a_ij = static_cast<double>(inst.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        for (int u = 0; u < len; ++u) {
          const double angle = wrap(kTwoPi * a_ij * std::ldexp(1.0, len - 1 - u) * weight_t / q);
          if (!negligible(angle)) compute.push_back(GateOp::cphase(x[static_cast<std::size_t>(j * len + u)], anc[t], angle));
        }
      }
      const double angle = wrap(kTwoPi * static_cast<double>(inst.y[static_cast<std::size_t>(i)]) * weight_t / q);
      if (!negligible(angle)) compute.push_back(GateOp::cphase(b, anc[t], angle));
    }
    const auto qi = qft_gates(anc, true);
    compute.insert(compute.end(), qi.begin(), qi.end());

    append(plan.steps, compute);
    plan.steps.emplace_back(GateOp::cnot(anc[0], out[static_cast<std::size_t>(i)]));
    append(plan.steps, inverse_gates(compute));
  }
  plan.steps.emplace_back(MeasurePoint{"w", out, Basis::z});
  return plan;
}

CircuitPlan build_commit(const PublicInstance& inst, bool compiled) {
  if (const auto* r = std::get_if<RabinInstance>(&inst)) return build_factoring_commit(*r, compiled);
  return build_lwe_commit(std::get<LweInstance>(inst));
}

std::vector<int> preimage_qubits(const CircuitPlan& commit, ProtocolKind kind) {
  if (kind == ProtocolKind::factoring) return commit.reg("x").qubits();
  std::vector<int> q = commit.reg("b").qubits();
  const auto x = commit.reg("x").qubits();
  q.insert(q.end(), x.begin(), x.end());
  return q;
}

std::vector<PlanStep> build_branch_suffix(const CircuitPlan& commit, ProtocolKind kind, Branch branch,
                                          const BitString& r, std::optional<Basis> basis) {
  const auto pre = preimage_qubits(commit, kind);
  std::vector<PlanStep> steps;
  if (branch == Branch::standard) {
    steps.emplace_back(MeasurePoint{"x", pre, Basis::z});
    return steps;
  }
  if (kind == ProtocolKind::lwe) {
    for (int q : pre) steps.emplace_back(GateOp::h(q));
    steps.emplace_back(MeasurePoint{"d", pre, Basis::z});
    return steps;
  }
  require(r.size() == pre.size(), "build_branch_suffix: r must match the x register width");
  require(!r.is_zero(), "build_branch_suffix: r must be nonzero");
  require(!basis || *basis == Basis::z_plus_x || *basis == Basis::z_minus_x,
          "build_branch_suffix: factoring basis must be Z+X or Z-X");
  const int anc = commit.reg("anc").offset;
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (r[i] == 1) steps.emplace_back(GateOp::cnot(pre[i], anc));
  for (int q : pre) steps.emplace_back(GateOp::h(q));
  steps.emplace_back(MeasurePoint{"d", pre, Basis::z});
  steps.emplace_back(MeasurePoint{"outcome", {anc}, basis});
  return steps;
}

std::map<std::string, MeasurementRecord> execute_steps(StateVector& state, const std::vector<PlanStep>& steps,
                                                       Rng& rng, const BasisChooser& choose) {
  std::map<std::string, MeasurementRecord> records;
  for (const auto& step : steps) {
    if (const auto* g = std::get_if<GateOp>(&step)) {
      state.apply(*g);
    } else if (const auto* o = std::get_if<PhaseOracle>(&step)) {
      state.apply_diagonal_phase(o->qubits, o->phases);
    } else {
      const auto& m = std::get<MeasurePoint>(step);
      Basis basis = Basis::z;
      if (m.basis) {
        basis = *m.basis;
      } else {
        require(static_cast<bool>(choose), "execute_steps: measurement basis not chosen");
        basis = choose(m);
      }
      if (basis == Basis::z) {
        records[m.label] = state.measure(m.qubits, rng);
      } else {
        require(m.qubits.size() == 1, "execute_steps: rotated-basis measurement needs a single qubit");
        records[m.label] = state.measure_in_basis(m.qubits[0], basis, rng);
      }
    }
  }
  return records;
}

void apply_unitary_steps(StateVector& state, const std::vector<PlanStep>& steps) {
  for (const auto& step : steps) {
    if (const auto* g = std::get_if<GateOp>(&step))
      state.apply(*g);
    else if (const auto* o = std::get_if<PhaseOracle>(&step))
      state.apply_diagonal_phase(o->qubits, o->phases);
  }
}

}  // namespace poq

#include "poq/protocol.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "poq/errors.hpp"

namespace poq {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const std::array<std::pair<E, const char*>, N>& table, const char* what) {
  for (const auto& [value, name] : table)
    if (text == name) return value;
  throw ConfigError(std::string("unknown ") + what + " '" + text + "'");
}

template <typename E, std::size_t N>
std::string enum_name(E value, const std::array<std::pair<E, const char*>, N>& table) {
  for (const auto& [v, name] : table)
    if (v == value) return name;
  return "?";
}

constexpr std::array<std::pair<Mode, const char*>, 2> kModes{{{Mode::interactive, "interactive"},
                                                              {Mode::delayed, "delayed"}}};
constexpr std::array<std::pair<ShotStatus, const char*>, 5> kStatuses{{
    {ShotStatus::kept, "kept"},
    {ShotStatus::discarded_invalid_w, "discarded-invalid-w"},
    {ShotStatus::discarded_zero_d, "discarded-zero-d"},
    {ShotStatus::unscorable, "unscorable"},
    {ShotStatus::voided, "voided"},
}};
constexpr std::array<std::pair<Verdict, const char*>, 3> kVerdicts{{{Verdict::accept, "accept"},
                                                                    {Verdict::reject, "reject"},
                                                                    {Verdict::none, "n/a"}}};

json bits_or_null(const BitString& b) { return b.empty() ? json(nullptr) : json(b.str()); }

BitString bits_from(const json& j) { return j.is_null() ? BitString{} : BitString::parse(j.get<std::string>()); }

void check_fields(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ProtocolError(std::string(what) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ProtocolError(std::string(what) + ": unknown field '" + key + "'");
  }
}

}  // namespace

std::string to_string(Mode mode) { return enum_name(mode, kModes); }
std::string to_string(ShotStatus status) { return enum_name(status, kStatuses); }
std::string to_string(Verdict verdict) { return enum_name(verdict, kVerdicts); }
Mode parse_mode(const std::string& text) { return parse_enum(text, kModes, "mode"); }
ShotStatus parse_status(const std::string& text) { return parse_enum(text, kStatuses, "status"); }
Verdict parse_verdict(const std::string& text) { return parse_enum(text, kVerdicts, "verdict"); }

// Records -------------------------------------------------------------------

json to_json(const ShotRecord& r) {
  json claw = nullptr;
  if (r.claw) claw = {{"x0", r.claw->x0.str()}, {"x1", r.claw->x1.str()}, {"w", r.claw->w.str()}};
  return {
      {"shot", r.shot},
      {"stream", r.stream},
      {"instance", r.instance},
      {"protocol", to_string(r.protocol)},
      {"mode", to_string(r.mode)},
      {"branch", to_string(r.challenge.branch)},
      {"w", bits_or_null(r.w)},
      {"image", r.image ? json(*r.image) : json(nullptr)},
      {"claw", claw},
      {"anomaly", r.anomaly.empty() ? json(nullptr) : json(r.anomaly)},
      {"challenge",
       {{"r", bits_or_null(r.challenge.r)},
        {"basis", r.challenge.basis ? json(to_string(*r.challenge.basis)) : json(nullptr)}}},
      {"response",
       {{"x", bits_or_null(r.response.x)},
        {"d", bits_or_null(r.response.d)},
        {"outcome", r.response.outcome ? json(*r.response.outcome) : json(nullptr)}}},
      {"status", to_string(r.status)},
      {"verdict", to_string(r.verdict)},
  };
}

ShotRecord shot_from_json(const json& j) {
  check_fields(j,
               {"shot", "stream", "instance", "protocol", "mode", "branch", "w", "image", "claw", "anomaly",
                "challenge", "response", "status", "verdict"},
               "shot record");
  ShotRecord r;
  r.shot = j.at("shot").get<std::uint64_t>();
  r.stream = j.at("stream").get<std::uint64_t>();
  r.instance = j.at("instance").get<std::string>();
  r.protocol = parse_protocol_kind(j.at("protocol").get<std::string>());
  r.mode = parse_mode(j.at("mode").get<std::string>());
  r.challenge.branch = parse_branch(j.at("branch").get<std::string>());
  r.w = bits_from(j.at("w"));
  if (!j.at("image").is_null()) r.image = j.at("image").get<std::uint64_t>();
  if (const auto& c = j.at("claw"); !c.is_null()) {
    check_fields(c, {"x0", "x1", "w"}, "claw");
    r.claw = Claw{bits_from(c.at("x0")), bits_from(c.at("x1")), bits_from(c.at("w"))};
  }
  if (!j.at("anomaly").is_null()) r.anomaly = j.at("anomaly").get<std::string>();
  const auto& ch = j.at("challenge");
  check_fields(ch, {"r", "basis"}, "challenge");
  r.challenge.r = bits_from(ch.at("r"));
  if (!ch.at("basis").is_null()) r.challenge.basis = parse_basis(ch.at("basis").get<std::string>());
  const auto& resp = j.at("response");
  check_fields(resp, {"x", "d", "outcome"}, "response");
  r.response.x = bits_from(resp.at("x"));
  r.response.d = bits_from(resp.at("d"));
  if (!resp.at("outcome").is_null()) r.response.outcome = resp.at("outcome").get<int>();
  r.status = parse_status(j.at("status").get<std::string>());
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  return r;
}

std::string canonical_line(const ShotRecord& record) { return to_json(record).dump(); }

// Tally ---------------------------------------------------------------------

void Tally::add(const ShotRecord& record) {
  const bool is_a = record.challenge.branch == Branch::standard;
  BranchCount& branch = is_a ? a : b;
  BranchCount* by_r = nullptr;
  if (!is_a && record.protocol == ProtocolKind::factoring && !record.challenge.r.empty())
    by_r = &per_r[record.challenge.r.str()];

  ++branch.total;
  if (by_r) ++by_r->total;
  switch (record.status) {
    case ShotStatus::kept: {
      const std::uint64_t accepted = record.verdict == Verdict::accept ? 1 : 0;
      ++branch.n;
      branch.k += accepted;
      if (by_r) {
        ++by_r->n;
        by_r->k += accepted;
      }
      break;
    }
    case ShotStatus::discarded_invalid_w: ++discarded_invalid_w; break;
    case ShotStatus::discarded_zero_d: ++discarded_zero_d; break;
    case ShotStatus::unscorable: ++unscorable; break;
    case ShotStatus::voided: ++voided; break;
  }
}

void Tally::merge(const Tally& other) {
  auto add_count = [](BranchCount& x, const BranchCount& y) {
    x.n += y.n;
    x.k += y.k;
    x.total += y.total;
  };
  add_count(a, other.a);
  add_count(b, other.b);
  for (const auto& [r, count] : other.per_r) add_count(per_r[r], count);
  discarded_invalid_w += other.discarded_invalid_w;
  discarded_zero_d += other.discarded_zero_d;
  unscorable += other.unscorable;
  voided += other.voided;
}

namespace {

json count_json(const BranchCount& c) { return {{"n", c.n}, {"k", c.k}, {"total", c.total}}; }

BranchCount count_from(const json& j) {
  check_fields(j, {"n", "k", "total"}, "tally count");
  BranchCount c{j.at("n").get<std::uint64_t>(), j.at("k").get<std::uint64_t>(), j.at("total").get<std::uint64_t>()};
  if (c.k > c.n || c.n > c.total) throw ConfigError("tally: counts must satisfy k <= n <= total");
  return c;
}

}  // namespace

json to_json(const Tally& t) {
  json per_r = json::object();
  for (const auto& [r, c] : t.per_r) per_r[r] = count_json(c);
  return {{"A", count_json(t.a)},
          {"B", count_json(t.b)},
          {"per_r", per_r},
          {"discarded_invalid_w", t.discarded_invalid_w},
          {"discarded_zero_d", t.discarded_zero_d},
          {"unscorable", t.unscorable},
          {"voided", t.voided}};
}

Tally tally_from_json(const json& j) {
  try {
    check_fields(j, {"A", "B", "per_r", "discarded_invalid_w", "discarded_zero_d", "unscorable", "voided"}, "tally");
    Tally t;
    t.a = count_from(j.at("A"));
    t.b = count_from(j.at("B"));
    for (const auto& [r, c] : j.at("per_r").items()) t.per_r[r] = count_from(c);
    t.discarded_invalid_w = j.at("discarded_invalid_w").get<std::uint64_t>();
    t.discarded_zero_d = j.at("discarded_zero_d").get<std::uint64_t>();
    t.unscorable = j.at("unscorable").get<std::uint64_t>();
    t.voided = j.at("voided").get<std::uint64_t>();
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("tally: ") + e.what());
  } catch (const ProtocolError& e) {
    throw ConfigError(e.what());
  }
}

// Verifier ------------------------------------------------------------------

CommitDecision verifier_receive_commit(const KeyPair& keys, const BitString& w) {
  if (w.size() != commitment_bits(keys.pub))
    throw ProtocolError("commitment has " + std::to_string(w.size()) + " bits, expected " +
                        std::to_string(commitment_bits(keys.pub)));
  CommitDecision out;
  const InversionResult inv = invert_commitment(keys, w);
  if (const auto* r = std::get_if<RabinInstance>(&keys.pub)) out.image = rabin_image_from_register(*r, w);
  out.claw = inv.claw;
  out.reason = inv.reason;
  if (!inv.ok())
    out.status = kind_of(keys.pub) == ProtocolKind::factoring ? ShotStatus::discarded_invalid_w : ShotStatus::unscorable;
  return out;
}

bool verifier_check_a(const PublicInstance& inst, const Claw& claw, const BitString& x) {
  if (x.size() != preimage_bits(inst))
    throw ProtocolError("branch A answer has " + std::to_string(x.size()) + " bits, expected " +
                        std::to_string(preimage_bits(inst)));
  return evaluate_preimage(inst, x) == claw.w;
}

std::pair<ShotStatus, Verdict> verifier_check_b_lwe(const Claw& claw, const BitString& d, const ProtocolOptions& opts) {
  if (d.size() != claw.x0.size())
    throw ProtocolError("branch B answer has " + std::to_string(d.size()) + " bits, expected " +
                        std::to_string(claw.x0.size()));
  BitString used = d;
  BitString diff = claw.x0 ^ claw.x1;
  if (!opts.lwe_d_includes_b) {
    used = d.slice(1, d.size() - 1);
    diff = diff.slice(1, diff.size() - 1);
  }
  if (used.is_zero()) return {ShotStatus::discarded_zero_d, Verdict::none};
  return {ShotStatus::kept, binary_inner_product(used, diff) == 0 ? Verdict::accept : Verdict::reject};
}

std::optional<int> expected_factoring_outcome(const Claw& claw, const BitString& d, const BitString& r, Basis basis) {
  require(basis == Basis::z_plus_x || basis == Basis::z_minus_x, "factoring basis must be Z+X or Z-X");
  std::array<double, 2> psi{0.0, 0.0};
  psi[static_cast<std::size_t>(binary_inner_product(r, claw.x0))] += binary_inner_product(d, claw.x0) ? -1.0 : 1.0;
  psi[static_cast<std::size_t>(binary_inner_product(r, claw.x1))] += binary_inner_product(d, claw.x1) ? -1.0 : 1.0;
  const double norm2 = psi[0] * psi[0] + psi[1] * psi[1];
  if (norm2 == 0.0) return std::nullopt;
  // "+" eigenstate of (Z +- X)/sqrt 2: cos(pi/8)|0> +- sin(pi/8)|1>.
  const double c = std::cos(std::numbers::pi / 8);
  const double s = basis == Basis::z_plus_x ? std::sin(std::numbers::pi / 8) : -std::sin(std::numbers::pi / 8);
  const double overlap = c * psi[0] + s * psi[1];
  return overlap * overlap / norm2 > 0.5 ? 0 : 1;
}

bool verifier_check_b_factoring(const Claw& claw, const BitString& d, const BitString& r, Basis basis, int outcome) {
  if (d.size() != claw.x0.size())
    throw ProtocolError("parity answer has " + std::to_string(d.size()) + " bits, expected " +
                        std::to_string(claw.x0.size()));
  if (outcome != 0 && outcome != 1) throw ProtocolError("basis outcome must be 0 or 1");
  require(r.size() == claw.x0.size() && !r.is_zero(), "r must be a nonzero string of the x width");
  const auto expected = expected_factoring_outcome(claw, d, r, basis);
  return expected && *expected == outcome;
}

void score_record(const KeyPair& keys, const ProtocolOptions& opts, ShotRecord& rec) {
  const CommitDecision dec = verifier_receive_commit(keys, rec.w);
  rec.claw = dec.claw;
  rec.image = dec.image;
  rec.anomaly = dec.reason;
  rec.verdict = Verdict::none;
  rec.status = dec.status;
  if (dec.status != ShotStatus::kept) return;

  const Claw& claw = *dec.claw;
  if (rec.challenge.branch == Branch::standard) {
    rec.verdict = verifier_check_a(keys.pub, claw, rec.response.x) ? Verdict::accept : Verdict::reject;
  } else if (rec.protocol == ProtocolKind::lwe) {
    std::tie(rec.status, rec.verdict) = verifier_check_b_lwe(claw, rec.response.d, opts);
  } else {
    if (!rec.response.outcome) throw ProtocolError("factoring branch B response lacks the basis outcome");
    if (!rec.challenge.basis) throw ProtocolError("factoring branch B challenge lacks a basis");
    rec.verdict = verifier_check_b_factoring(claw, rec.response.d, rec.challenge.r, *rec.challenge.basis,
                                             *rec.response.outcome)
                      ? Verdict::accept
                      : Verdict::reject;
  }
}

ShotRecord rescore(const KeyPair& keys, const ProtocolOptions& opts, const ShotRecord& record) {
  ShotRecord out = record;
  if (record.status == ShotStatus::voided) return out;
  score_record(keys, opts, out);
  return out;
}

// Honest prover -------------------------------------------------------------

namespace {

StateVector committed(const CircuitPlan& plan) {
  StateVector s(plan.n_qubits);
  apply_unitary_steps(s, plan.steps);
  return s;
}

const MeasurePoint& final_measure(const CircuitPlan& plan) {
  require(!plan.steps.empty() && std::holds_alternative<MeasurePoint>(plan.steps.back()),
          "commit plan must end with the w measurement");
  return std::get<MeasurePoint>(plan.steps.back());
}

}  // namespace

HonestProver::HonestProver(PublicInstance inst, bool compiled)
    : inst_(std::move(inst)),
      kind_(kind_of(inst_)),
      plan_(build_commit(inst_, compiled)),
      pre_measure_(committed(plan_)),
      w_qubits_(final_measure(plan_).qubits) {}

void HonestProver::begin_shot(std::uint64_t root_seed, std::uint64_t shot) {
  rng_ = Rng(root_seed, shot, StreamRole::prover);
  state_.reset();
}

BitString HonestProver::commit() {
  state_ = pre_measure_;
  return state_->measure(w_qubits_, rng_).outcome;
}

BitString HonestProver::answer_standard() {
  if (!state_) throw ProtocolError("answer before commitment");
  auto recs = execute_steps(*state_, build_branch_suffix(plan_, kind_, Branch::standard), rng_);
  return recs.at("x").outcome;
}

BitString HonestProver::answer_hadamard() {
  if (!state_) throw ProtocolError("answer before commitment");
  if (kind_ != ProtocolKind::lwe) throw ProtocolError("Hadamard challenge is specific to LWE");
  auto recs = execute_steps(*state_, build_branch_suffix(plan_, kind_, Branch::interference), rng_);
  return recs.at("d").outcome;
}

BitString HonestProver::answer_parity(const BitString& r) {
  if (!state_) throw ProtocolError("answer before commitment");
  if (kind_ != ProtocolKind::factoring) throw ProtocolError("parity challenge is specific to factoring");
  if (r.size() != preimage_bits(inst_) || r.is_zero()) throw ProtocolError("r must be a nonzero x-width string");
  auto steps = build_branch_suffix(plan_, kind_, Branch::interference, r);
  steps.pop_back();  // ancilla measurement waits for the basis
  auto recs = execute_steps(*state_, steps, rng_);
  return recs.at("d").outcome;
}

int HonestProver::answer_basis(Basis basis) {
  if (!state_) throw ProtocolError("answer before commitment");
  if (kind_ != ProtocolKind::factoring) throw ProtocolError("basis challenge is specific to factoring");
  if (basis != Basis::z_plus_x && basis != Basis::z_minus_x) throw ProtocolError("basis must be Z+X or Z-X");
  return state_->measure_in_basis(plan_.reg("anc").offset, basis, rng_).outcome[0];
}

Prover::DelayedAnswer HonestProver::answer_delayed(const Challenge& challenge) {
  if (kind_ == ProtocolKind::factoring && challenge.branch == Branch::interference &&
      (challenge.r.size() != preimage_bits(inst_) || challenge.r.is_zero() || !challenge.basis))
    throw ProtocolError("delayed factoring challenge needs a nonzero r and a basis");
  const auto suffix = build_branch_suffix(plan_, kind_, challenge.branch, challenge.r, challenge.basis);
  state_ = pre_measure_;
  apply_unitary_steps(*state_, suffix);

  // Every measurement at the end: w first, then the suffix readouts in order.
  DelayedAnswer out;
  out.w = state_->measure(w_qubits_, rng_).outcome;
  std::vector<PlanStep> readouts;
  for (const auto& step : suffix)
    if (std::holds_alternative<MeasurePoint>(step)) readouts.push_back(step);
  auto recs = execute_steps(*state_, readouts, rng_);
  if (challenge.branch == Branch::standard) {
    out.response.x = recs.at("x").outcome;
  } else {
    out.response.d = recs.at("d").outcome;
    if (auto it = recs.find("outcome"); it != recs.end()) out.response.outcome = it->second.outcome[0];
  }
  return out;
}

// Experiment ----------------------------------------------------------------

Challenge schedule_challenge(const PublicInstance& inst, const ExperimentConfig& config, std::uint64_t shot) {
  require(shot < config.shots_a + config.shots_b, "schedule_challenge: shot index beyond the schedule");
  Challenge c;
  if (shot < config.shots_a) return c;
  c.branch = Branch::interference;
  if (kind_of(inst) == ProtocolKind::factoring) {
    const unsigned width = preimage_bits(inst);
    const std::uint64_t nonzero = (std::uint64_t{1} << width) - 1;
    c.r = encode_bits(1 + (shot - config.shots_a) % nonzero, width);
    Rng rng(config.seed, shot, StreamRole::verifier);
    c.basis = rng.coin() ? Basis::z_minus_x : Basis::z_plus_x;
  }
  return c;
}

ShotRecord run_shot(const KeyPair& keys, const ExperimentConfig& config, std::uint64_t shot, Prover& prover) {
  ShotRecord rec;
  rec.shot = shot;
  rec.stream = shot;
  rec.instance = id_of(keys.pub);
  rec.protocol = kind_of(keys.pub);
  rec.mode = config.mode;
  rec.challenge = schedule_challenge(keys.pub, config, shot);

  try {
    prover.begin_shot(config.seed, shot);
    if (config.mode == Mode::delayed) {
      auto answer = prover.answer_delayed(rec.challenge);
      rec.w = std::move(answer.w);
      rec.response = std::move(answer.response);
    } else {
      rec.w = prover.commit();
      const CommitDecision dec = verifier_receive_commit(keys, rec.w);
      if (dec.status != ShotStatus::kept) {
        // No challenge is issued for a discarded commitment.
        rec.claw = dec.claw;
        rec.image = dec.image;
        rec.anomaly = dec.reason;
        rec.status = dec.status;
        return rec;
      }
      if (rec.challenge.branch == Branch::standard) {
        rec.response.x = prover.answer_standard();
      } else if (rec.protocol == ProtocolKind::lwe) {
        rec.response.d = prover.answer_hadamard();
      } else {
        rec.response.d = prover.answer_parity(rec.challenge.r);
        rec.response.outcome = prover.answer_basis(*rec.challenge.basis);
      }
    }
    score_record(keys, config.options, rec);
  } catch (const ProtocolError& e) {
    rec.status = ShotStatus::voided;
    rec.verdict = Verdict::none;
    rec.anomaly = e.what();
  }
  return rec;
}

ExperimentResult run_experiment(const KeyPair& keys, const ExperimentConfig& config, Prover& prover,
                                const RecordSink& sink) {
  ExperimentResult out;
  const std::uint64_t total = config.shots_a + config.shots_b;
  if (!sink) out.records.reserve(static_cast<std::size_t>(total));
  for (std::uint64_t shot = 0; shot < total; ++shot) {
    ShotRecord rec = run_shot(keys, config, shot, prover);
    out.tally.add(rec);
    if (sink)
      sink(rec);
    else
      out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace poq

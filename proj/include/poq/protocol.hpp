#pragma once

// Verifier checks, the per-shot interaction and the honest quantum prover.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "poq/circuits.hpp"
#include "poq/sim.hpp"
#include "poq/tcf.hpp"

namespace poq {

enum class Mode { interactive, delayed };
enum class ShotStatus { kept, discarded_invalid_w, discarded_zero_d, unscorable, voided };
enum class Verdict { accept, reject, none };

std::string to_string(Mode mode);
std::string to_string(ShotStatus status);
std::string to_string(Verdict verdict);
Mode parse_mode(const std::string& text);
ShotStatus parse_status(const std::string& text);
Verdict parse_verdict(const std::string& text);

/// r and basis are set only for factoring branch B.
struct Challenge {
  Branch branch = Branch::standard;
  BitString r;
  std::optional<Basis> basis;

  bool operator==(const Challenge&) const = default;
};

/// x for branch A; d (and outcome, factoring) for branch B.
struct Response {
  BitString x;
  BitString d;
  std::optional<int> outcome;

  bool operator==(const Response&) const = default;
};

struct ShotRecord {
  std::uint64_t shot = 0;
  std::uint64_t stream = 0;
  std::string instance;
  ProtocolKind protocol = ProtocolKind::lwe;
  Mode mode = Mode::interactive;
  BitString w;
  std::optional<std::uint64_t> image;  // factoring: decoded image of w
  std::optional<Claw> claw;
  std::string anomaly;
  Challenge challenge;
  Response response;
  ShotStatus status = ShotStatus::voided;
  Verdict verdict = Verdict::none;
};

nlohmann::json to_json(const ShotRecord& record);
ShotRecord shot_from_json(const nlohmann::json& j);
/// Sorted-key compact JSON; byte-equal for equal records.
std::string canonical_line(const ShotRecord& record);

struct BranchCount {
  std::uint64_t n = 0;  // kept shots
  std::uint64_t k = 0;  // accepted
  std::uint64_t total = 0;  // all shots issued on this branch or r value

  bool operator==(const BranchCount&) const = default;
};

struct Tally {
  BranchCount a;
  BranchCount b;
  std::map<std::string, BranchCount> per_r;  // factoring branch B, keyed by r
  std::uint64_t discarded_invalid_w = 0;
  std::uint64_t discarded_zero_d = 0;
  std::uint64_t unscorable = 0;
  std::uint64_t voided = 0;

  void add(const ShotRecord& record);
  /// Commutative and associative.
  void merge(const Tally& other);
  bool operator==(const Tally&) const = default;
};

nlohmann::json to_json(const Tally& tally);
Tally tally_from_json(const nlohmann::json& j);

struct ProtocolOptions {
  /// LWE d covers the b qubit as well as x. When false the verifier drops d's first bit.
  bool lwe_d_includes_b = true;
};

// Verifier checks -----------------------------------------------------------

struct CommitDecision {
  ShotStatus status = ShotStatus::kept;
  std::optional<Claw> claw;
  std::optional<std::uint64_t> image;
  std::string reason;
};

CommitDecision verifier_receive_commit(const KeyPair& keys, const BitString& w);
bool verifier_check_a(const PublicInstance& inst, const Claw& claw, const BitString& x);
/// Zero d yields discarded_zero_d; otherwise kept with the parity verdict.
std::pair<ShotStatus, Verdict> verifier_check_b_lwe(const Claw& claw, const BitString& d, const ProtocolOptions& opts);
/// Likelier outcome (0 = "+") of the reconstructed ancilla state; nullopt when that state vanishes.
std::optional<int> expected_factoring_outcome(const Claw& claw, const BitString& d, const BitString& r, Basis basis);
bool verifier_check_b_factoring(const Claw& claw, const BitString& d, const BitString& r, Basis basis, int outcome);

/// Status and verdict of a completed shot from its commitment, challenge and response.
void score_record(const KeyPair& keys, const ProtocolOptions& opts, ShotRecord& record);
/// Re-derives status and verdict of a recorded shot; voided shots stay voided.
ShotRecord rescore(const KeyPair& keys, const ProtocolOptions& opts, const ShotRecord& record);

// Provers -------------------------------------------------------------------

/// The prover side of one shot. Interactive calls: commit, then one of
/// answer_standard / answer_hadamard / (answer_parity, answer_basis).
/// Delayed: answer_delayed alone.
class Prover {
 public:
  struct DelayedAnswer {
    BitString w;
    Response response;
  };

  virtual ~Prover() = default;
  virtual std::string name() const = 0;
  virtual void begin_shot(std::uint64_t root_seed, std::uint64_t shot) = 0;
  virtual BitString commit() = 0;
  virtual BitString answer_standard() = 0;
  virtual BitString answer_hadamard() = 0;
  virtual BitString answer_parity(const BitString& r) = 0;
  virtual int answer_basis(Basis basis) = 0;
  virtual DelayedAnswer answer_delayed(const Challenge& challenge) = 0;
};

class HonestProver final : public Prover {
 public:
  explicit HonestProver(PublicInstance inst, bool compiled = true);

  std::string name() const override { return "honest"; }
  void begin_shot(std::uint64_t root_seed, std::uint64_t shot) override;
  BitString commit() override;
  BitString answer_standard() override;
  BitString answer_hadamard() override;
  BitString answer_parity(const BitString& r) override;
  int answer_basis(Basis basis) override;
  DelayedAnswer answer_delayed(const Challenge& challenge) override;

  const CircuitPlan& plan() const { return plan_; }
  /// Commit circuit state just before the w measurement.
  const StateVector& committed_state() const { return pre_measure_; }

 private:
  PublicInstance inst_;
  ProtocolKind kind_;
  CircuitPlan plan_;
  StateVector pre_measure_;
  std::vector<int> w_qubits_;
  std::optional<StateVector> state_;
  Rng rng_{0};
};

// Experiment ----------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t shots_a = 0;
  std::uint64_t shots_b = 0;
  Mode mode = Mode::interactive;
  std::uint64_t seed = 1;
  ProtocolOptions options;
};

/// Branch A for the first shots_a shots, then branch B. Factoring r cycles through
/// the nonzero strings; the basis is drawn from the verifier stream of the shot.
Challenge schedule_challenge(const PublicInstance& inst, const ExperimentConfig& config, std::uint64_t shot);

/// Verifier-driven run of one shot against `prover`. ProtocolError from the prover voids the shot.
ShotRecord run_shot(const KeyPair& keys, const ExperimentConfig& config, std::uint64_t shot, Prover& prover);

struct ExperimentResult {
  Tally tally;
  std::vector<ShotRecord> records;
};

using RecordSink = std::function<void(const ShotRecord&)>;

/// Deterministic under config.seed. Records are kept unless a sink is given.
ExperimentResult run_experiment(const KeyPair& keys, const ExperimentConfig& config, Prover& prover,
                                const RecordSink& sink = {});

}  // namespace poq

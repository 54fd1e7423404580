#pragma once

// Classical provers. They are built from the public instance alone: no
// constructor accepts a KeyPair or trapdoor.

#include <memory>
#include <string>
#include <vector>

#include "poq/protocol.hpp"
#include "poq/tcf.hpp"

namespace poq {

/// Picks a uniform x, commits f(x), answers x in branch A and uniform bits in branch B.
class KnownPreimageCheater final : public Prover {
 public:
  explicit KnownPreimageCheater(PublicInstance inst);
  KnownPreimageCheater(const KeyPair&) = delete;
  KnownPreimageCheater(const Trapdoor&) = delete;

  std::string name() const override { return "known_preimage"; }
  void begin_shot(std::uint64_t root_seed, std::uint64_t shot) override;
  BitString commit() override;
  BitString answer_standard() override;
  BitString answer_hadamard() override;
  BitString answer_parity(const BitString& r) override;
  int answer_basis(Basis basis) override;
  DelayedAnswer answer_delayed(const Challenge& challenge) override;

 private:
  PublicInstance inst_;
  BitString x_;
  Rng rng_{0};
};

/// Uniform commitment and uniform responses.
class RandomCheater final : public Prover {
 public:
  explicit RandomCheater(PublicInstance inst);
  RandomCheater(const KeyPair&) = delete;
  RandomCheater(const Trapdoor&) = delete;

  std::string name() const override { return "random"; }
  void begin_shot(std::uint64_t root_seed, std::uint64_t shot) override;
  BitString commit() override;
  BitString answer_standard() override;
  BitString answer_hadamard() override;
  BitString answer_parity(const BitString& r) override;
  int answer_basis(Basis basis) override;
  DelayedAnswer answer_delayed(const Challenge& challenge) override;

 private:
  PublicInstance inst_;
  Rng rng_{0};
};

std::vector<std::string> cheater_names();
std::unique_ptr<Prover> make_cheater(const std::string& name, const PublicInstance& inst);

/// "honest" or "cheater:<name>".
std::unique_ptr<Prover> make_prover(const std::string& spec, const PublicInstance& inst, bool compiled = true);

}  // namespace poq

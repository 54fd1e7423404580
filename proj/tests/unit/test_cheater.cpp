#include <gtest/gtest.h>

#include <cmath>
#include <type_traits>

#include "poq/cheater.hpp"
#include "poq/errors.hpp"
#include "poq/stats.hpp"

using namespace poq;

// The classical provers can only be built from public data.
static_assert(std::is_constructible_v<KnownPreimageCheater, PublicInstance>);
static_assert(!std::is_constructible_v<KnownPreimageCheater, const KeyPair&>);
static_assert(!std::is_constructible_v<KnownPreimageCheater, const Trapdoor&>);
static_assert(!std::is_constructible_v<KnownPreimageCheater, RabinTrapdoor>);
static_assert(!std::is_constructible_v<KnownPreimageCheater, LweTrapdoor>);
static_assert(!std::is_constructible_v<RandomCheater, const KeyPair&>);
static_assert(!std::is_constructible_v<RandomCheater, const Trapdoor&>);
static_assert(!std::is_constructible_v<RandomCheater, LweTrapdoor>);

namespace {

struct Rates {
  double p_a, p_b, q, se;
  Tally tally;
  std::vector<ShotRecord> records;
};

// A uniformly random nonzero d of width k has d.diff = 0 for 2^(k-1) - 1 of the 2^k - 1 choices.
double lwe_guess_rate(int k) { return double((1 << (k - 1)) - 1) / double((1 << k) - 1); }

// Expected factoring branch B rate for a coin-flip outcome: half, except that a d with
// d.diff = 1 while r.diff = 0 is impossible for an ideal prover and always rejected.
double factoring_guess_rate(const std::vector<ShotRecord>& records, std::uint64_t& kept) {
  double sum = 0.0;
  kept = 0;
  for (const auto& rec : records) {
    if (rec.challenge.branch != Branch::interference || rec.status != ShotStatus::kept) continue;
    const BitString diff = rec.claw->x0 ^ rec.claw->x1;
    int parity = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) parity ^= rec.challenge.r[i] & diff[i];
    const bool r_blind = parity == 0;
    sum += r_blind ? 0.25 : 0.5;
    ++kept;
  }
  return kept ? sum / double(kept) : 0.0;
}

Rates run(const KeyPair& keys, const std::string& name, std::uint64_t shots, Mode mode = Mode::interactive) {
  auto prover = make_cheater(name, keys.pub);
  auto res = run_experiment(keys, ExperimentConfig{shots, shots, mode, 31, {}}, *prover);
  const auto& t = res.tally;
  Rates r{};
  r.tally = t;
  r.records = std::move(res.records);
  r.p_a = t.a.n ? double(t.a.k) / double(t.a.n) : 0.0;
  r.p_b = t.b.n ? double(t.b.k) / double(t.b.n) : 0.0;
  const auto kind = kind_of(keys.pub);
  const double c = class_constant(kind);
  r.q = quantumness(r.p_a, r.p_b, kind);
  // Binomial standard error of q; floor the variance so an exact rate of 1 still gets a scale.
  const double va = std::max(r.p_a * (1 - r.p_a), 0.25 / double(t.a.n + 1)) / double(std::max<std::uint64_t>(t.a.n, 1));
  const double vb = std::max(r.p_b * (1 - r.p_b), 0.25 / double(t.b.n + 1)) / double(std::max<std::uint64_t>(t.b.n, 1));
  r.se = std::sqrt(va + c * c * vb);
  return r;
}

}  // namespace

TEST(Cheater, NamesAndFactory) {
  EXPECT_EQ(cheater_names(), (std::vector<std::string>{"known_preimage", "random"}));
  const auto inst = lwe_paper_instance(0).pub;
  EXPECT_EQ(make_prover("cheater:random", inst)->name(), "random");
  EXPECT_EQ(make_prover("honest", inst)->name(), "honest");
  EXPECT_THROW(make_cheater("oracle", inst), ConfigError);
  EXPECT_THROW(make_prover("cheater", inst), ConfigError);
}

TEST(Cheater, KnownPreimageLwe) {
  const auto r = run(lwe_paper_instance(0), "known_preimage", 20000);
  EXPECT_EQ(r.p_a, 1.0);
  EXPECT_NEAR(r.p_b, lwe_guess_rate(5), 4 * std::sqrt(0.25 / double(r.tally.b.n)));
  EXPECT_LE(r.q, 4 * r.se);
}

TEST(Cheater, KnownPreimageFactoring) {
  for (const char* id : {"8", "15", "21"}) {
    const auto r = run(paper_instance(ProtocolKind::factoring, id), "known_preimage", 20000);
    std::uint64_t kept = 0;
    const double want = factoring_guess_rate(r.records, kept);
    EXPECT_EQ(kept, r.tally.b.n) << id;
    EXPECT_EQ(r.p_a, 1.0) << id;
    EXPECT_NEAR(r.p_b, want, 4 * std::sqrt(0.25 / double(r.tally.b.n))) << id;
    EXPECT_LE(r.q, 4 * r.se) << id;
  }
}

TEST(Cheater, RandomStaysBelowThreshold) {
  const auto f = run(paper_instance(ProtocolKind::factoring, "15"), "random", 20000);
  EXPECT_LT(f.p_a, 0.4);
  EXPECT_LT(f.q, 0.0);
  const auto l = run(lwe_paper_instance(1), "random", 20000);
  EXPECT_NEAR(l.p_b, lwe_guess_rate(5), 4 * std::sqrt(0.25 / double(l.tally.b.n)));
  EXPECT_LT(l.q, -0.5);
}

TEST(Cheater, DelayedModeAlsoClassical) {
  for (const auto& name : cheater_names()) {
    for (const auto& keys : {lwe_paper_instance(2), paper_instance(ProtocolKind::factoring, "16")}) {
      const auto r = run(keys, name, 5000, Mode::delayed);
      EXPECT_LE(r.q, 4 * r.se) << name;
    }
  }
}

TEST(Cheater, DeterministicPerShot) {
  const auto inst = paper_instance(ProtocolKind::factoring, "21").pub;
  KnownPreimageCheater a(inst), b(inst);
  for (std::uint64_t s = 0; s < 20; ++s) {
    a.begin_shot(5, s);
    b.begin_shot(5, s);
    EXPECT_EQ(a.commit(), b.commit());
    EXPECT_EQ(a.answer_standard(), b.answer_standard());
  }
}

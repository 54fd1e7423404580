#include "poq/cheater.hpp"

#include "poq/errors.hpp"

namespace poq {

namespace {

BitString random_bits(Rng& rng, std::size_t width) {
  BitString out(width);
  for (std::size_t i = 0; i < width; ++i) out.set(i, rng.coin() ? 1 : 0);
  return out;
}

/// Commitment string the verifier decodes back to f(x).
BitString commitment_for(const PublicInstance& inst, const BitString& x) {
  if (const auto* r = std::get_if<RabinInstance>(&inst)) return rabin_register_from_image(*r, rabin_eval_value(*r, decode_bits(x)));
  return evaluate_preimage(inst, x);
}

Prover::DelayedAnswer answer_all(Prover& p, const Challenge& c) {
  Prover::DelayedAnswer out;
  out.w = p.commit();
  if (c.branch == Branch::standard) {
    out.response.x = p.answer_standard();
  } else if (c.basis) {
    out.response.d = p.answer_parity(c.r);
    out.response.outcome = p.answer_basis(*c.basis);
  } else {
    out.response.d = p.answer_hadamard();
  }
  return out;
}

}  // namespace

KnownPreimageCheater::KnownPreimageCheater(PublicInstance inst) : inst_(std::move(inst)) {}

void KnownPreimageCheater::begin_shot(std::uint64_t root_seed, std::uint64_t shot) {
  rng_ = Rng(root_seed, shot, StreamRole::prover);
  x_ = BitString{};
}

BitString KnownPreimageCheater::commit() {
  x_ = random_bits(rng_, preimage_bits(inst_));
  return commitment_for(inst_, x_);
}

BitString KnownPreimageCheater::answer_standard() { return x_; }
BitString KnownPreimageCheater::answer_hadamard() { return random_bits(rng_, preimage_bits(inst_)); }
BitString KnownPreimageCheater::answer_parity(const BitString&) { return random_bits(rng_, preimage_bits(inst_)); }
int KnownPreimageCheater::answer_basis(Basis) { return rng_.coin() ? 1 : 0; }

Prover::DelayedAnswer KnownPreimageCheater::answer_delayed(const Challenge& challenge) {
  return answer_all(*this, challenge);
}

RandomCheater::RandomCheater(PublicInstance inst) : inst_(std::move(inst)) {}

void RandomCheater::begin_shot(std::uint64_t root_seed, std::uint64_t shot) {
  rng_ = Rng(root_seed, shot, StreamRole::prover);
}

BitString RandomCheater::commit() { return random_bits(rng_, commitment_bits(inst_)); }
BitString RandomCheater::answer_standard() { return random_bits(rng_, preimage_bits(inst_)); }
BitString RandomCheater::answer_hadamard() { return random_bits(rng_, preimage_bits(inst_)); }
BitString RandomCheater::answer_parity(const BitString&) { return random_bits(rng_, preimage_bits(inst_)); }
int RandomCheater::answer_basis(Basis) { return rng_.coin() ? 1 : 0; }

Prover::DelayedAnswer RandomCheater::answer_delayed(const Challenge& challenge) { return answer_all(*this, challenge); }

std::vector<std::string> cheater_names() { return {"known_preimage", "random"}; }

std::unique_ptr<Prover> make_cheater(const std::string& name, const PublicInstance& inst) {
  if (name == "known_preimage") return std::make_unique<KnownPreimageCheater>(inst);
  if (name == "random") return std::make_unique<RandomCheater>(inst);
  throw ConfigError("unknown cheater strategy '" + name + "'");
}

std::unique_ptr<Prover> make_prover(const std::string& spec, const PublicInstance& inst, bool compiled) {
  if (spec == "honest") return std::make_unique<HonestProver>(inst, compiled);
  const std::string prefix = "cheater:";
  if (spec.rfind(prefix, 0) == 0) return make_cheater(spec.substr(prefix.size()), inst);
  throw ConfigError("prover must be 'honest' or 'cheater:<name>', got '" + spec + "'");
}

}  // namespace poq

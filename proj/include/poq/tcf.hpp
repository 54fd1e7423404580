#pragma once

// Trapdoor claw-free function families: Rabin squaring x^2 mod N and the
// rounded LWE function f(b, x) = MSB(Ax + b*y mod q).

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "poq/numtheory.hpp"

namespace poq {

enum class ProtocolKind { lwe, factoring };

std::string to_string(ProtocolKind kind);
ProtocolKind parse_protocol_kind(const std::string& text);

struct RabinInstance {
  std::string id;
  std::uint64_t modulus = 0;
  unsigned input_bits = 0;   // x register width
  unsigned output_bits = 0;  // y register width

  std::uint64_t domain_size() const { return std::uint64_t{1} << input_bits; }
};

struct RabinTrapdoor {
  std::uint64_t p = 0;
  std::uint64_t q = 0;
};

struct LweInstance {
  std::string id;
  std::uint64_t modulus = 0;                       // power of two
  std::vector<std::vector<std::uint64_t>> matrix;  // m rows of n entries
  ResidueVector y;

  std::size_t rows() const { return matrix.size(); }
  std::size_t cols() const { return matrix.empty() ? 0 : matrix.front().size(); }
  unsigned coordinate_bits() const;
  /// b bit plus n coordinates.
  unsigned input_bits() const { return 1 + static_cast<unsigned>(cols()) * coordinate_bits(); }
};

struct LweTrapdoor {
  std::vector<std::uint64_t> s;  // binary
  ResidueVector e;
};

/// Colliding inputs, stored as encodings of the prover's preimage register.
/// For LWE, x0 encodes (0, x1 + s) and x1 encodes (1, x1).
struct Claw {
  BitString x0;
  BitString x1;
  BitString w;

  bool operator==(const Claw&) const = default;
};

/// Claw on success; otherwise a reason (invalid image, anomaly).
struct InversionResult {
  std::optional<Claw> claw;
  std::size_t preimage_count = 0;
  std::string reason;

  bool ok() const { return claw.has_value(); }
};

using PublicInstance = std::variant<RabinInstance, LweInstance>;
using Trapdoor = std::variant<std::monostate, RabinTrapdoor, LweTrapdoor>;

/// Verifier-side material. The prover only ever sees `pub`.
struct KeyPair {
  PublicInstance pub;
  Trapdoor trapdoor;
  /// False when the stored trapdoor does not reproduce the public data (y != As + e).
  bool trapdoor_consistent = true;
};

ProtocolKind kind_of(const PublicInstance& inst);
std::string id_of(const PublicInstance& inst);
/// Width of the preimage register the prover measures in branch A.
unsigned preimage_bits(const PublicInstance& inst);
/// Width of the commitment string w.
unsigned commitment_bits(const PublicInstance& inst);

// Rabin ---------------------------------------------------------------------

KeyPair rabin_keygen(std::uint64_t p, std::uint64_t q, unsigned input_bits, unsigned output_bits);
/// Power-of-two demo moduli (8, 16): no CRT trapdoor, inversion by enumeration.
KeyPair rabin_demo(std::uint64_t modulus, unsigned input_bits, unsigned output_bits);

BitString rabin_eval(const RabinInstance& inst, std::uint64_t x);
std::uint64_t rabin_eval_value(const RabinInstance& inst, std::uint64_t x);

/// Image value of a measured y-register readout: round(k N / 2^n_y) mod N.
/// The inverse QFT places x^2 mod N near k = v 2^n_y / N; identity when N = 2^n_y.
std::uint64_t rabin_image_from_register(const RabinInstance& inst, const BitString& measured);
/// Register readout that decodes to image.
BitString rabin_register_from_image(const RabinInstance& inst, std::uint64_t image);

/// The two preimages of image inside [0, 2^n_x), ascending, or an invalid-image result.
InversionResult rabin_invert(const RabinInstance& inst, const RabinTrapdoor* trapdoor, std::uint64_t image);

// LWE -----------------------------------------------------------------------

KeyPair lwe_keygen(std::size_t m, std::size_t n, std::uint64_t q, double sigma, std::uint64_t seed,
                   std::optional<std::vector<std::uint64_t>> forced_s = std::nullopt);
/// The four desk-scale instances used in the experiment (index 0..3), verbatim.
KeyPair lwe_paper_instance(int index);
/// Builds an instance, rejecting non power-of-two moduli and out-of-range entries.
LweInstance make_lwe_instance(std::string id, std::uint64_t q, std::vector<std::vector<std::uint64_t>> a,
                              std::vector<std::uint64_t> y);

BitString lwe_eval(const LweInstance& inst, int b, const ResidueVector& x);
BitString lwe_encode_input(const LweInstance& inst, int b, const ResidueVector& x);
std::pair<int, ResidueVector> lwe_decode_input(const LweInstance& inst, const BitString& bits);
BitString lwe_eval_bits(const LweInstance& inst, const BitString& input);

InversionResult lwe_invert(const LweInstance& inst, const LweTrapdoor& trapdoor, const BitString& w);

// Shared --------------------------------------------------------------------

/// f applied to a preimage-register readout, as the commitment string.
BitString evaluate_preimage(const PublicInstance& inst, const BitString& input);

/// Verifier inversion of a commitment (decoding the register for Rabin).
InversionResult invert_commitment(const KeyPair& keys, const BitString& w);

/// Public JSON. Never contains trapdoor fields.
nlohmann::json public_to_json(const PublicInstance& inst);
/// Public JSON plus a "trapdoor" object when one exists.
nlohmann::json keypair_to_json(const KeyPair& keys);
PublicInstance public_from_json(const nlohmann::json& j);
KeyPair keypair_from_json(const nlohmann::json& j);

/// Resolves "paper:<id>" (LWE 0..3, factoring 8/15/16/21) for the given protocol.
KeyPair paper_instance(ProtocolKind kind, const std::string& id);

}  // namespace poq

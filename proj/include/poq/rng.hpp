#pragma once

#include <cstdint>
#include <random>

namespace poq {

/// Who consumes a stream. Verifier and prover draws for the same shot never share state.
enum class StreamRole : std::uint64_t { verifier = 1, prover = 2, keygen = 3, sampler = 4 };

/// Deterministic random stream derived from (root seed, stream id, role).
///
/// Distributions are implemented here rather than with the <random> adaptors
/// so replays are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t root, std::uint64_t stream, StreamRole role);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound);
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace poq

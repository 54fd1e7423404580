#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "poq/rng.hpp"

namespace poq {

/// Ordered bits, most significant first. Every stored element is 0 or 1.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t length) : bits_(length, 0) {}
  BitString(std::initializer_list<int> bits);

  /// Parses "0101"; any other character is a contract violation.
  static BitString parse(std::string_view text);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  int operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, int bit);

  bool is_zero() const;
  int popcount() const;
  std::string str() const;

  BitString operator^(const BitString& other) const;
  BitString concat(const BitString& tail) const;
  BitString slice(std::size_t offset, std::size_t length) const;

  bool operator==(const BitString&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Entries of a vector over Z_q, each in [0, q).
struct ResidueVector {
  std::vector<std::uint64_t> entries;
  std::uint64_t modulus = 1;

  ResidueVector() = default;
  ResidueVector(std::vector<std::uint64_t> values, std::uint64_t q);

  std::size_t size() const { return entries.size(); }
  std::uint64_t operator[](std::size_t i) const { return entries[i]; }
  bool operator==(const ResidueVector&) const = default;
};

/// Sum of a_i b_i mod 2.
int binary_inner_product(const BitString& a, const BitString& b);

/// MSB-first encoding of value into width bits.
BitString encode_bits(std::uint64_t value, std::size_t width);
std::uint64_t decode_bits(const BitString& bits);

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m);
std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m);
bool is_prime(std::uint64_t n);
bool is_power_of_two(std::uint64_t n);
/// ceil(log2(n)) for n >= 1.
unsigned ceil_log2(std::uint64_t n);

/// All square roots of w modulo an odd prime p (0, 1 or 2 values, ascending).
std::vector<std::uint64_t> sqrt_mod_prime(std::uint64_t w, std::uint64_t p);

/// All x in [0, pq) with x^2 = w (mod pq), combined from the prime roots by CRT.
/// Empty when w is not a square. Ascending order.
std::vector<std::uint64_t> sqrt_mod_semiprime(std::uint64_t w, std::uint64_t p, std::uint64_t q);

/// Signed sample with weight exp(-k^2 / 2 sigma^2) on |k| <= ceil(6 sigma).
std::int64_t discrete_gaussian_signed(double sigma, Rng& rng);
/// The signed sample reduced into [0, q).
std::uint64_t discrete_gaussian_sample(double sigma, std::uint64_t q, Rng& rng);

}  // namespace poq

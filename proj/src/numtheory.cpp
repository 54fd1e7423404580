#include "poq/numtheory.hpp"

#include <algorithm>
#include <cmath>

#include "poq/errors.hpp"

namespace poq {

BitString::BitString(std::initializer_list<int> bits) {
  bits_.reserve(bits.size());
  for (int b : bits) {
    require(b == 0 || b == 1, "BitString: bits must be 0 or 1");
    bits_.push_back(static_cast<std::uint8_t>(b));
  }
}

BitString BitString::parse(std::string_view text) {
  BitString out(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    require(text[i] == '0' || text[i] == '1', "BitString::parse: expected only '0' and '1'");
    out.bits_[i] = static_cast<std::uint8_t>(text[i] - '0');
  }
  return out;
}

void BitString::set(std::size_t i, int bit) {
  require(i < bits_.size(), "BitString::set: index out of range");
  require(bit == 0 || bit == 1, "BitString::set: bit must be 0 or 1");
  bits_[i] = static_cast<std::uint8_t>(bit);
}

bool BitString::is_zero() const {
  return std::all_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b == 0; });
}

int BitString::popcount() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string BitString::str() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = static_cast<char>('0' + bits_[i]);
  return s;
}

BitString BitString::operator^(const BitString& other) const {
  require(size() == other.size(), "BitString xor: length mismatch");
  BitString out(size());
  for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] ^ other.bits_[i];
  return out;
}

BitString BitString::concat(const BitString& tail) const {
  BitString out = *this;
  out.bits_.insert(out.bits_.end(), tail.bits_.begin(), tail.bits_.end());
  return out;
}

BitString BitString::slice(std::size_t offset, std::size_t length) const {
  require(offset + length <= size(), "BitString::slice: out of range");
  BitString out(length);
  std::copy_n(bits_.begin() + static_cast<std::ptrdiff_t>(offset), length, out.bits_.begin());
  return out;
}

ResidueVector::ResidueVector(std::vector<std::uint64_t> values, std::uint64_t q)
    : entries(std::move(values)), modulus(q) {
  require(q > 0, "ResidueVector: modulus must be positive");
  for (auto v : entries) require(v < q, "ResidueVector: entry outside [0, q)");
}

int binary_inner_product(const BitString& a, const BitString& b) {
  require(a.size() == b.size(), "binary_inner_product: length mismatch");
  int acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc ^= a[i] & b[i];
  return acc;
}

BitString encode_bits(std::uint64_t value, std::size_t width) {
  require(width <= 64, "encode_bits: width exceeds 64");
  require(width == 64 || value < (std::uint64_t{1} << width), "encode_bits: value does not fit in width");
  BitString out(width);
  for (std::size_t i = 0; i < width; ++i) out.set(i, static_cast<int>((value >> (width - 1 - i)) & 1U));
  return out;
}

std::uint64_t decode_bits(const BitString& bits) {
  require(bits.size() <= 64, "decode_bits: more than 64 bits");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) v = (v << 1) | static_cast<std::uint64_t>(bits[i]);
  return v;
}

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  require(m > 0, "pow_mod: modulus must be positive");
  std::uint64_t result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1U) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1U) == 0) {
    d >>= 1;
    ++s;
  }
  // Deterministic Miller-Rabin witnesses for 64-bit integers.
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

bool is_power_of_two(std::uint64_t n) { return n != 0 && (n & (n - 1)) == 0; }

unsigned ceil_log2(std::uint64_t n) {
  require(n >= 1, "ceil_log2: argument must be >= 1");
  unsigned bits = 0;
  while ((std::uint64_t{1} << bits) < n) ++bits;
  return bits;
}

namespace {

// Tonelli-Shanks for a quadratic residue a != 0 modulo odd prime p.
std::uint64_t tonelli_shanks(std::uint64_t a, std::uint64_t p) {
  if (p % 4 == 3) return pow_mod(a, (p + 1) / 4, p);

  std::uint64_t q = p - 1;
  unsigned s = 0;
  while ((q & 1U) == 0) {
    q >>= 1;
    ++s;
  }
  std::uint64_t z = 2;
  while (pow_mod(z, (p - 1) / 2, p) != p - 1) ++z;

  std::uint64_t c = pow_mod(z, q, p);
  std::uint64_t r = pow_mod(a, (q + 1) / 2, p);
  std::uint64_t t = pow_mod(a, q, p);
  unsigned m = s;
  while (t != 1) {
    unsigned i = 0;
    std::uint64_t tt = t;
    while (tt != 1) {
      tt = mul_mod(tt, tt, p);
      ++i;
    }
    std::uint64_t b = c;
    for (unsigned j = 0; j + i + 1 < m; ++j) b = mul_mod(b, b, p);
    r = mul_mod(r, b, p);
    c = mul_mod(b, b, p);
    t = mul_mod(t, c, p);
    m = i;
  }
  return r;
}

// x = a (mod p), x = b (mod q), p and q coprime.
std::uint64_t crt_pair(std::uint64_t a, std::uint64_t p, std::uint64_t b, std::uint64_t q) {
  const std::uint64_t n = p * q;
  const std::uint64_t p_inv_mod_q = pow_mod(p % q, q - 2, q);  // q prime
  const std::uint64_t diff = (b + q - a % q) % q;
  const std::uint64_t k = mul_mod(diff, p_inv_mod_q, q);
  return (a + p * k) % n;
}

}  // namespace

std::vector<std::uint64_t> sqrt_mod_prime(std::uint64_t w, std::uint64_t p) {
  require(p > 2 && is_prime(p), "sqrt_mod_prime: p must be an odd prime");
  w %= p;
  if (w == 0) return {0};
  if (pow_mod(w, (p - 1) / 2, p) != 1) return {};
  const std::uint64_t r = tonelli_shanks(w, p);
  std::vector<std::uint64_t> roots{r, p - r};
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<std::uint64_t> sqrt_mod_semiprime(std::uint64_t w, std::uint64_t p, std::uint64_t q) {
  require(p != q, "sqrt_mod_semiprime: primes must be distinct");
  require(w < p * q, "sqrt_mod_semiprime: w must lie in [0, pq)");
  const auto roots_p = sqrt_mod_prime(w, p);
  const auto roots_q = sqrt_mod_prime(w, q);
  std::vector<std::uint64_t> out;
  for (auto a : roots_p)
    for (auto b : roots_q) out.push_back(crt_pair(a, p, b, q));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::int64_t discrete_gaussian_signed(double sigma, Rng& rng) {
  require(sigma >= 0.0 && std::isfinite(sigma), "discrete_gaussian: sigma must be finite and >= 0");
  if (sigma == 0.0) return 0;
  const auto bound = static_cast<std::int64_t>(std::ceil(6.0 * sigma));
  std::vector<double> cdf;
  cdf.reserve(static_cast<std::size_t>(2 * bound + 1));
  double total = 0.0;
  for (std::int64_t k = -bound; k <= bound; ++k) {
    total += std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    cdf.push_back(total);
  }
  const double u = rng.uniform01() * total;
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const auto idx = std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1);
  return -bound + idx;
}

std::uint64_t discrete_gaussian_sample(double sigma, std::uint64_t q, Rng& rng) {
  require(q > 0, "discrete_gaussian_sample: modulus must be positive");
  const std::int64_t k = discrete_gaussian_signed(sigma, rng);
  const auto sq = static_cast<std::int64_t>(q);
  return static_cast<std::uint64_t>(((k % sq) + sq) % sq);
}

}  // namespace poq

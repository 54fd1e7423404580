#include "poq/tcf.hpp"

#include <algorithm>
#include <set>

#include "poq/errors.hpp"

namespace poq {

using nlohmann::json;

std::string to_string(ProtocolKind kind) { return kind == ProtocolKind::lwe ? "lwe" : "factoring"; }

ProtocolKind parse_protocol_kind(const std::string& text) {
  if (text == "lwe") return ProtocolKind::lwe;
  if (text == "factoring") return ProtocolKind::factoring;
  throw ConfigError("unknown protocol '" + text + "' (expected lwe or factoring)");
}

unsigned LweInstance::coordinate_bits() const { return ceil_log2(modulus); }

ProtocolKind kind_of(const PublicInstance& inst) {
  return std::holds_alternative<LweInstance>(inst) ? ProtocolKind::lwe : ProtocolKind::factoring;
}

std::string id_of(const PublicInstance& inst) {
  return std::visit([](const auto& i) { return i.id; }, inst);
}

unsigned preimage_bits(const PublicInstance& inst) {
  if (const auto* r = std::get_if<RabinInstance>(&inst)) return r->input_bits;
  return std::get<LweInstance>(inst).input_bits();
}

unsigned commitment_bits(const PublicInstance& inst) {
  if (const auto* r = std::get_if<RabinInstance>(&inst)) return r->output_bits;
  return static_cast<unsigned>(std::get<LweInstance>(inst).rows());
}

// Rabin ---------------------------------------------------------------------

namespace {

void check_rabin_widths(std::uint64_t n, unsigned input_bits, unsigned output_bits) {
  if (input_bits == 0 || input_bits > 20) throw ConfigError("rabin: input width must be in [1, 20]");
  if ((std::uint64_t{1} << input_bits) > n / 2 + 1)
    throw ConfigError("rabin: 2^n_x must not exceed floor(N/2) + 1");
  if (output_bits < ceil_log2(n) || output_bits > 24) throw ConfigError("rabin: n_y must be >= ceil(log2 N)");
}

}  // namespace

KeyPair rabin_keygen(std::uint64_t p, std::uint64_t q, unsigned input_bits, unsigned output_bits) {
  if (p == q || p < 3 || q < 3 || !is_prime(p) || !is_prime(q))
    throw ConfigError("rabin_keygen: p and q must be distinct odd primes");
  const std::uint64_t n = p * q;
  check_rabin_widths(n, input_bits, output_bits);
  RabinInstance inst{"N" + std::to_string(n), n, input_bits, output_bits};
  return KeyPair{inst, RabinTrapdoor{std::min(p, q), std::max(p, q)}, true};
}

KeyPair rabin_demo(std::uint64_t modulus, unsigned input_bits, unsigned output_bits) {
  if (!is_power_of_two(modulus) || modulus < 4)
    throw ConfigError("rabin_demo: demo override only accepts power-of-two moduli");
  check_rabin_widths(modulus, input_bits, output_bits);
  RabinInstance inst{"N" + std::to_string(modulus), modulus, input_bits, output_bits};
  return KeyPair{inst, std::monostate{}, true};
}

std::uint64_t rabin_eval_value(const RabinInstance& inst, std::uint64_t x) {
  require(x < inst.domain_size(), "rabin_eval: x outside the instance domain");
  return mul_mod(x, x, inst.modulus);
}

BitString rabin_eval(const RabinInstance& inst, std::uint64_t x) {
  return encode_bits(rabin_eval_value(inst, x), inst.output_bits);
}

std::uint64_t rabin_image_from_register(const RabinInstance& inst, const BitString& measured) {
  require(measured.size() == inst.output_bits, "rabin_image_from_register: width mismatch");
  const std::uint64_t k = decode_bits(measured);
  const std::uint64_t m = std::uint64_t{1} << inst.output_bits;
  return ((2 * k * inst.modulus + m) / (2 * m)) % inst.modulus;
}

BitString rabin_register_from_image(const RabinInstance& inst, std::uint64_t image) {
  require(image < inst.modulus, "rabin_register_from_image: image must be < N");
  const std::uint64_t m = std::uint64_t{1} << inst.output_bits;
  const std::uint64_t k = (2 * image * m + inst.modulus) / (2 * inst.modulus);
  return encode_bits(k % m, inst.output_bits);
}

InversionResult rabin_invert(const RabinInstance& inst, const RabinTrapdoor* trapdoor, std::uint64_t image) {
  InversionResult out;
  if (image >= inst.modulus) {
    out.reason = "invalid image: w >= N";
    return out;
  }
  std::vector<std::uint64_t> pre;
  if (trapdoor != nullptr) {
    for (auto root : sqrt_mod_semiprime(image, trapdoor->p, trapdoor->q))
      if (root < inst.domain_size()) pre.push_back(root);
  } else {
    for (std::uint64_t x = 0; x < inst.domain_size(); ++x)
      if (mul_mod(x, x, inst.modulus) == image) pre.push_back(x);
  }
  out.preimage_count = pre.size();
  if (pre.size() != 2) {
    out.reason = "invalid image: " + std::to_string(pre.size()) + " preimages in domain";
    return out;
  }
  out.claw = Claw{encode_bits(pre[0], inst.input_bits), encode_bits(pre[1], inst.input_bits),
                  encode_bits(image, inst.output_bits)};
  return out;
}

// LWE -----------------------------------------------------------------------

LweInstance make_lwe_instance(std::string id, std::uint64_t q, std::vector<std::vector<std::uint64_t>> a,
                              std::vector<std::uint64_t> y) {
  if (!is_power_of_two(q) || q < 2) throw ConfigError("lwe: modulus must be a power of two >= 2");
  if (a.empty() || a.front().empty()) throw ConfigError("lwe: matrix must be non-empty");
  const std::size_t n = a.front().size();
  for (const auto& row : a) {
    if (row.size() != n) throw ConfigError("lwe: ragged matrix");
    for (auto v : row)
      if (v >= q) throw ConfigError("lwe: matrix entry outside [0, q)");
  }
  if (y.size() != a.size()) throw ConfigError("lwe: y length must equal the number of rows");
  for (auto v : y)
    if (v >= q) throw ConfigError("lwe: y entry outside [0, q)");
  LweInstance inst;
  inst.id = std::move(id);
  inst.modulus = q;
  inst.matrix = std::move(a);
  inst.y = ResidueVector(std::move(y), q);
  if (static_cast<std::uint64_t>(inst.input_bits()) > 22) throw ConfigError("lwe: instance too large for desk scale");
  return inst;
}

namespace {

std::vector<std::uint64_t> mat_vec(const LweInstance& inst, const std::vector<std::uint64_t>& x) {
  std::vector<std::uint64_t> out(inst.rows(), 0);
  for (std::size_t i = 0; i < inst.rows(); ++i) {
    std::uint64_t acc = 0;
    for (std::size_t j = 0; j < inst.cols(); ++j) acc = (acc + inst.matrix[i][j] * x[j]) % inst.modulus;
    out[i] = acc;
  }
  return out;
}

bool lwe_consistent(const LweInstance& inst, const LweTrapdoor& td) {
  const auto as = mat_vec(inst, td.s);
  for (std::size_t i = 0; i < inst.rows(); ++i)
    if ((as[i] + td.e[i]) % inst.modulus != inst.y[i]) return false;
  return true;
}

}  // namespace

KeyPair lwe_keygen(std::size_t m, std::size_t n, std::uint64_t q, double sigma, std::uint64_t seed,
                   std::optional<std::vector<std::uint64_t>> forced_s) {
  if (m == 0 || n == 0) throw ConfigError("lwe_keygen: m and n must be >= 1");
  if (!is_power_of_two(q) || q < 2) throw ConfigError("lwe_keygen: modulus must be a power of two");
  Rng rng(seed, 0, StreamRole::keygen);
  std::vector<std::vector<std::uint64_t>> a(m, std::vector<std::uint64_t>(n));
  for (auto& row : a)
    for (auto& v : row) v = rng.uniform_below(q);
  std::vector<std::uint64_t> s(n);
  if (forced_s) {
    if (forced_s->size() != n) throw ConfigError("lwe_keygen: forced s has wrong length");
    s = *forced_s;
    for (auto v : s)
      if (v > 1) throw ConfigError("lwe_keygen: s must be binary");
  } else {
    for (auto& v : s) v = rng.uniform_below(2);
  }
  std::vector<std::uint64_t> e(m);
  for (auto& v : e) v = discrete_gaussian_sample(sigma, q, rng);

  LweInstance tmp;
  tmp.modulus = q;
  tmp.matrix = a;
  const auto as = mat_vec(tmp, s);
  std::vector<std::uint64_t> y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = (as[i] + e[i]) % q;

  auto inst = make_lwe_instance("seed" + std::to_string(seed), q, std::move(a), std::move(y));
  return KeyPair{inst, LweTrapdoor{s, ResidueVector(e, q)}, true};
}

KeyPair lwe_paper_instance(int index) {
  struct Row {
    std::vector<std::vector<std::uint64_t>> columns;  // rows of A^T as printed
    std::vector<std::uint64_t> e;
    std::vector<std::uint64_t> y;
  };
  static const Row table[4] = {
      {{{0, 2, 0, 1}, {2, 0, 1, 2}}, {0, 1, 0, 0}, {0, 3, 0, 1}},
      {{{0, 2, 3, 2}, {2, 3, 0, 0}}, {0, 0, 0, 1}, {0, 2, 3, 3}},
      {{{2, 0, 0, 1}, {0, 3, 2, 1}}, {1, 0, 1, 0}, {3, 0, 1, 1}},
      {{{0, 1, 3, 0}, {3, 0, 0, 2}}, {1, 0, 1, 0}, {0, 1, 3, 1}},
  };
  if (index < 0 || index > 3) throw ConfigError("lwe_paper_instance: index must be 0..3");
  const Row& row = table[index];
  std::vector<std::vector<std::uint64_t>> a(4, std::vector<std::uint64_t>(2));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) a[i][j] = row.columns[j][i];
  auto inst = make_lwe_instance("paper:" + std::to_string(index), 4, std::move(a), row.y);
  // The claw shift of every published instance is (1, 0) against these columns.
  LweTrapdoor td{{1, 0}, ResidueVector(row.e, 4)};
  const bool consistent = lwe_consistent(inst, td);
  return KeyPair{inst, td, consistent};
}

BitString lwe_eval(const LweInstance& inst, int b, const ResidueVector& x) {
  require(b == 0 || b == 1, "lwe_eval: b must be a bit");
  require(x.size() == inst.cols(), "lwe_eval: x has wrong dimension");
  for (auto v : x.entries) require(v < inst.modulus, "lwe_eval: x entry outside [0, q)");
  auto v = mat_vec(inst, x.entries);
  BitString out(inst.rows());
  const std::uint64_t half = inst.modulus / 2;
  for (std::size_t i = 0; i < inst.rows(); ++i) {
    const std::uint64_t value = (v[i] + static_cast<std::uint64_t>(b) * inst.y[i]) % inst.modulus;
    out.set(i, value >= half ? 1 : 0);
  }
  return out;
}

BitString lwe_encode_input(const LweInstance& inst, int b, const ResidueVector& x) {
  require(b == 0 || b == 1, "lwe_encode_input: b must be a bit");
  require(x.size() == inst.cols(), "lwe_encode_input: x has wrong dimension");
  BitString out{b};
  for (auto v : x.entries) out = out.concat(encode_bits(v, inst.coordinate_bits()));
  return out;
}

std::pair<int, ResidueVector> lwe_decode_input(const LweInstance& inst, const BitString& bits) {
  require(bits.size() == inst.input_bits(), "lwe_decode_input: width mismatch");
  const unsigned w = inst.coordinate_bits();
  std::vector<std::uint64_t> x(inst.cols());
  for (std::size_t j = 0; j < inst.cols(); ++j) x[j] = decode_bits(bits.slice(1 + j * w, w));
  return {bits[0], ResidueVector(std::move(x), inst.modulus)};
}

BitString lwe_eval_bits(const LweInstance& inst, const BitString& input) {
  auto [b, x] = lwe_decode_input(inst, input);
  return lwe_eval(inst, b, x);
}

InversionResult lwe_invert(const LweInstance& inst, const LweTrapdoor& trapdoor, const BitString& w) {
  require(w.size() == inst.rows(), "lwe_invert: w has wrong length");
  require(trapdoor.s.size() == inst.cols(), "lwe_invert: trapdoor dimension mismatch");
  InversionResult out;
  const std::uint64_t q = inst.modulus;
  std::uint64_t total = 1;
  for (std::size_t j = 0; j < inst.cols(); ++j) total *= q;

  std::vector<std::vector<std::uint64_t>> zero_branch;
  std::vector<std::vector<std::uint64_t>> one_branch;
  std::vector<std::uint64_t> x(inst.cols());
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    std::uint64_t rest = idx;
    for (std::size_t j = inst.cols(); j-- > 0;) {
      x[j] = rest % q;
      rest /= q;
    }
    const ResidueVector xv(x, q);
    if (lwe_eval(inst, 0, xv) == w) zero_branch.push_back(x);
    if (lwe_eval(inst, 1, xv) == w) one_branch.push_back(x);
  }
  out.preimage_count = zero_branch.size() + one_branch.size();
  if (one_branch.size() != 1 || zero_branch.size() != 1) {
    out.reason = "claw anomaly: " + std::to_string(zero_branch.size()) + " b=0 and " +
                 std::to_string(one_branch.size()) + " b=1 preimages";
    return out;
  }
  std::vector<std::uint64_t> x0(inst.cols());
  for (std::size_t j = 0; j < inst.cols(); ++j) x0[j] = (one_branch[0][j] + trapdoor.s[j]) % q;
  if (x0 != zero_branch[0]) {
    out.reason = "claw anomaly: preimages not related by the trapdoor shift";
    return out;
  }
  out.claw = Claw{lwe_encode_input(inst, 0, ResidueVector(x0, q)),
                  lwe_encode_input(inst, 1, ResidueVector(one_branch[0], q)), w};
  return out;
}

// Shared --------------------------------------------------------------------

BitString evaluate_preimage(const PublicInstance& inst, const BitString& input) {
  if (const auto* r = std::get_if<RabinInstance>(&inst)) {
    require(input.size() == r->input_bits, "evaluate_preimage: width mismatch");
    return rabin_eval(*r, decode_bits(input));
  }
  return lwe_eval_bits(std::get<LweInstance>(inst), input);
}

InversionResult invert_commitment(const KeyPair& keys, const BitString& w) {
  if (const auto* r = std::get_if<RabinInstance>(&keys.pub)) {
    const auto* td = std::get_if<RabinTrapdoor>(&keys.trapdoor);
    return rabin_invert(*r, td, rabin_image_from_register(*r, w));
  }
  const auto& inst = std::get<LweInstance>(keys.pub);
  const auto* td = std::get_if<LweTrapdoor>(&keys.trapdoor);
  if (td == nullptr) throw ConfigError("LWE verifier requires a trapdoor");
  return lwe_invert(inst, *td, w);
}

// JSON ----------------------------------------------------------------------

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(std::string(what) + ": unknown field '" + item.key() + "'");
  }
}

}  // namespace

json public_to_json(const PublicInstance& inst) {
  if (const auto* r = std::get_if<RabinInstance>(&inst)) {
    return json{{"protocol", "factoring"},
                {"id", r->id},
                {"modulus", r->modulus},
                {"input_bits", r->input_bits},
                {"output_bits", r->output_bits}};
  }
  const auto& l = std::get<LweInstance>(inst);
  return json{{"protocol", "lwe"}, {"id", l.id}, {"modulus", l.modulus}, {"matrix", l.matrix}, {"y", l.y.entries}};
}

json keypair_to_json(const KeyPair& keys) {
  json j = public_to_json(keys.pub);
  if (const auto* r = std::get_if<RabinTrapdoor>(&keys.trapdoor)) {
    j["trapdoor"] = json{{"p", r->p}, {"q", r->q}};
  } else if (const auto* l = std::get_if<LweTrapdoor>(&keys.trapdoor)) {
    j["trapdoor"] = json{{"s", l->s}, {"e", l->e.entries}};
    j["trapdoor_consistent"] = keys.trapdoor_consistent;
  }
  return j;
}

PublicInstance public_from_json(const json& j) {
  try {
    const auto kind = parse_protocol_kind(j.at("protocol").get<std::string>());
    if (kind == ProtocolKind::factoring) {
      reject_unknown(j, {"protocol", "id", "modulus", "input_bits", "output_bits"}, "instance");
      RabinInstance r{j.at("id").get<std::string>(), j.at("modulus").get<std::uint64_t>(),
                      j.at("input_bits").get<unsigned>(), j.at("output_bits").get<unsigned>()};
      if (r.modulus < 4) throw ConfigError("instance: modulus too small");
      check_rabin_widths(r.modulus, r.input_bits, r.output_bits);
      return r;
    }
    reject_unknown(j, {"protocol", "id", "modulus", "matrix", "y"}, "instance");
    return make_lwe_instance(j.at("id").get<std::string>(), j.at("modulus").get<std::uint64_t>(),
                             j.at("matrix").get<std::vector<std::vector<std::uint64_t>>>(),
                             j.at("y").get<std::vector<std::uint64_t>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  }
}

KeyPair keypair_from_json(const json& j) {
  try {
    json pub = j;
    pub.erase("trapdoor");
    pub.erase("trapdoor_consistent");
    KeyPair keys{public_from_json(pub), std::monostate{}, true};
    if (!j.contains("trapdoor")) return keys;
    const json& t = j.at("trapdoor");
    if (auto* r = std::get_if<RabinInstance>(&keys.pub)) {
      reject_unknown(t, {"p", "q"}, "trapdoor");
      RabinTrapdoor td{t.at("p").get<std::uint64_t>(), t.at("q").get<std::uint64_t>()};
      if (td.p * td.q != r->modulus || !is_prime(td.p) || !is_prime(td.q) || td.p == td.q)
        throw ConfigError("trapdoor: p*q must equal N with distinct primes");
      keys.trapdoor = td;
    } else {
      const auto& l = std::get<LweInstance>(keys.pub);
      reject_unknown(t, {"s", "e"}, "trapdoor");
      LweTrapdoor td{t.at("s").get<std::vector<std::uint64_t>>(),
                     ResidueVector(t.at("e").get<std::vector<std::uint64_t>>(), l.modulus)};
      if (td.s.size() != l.cols() || td.e.size() != l.rows()) throw ConfigError("trapdoor: dimension mismatch");
      for (auto v : td.s)
        if (v > 1) throw ConfigError("trapdoor: s must be binary");
      keys.trapdoor_consistent = lwe_consistent(l, td);
      keys.trapdoor = td;
    }
    return keys;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  }
}

KeyPair paper_instance(ProtocolKind kind, const std::string& id) {
  if (kind == ProtocolKind::lwe) {
    if (id.size() == 1 && id[0] >= '0' && id[0] <= '3') return lwe_paper_instance(id[0] - '0');
    throw ConfigError("paper LWE instances are 0..3, got '" + id + "'");
  }
  if (id == "8") return rabin_demo(8, 2, 3);
  if (id == "15") return rabin_keygen(3, 5, 3, 4);
  if (id == "16") return rabin_demo(16, 3, 4);
  if (id == "21") return rabin_keygen(3, 7, 3, 5);
  throw ConfigError("paper factoring instances are 8, 15, 16, 21, got '" + id + "'");
}

}  // namespace poq

#include "poq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "poq/errors.hpp"

namespace poq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// log k! for k <= n, by summed logs.
std::vector<double> log_factorials(std::uint64_t n) {
  std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::size_t k = 2; k < lf.size(); ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
  return lf;
}

std::vector<double> log_binomial_pmf(std::uint64_t n, double p, const std::vector<double>& lf) {
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  const double lp = p > 0.0 ? std::log(p) : kNegInf;
  const double lq = p < 1.0 ? std::log1p(-p) : kNegInf;
  for (std::uint64_t k = 0; k <= n; ++k) {
    double v = lf[n] - lf[k] - lf[n - k];
    if (k > 0) v += static_cast<double>(k) * lp;
    if (k < n) v += static_cast<double>(n - k) * lq;
    out[static_cast<std::size_t>(k)] = v;
  }
  return out;
}

double tail(std::int64_t threshold, std::uint64_t n_a, std::uint64_t n_b, double c, double p_a_null,
            const std::vector<double>& lf) {
  const double p_b_null = std::clamp((c - p_a_null) / c, 0.0, 1.0);
  const auto la = log_binomial_pmf(n_a, std::clamp(p_a_null, 0.0, 1.0), lf);
  const auto lb = log_binomial_pmf(n_b, p_b_null, lf);

  // sf[t] = log P(K_B >= t), sf[n_b + 1] = -inf.
  std::vector<double> sf(static_cast<std::size_t>(n_b) + 2, kNegInf);
  for (std::size_t t = static_cast<std::size_t>(n_b) + 1; t-- > 0;) {
    const double term = lb[t];
    const double acc = sf[t + 1];
    // Terms 40 e-folds below the running sum do not change it.
    sf[t] = (acc != kNegInf && term < acc - 40.0) ? acc : log_add(acc, term);
  }

  const auto ci = static_cast<std::int64_t>(c);
  const std::int64_t denom = ci * static_cast<std::int64_t>(n_a);
  const auto nb = static_cast<std::int64_t>(n_b);
  double total = kNegInf;
  for (std::uint64_t ka = 0; ka <= n_a; ++ka) {
    if (la[static_cast<std::size_t>(ka)] == kNegInf) continue;
    // Smallest k_B with k_A n_b + c k_B n_a >= threshold.
    const std::int64_t need = threshold - static_cast<std::int64_t>(ka) * nb;
    std::int64_t t = need <= 0 ? 0 : (need + denom - 1) / denom;
    t = std::min(t, nb + 1);
    total = log_add(total, la[static_cast<std::size_t>(ka)] + sf[static_cast<std::size_t>(t)]);
  }
  return total;
}

struct NullMax {
  double log_p = kNegInf;
  double p_a = 0.0;
};

NullMax maximise_over_nulls(std::int64_t threshold, std::uint64_t n_a, std::uint64_t n_b, double c,
                            NullSearch search) {
  const auto lf = log_factorials(std::max(n_a, n_b));
  NullMax best;
  auto eval = [&](double p) {
    const double v = tail(threshold, n_a, n_b, c, p, lf);
    if (v > best.log_p) best = {v, p};
    return v;
  };

  if (search == NullSearch::exhaustive) {
    for (int i = 0; i <= 1000; ++i) eval(i / 1000.0);
    return best;
  }

  for (int i = 0; i <= 100; ++i) eval(i / 100.0);
  const double centre = best.p_a;
  for (int i = -10; i <= 10; ++i) {
    const double p = centre + i / 1000.0;
    if (p >= 0.0 && p <= 1.0) eval(p);
  }
  // Golden-section polish inside the bracketing 1e-3 cell.
  double lo = std::max(0.0, best.p_a - 1e-3);
  double hi = std::min(1.0, best.p_a + 1e-3);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = eval(x1);
  double f2 = eval(x2);
  for (int it = 0; it < 30; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = eval(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = eval(x1);
    }
  }
  return best;
}

std::int64_t integer_constant(ProtocolKind kind) { return kind == ProtocolKind::lwe ? 2 : 4; }

}  // namespace

double class_constant(ProtocolKind kind) { return static_cast<double>(integer_constant(kind)); }

double quantumness(double p_a, double p_b, ProtocolKind kind) {
  require(p_a >= 0.0 && p_a <= 1.0 && p_b >= 0.0 && p_b <= 1.0, "quantumness: probabilities must lie in [0, 1]");
  const double c = class_constant(kind);
  return p_a + c * p_b - c;
}

double log_normal_sf(double z) {
  if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -z2 / 2.0 - std::log(z * std::sqrt(2.0 * std::numbers::pi)) + std::log(series);
}

double sigma_from_log_p(double log_p) {
  if (!(log_p < std::log(0.5))) return 0.0;
  double lo = 0.0;
  double hi = std::sqrt(-2.0 * log_p) + 10.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_normal_sf(mid) > log_p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double log_tail_at_null(std::int64_t threshold, std::uint64_t n_a, std::uint64_t n_b, double c, double p_a_null) {
  require(n_a > 0 && n_b > 0, "log_tail_at_null: sample sizes must be positive");
  require(p_a_null >= 0.0 && p_a_null <= 1.0, "log_tail_at_null: null p_A must lie in [0, 1]");
  return tail(threshold, n_a, n_b, c, p_a_null, log_factorials(std::max(n_a, n_b)));
}

SignificanceResult significance_detail(std::uint64_t k_a, std::uint64_t n_a, std::uint64_t k_b, std::uint64_t n_b,
                                       ProtocolKind kind, NullSearch search) {
  require(k_a <= n_a && k_b <= n_b, "significance: k must not exceed N");
  SignificanceResult out;
  if (n_a == 0 || n_b == 0) return out;
  const std::int64_t c = integer_constant(kind);
  out.q = static_cast<double>(k_a) / static_cast<double>(n_a) +
          static_cast<double>(c) * static_cast<double>(k_b) / static_cast<double>(n_b) - static_cast<double>(c);
  // q' > 0 exactly: k_A N_B + c k_B N_A > c N_A N_B.
  const auto na = static_cast<std::int64_t>(n_a);
  const auto nb = static_cast<std::int64_t>(n_b);
  const std::int64_t threshold = static_cast<std::int64_t>(k_a) * nb + c * static_cast<std::int64_t>(k_b) * na;
  if (threshold <= c * na * nb) return out;
  const NullMax m = maximise_over_nulls(threshold, n_a, n_b, static_cast<double>(c), search);
  out.log_p = m.log_p;
  out.null_p_a = m.p_a;
  out.sigma = sigma_from_log_p(m.log_p);
  return out;
}

double significance(std::uint64_t k_a, std::uint64_t n_a, std::uint64_t k_b, std::uint64_t n_b, ProtocolKind kind,
                    NullSearch search) {
  return significance_detail(k_a, n_a, k_b, n_b, kind, search).sigma;
}

double significance_at_q(double q, std::uint64_t n_a, std::uint64_t n_b, ProtocolKind kind, NullSearch search) {
  require(n_a > 0 && n_b > 0, "significance_at_q: sample sizes must be positive");
  if (!(q > 0.0)) return 0.0;
  const long double c = class_constant(kind);
  const long double scaled = (static_cast<long double>(q) + c) * static_cast<long double>(n_a) * static_cast<long double>(n_b);
  const auto threshold = static_cast<std::int64_t>(std::ceil(scaled - 1e-9L));
  const NullMax m = maximise_over_nulls(threshold, n_a, n_b, static_cast<double>(c), search);
  return sigma_from_log_p(m.log_p);
}

ContourResult contour_q_for_sigma(std::uint64_t n_a, std::uint64_t n_b, double target_sigma, ProtocolKind kind) {
  require(target_sigma > 0.0, "contour_q_for_sigma: target sigma must be positive");
  require(n_a > 0 && n_b > 0, "contour_q_for_sigma: sample sizes must be positive");
  ContourResult out;
  if (significance_at_q(1.0, n_a, n_b, kind) < target_sigma) return out;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (significance_at_q(mid, n_a, n_b, kind) >= target_sigma)
      hi = mid;
    else
      lo = mid;
  }
  out.reachable = true;
  out.q = hi;
  return out;
}

double relative_performance(double p_exp, double p_ideal, double p_guess) {
  require(std::abs(p_ideal - p_guess) > 1e-15, "relative_performance: p_ideal must differ from p_guess");
  return (p_exp - p_guess) / (p_ideal - p_guess);
}

BranchConstants branch_constants(const PublicInstance& inst, Branch branch) {
  if (branch == Branch::standard)
    return {1.0, 2.0 / std::ldexp(1.0, static_cast<int>(preimage_bits(inst)))};
  if (kind_of(inst) == ProtocolKind::lwe) return {1.0, 0.5};
  const double c = std::cos(std::numbers::pi / 8);
  return {c * c, 0.5};
}

AggregateB aggregate_pb_over_r(const std::vector<BranchCount>& per_r) {
  require(!per_r.empty(), "aggregate_pb_over_r: need at least one r value");
  double sum = 0.0;
  std::uint64_t min_n = per_r.front().n;
  for (const auto& c : per_r) {
    require(c.n > 0, "aggregate_pb_over_r: every r value needs kept shots");
    sum += static_cast<double>(c.k) / static_cast<double>(c.n);
    min_n = std::min(min_n, c.n);
  }
  return {sum / static_cast<double>(per_r.size()), min_n * per_r.size()};
}

ExperimentSummary summarize(const PublicInstance& inst, const std::string& mode, const Tally& tally) {
  ExperimentSummary s;
  s.instance = id_of(inst);
  s.protocol = kind_of(inst);
  s.mode = mode;
  s.n_a = tally.a.n;
  s.p_a = s.n_a ? static_cast<double>(tally.a.k) / static_cast<double>(s.n_a) : 0.0;

  bool per_r_usable = s.protocol == ProtocolKind::factoring && !tally.per_r.empty();
  std::vector<BranchCount> counts;
  for (const auto& [r, c] : tally.per_r) {
    counts.push_back(c);
    per_r_usable = per_r_usable && c.n > 0;
  }
  if (per_r_usable) {
    const AggregateB agg = aggregate_pb_over_r(counts);
    s.p_b = agg.p_b;
    s.n_b = agg.n_b;
  } else {
    s.n_b = tally.b.n;
    s.p_b = s.n_b ? static_cast<double>(tally.b.k) / static_cast<double>(s.n_b) : 0.0;
  }

  s.q = quantumness(s.p_a, s.p_b, s.protocol);
  if (s.n_a > 0 && s.n_b > 0) {
    // Counts implied by the (possibly aggregated) rates.
    const auto k_a = tally.a.k;
    const auto k_b = static_cast<std::uint64_t>(std::llround(s.p_b * static_cast<double>(s.n_b)));
    s.sigma = significance(k_a, s.n_a, std::min(k_b, s.n_b), s.n_b, s.protocol);
  }
  s.constants_a = branch_constants(inst, Branch::standard);
  s.constants_b = branch_constants(inst, Branch::interference);
  s.r_a = relative_performance(s.p_a, s.constants_a.p_ideal, s.constants_a.p_guess);
  s.r_b = relative_performance(s.p_b, s.constants_b.p_ideal, s.constants_b.p_guess);
  return s;
}

nlohmann::json to_json(const ExperimentSummary& s) {
  auto constants = [](const BranchConstants& c) { return nlohmann::json{{"p_ideal", c.p_ideal}, {"p_guess", c.p_guess}}; };
  return {{"instance", s.instance},
          {"protocol", to_string(s.protocol)},
          {"mode", s.mode},
          {"p_A", s.p_a},
          {"N_A", s.n_a},
          {"p_B", s.p_b},
          {"N_B", s.n_b},
          {"q", s.q},
          {"sigma", s.sigma},
          {"R_A", s.r_a},
          {"R_B", s.r_b},
          {"R_constants", {{"A", constants(s.constants_a)}, {"B", constants(s.constants_b)}}}};
}

ExperimentSummary summary_from_json(const nlohmann::json& j) {
  try {
    ExperimentSummary s;
    s.instance = j.at("instance").get<std::string>();
    s.protocol = parse_protocol_kind(j.at("protocol").get<std::string>());
    s.mode = j.at("mode").get<std::string>();
    s.p_a = j.at("p_A").get<double>();
    s.n_a = j.at("N_A").get<std::uint64_t>();
    s.p_b = j.at("p_B").get<double>();
    s.n_b = j.at("N_B").get<std::uint64_t>();
    s.q = j.at("q").get<double>();
    s.sigma = j.at("sigma").get<double>();
    s.r_a = j.at("R_A").get<double>();
    s.r_b = j.at("R_B").get<double>();
    const auto& c = j.at("R_constants");
    s.constants_a = {c.at("A").at("p_ideal").get<double>(), c.at("A").at("p_guess").get<double>()};
    s.constants_b = {c.at("B").at("p_ideal").get<double>(), c.at("B").at("p_guess").get<double>()};
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("summary: ") + e.what());
  }
}

std::string report_csv(const std::vector<ExperimentSummary>& summaries) {
  std::ostringstream out;
  out.precision(10);
  out << "instance,mode,branch,p,N,q,sigma,R\n";
  for (const auto& s : summaries) {
    out << s.instance << ',' << s.mode << ",A," << s.p_a << ',' << s.n_a << ',' << s.q << ',' << s.sigma << ','
        << s.r_a << '\n';
    out << s.instance << ',' << s.mode << ",B," << s.p_b << ',' << s.n_b << ',' << s.q << ',' << s.sigma << ','
        << s.r_b << '\n';
  }
  return out.str();
}

}  // namespace poq

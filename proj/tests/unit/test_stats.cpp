#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "poq/errors.hpp"
#include "poq/stats.hpp"

using namespace poq;

namespace {

double binom_pmf(std::uint64_t n, std::uint64_t k, double p) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  const double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(lg + k * std::log(p) + (n - k) * std::log1p(-p));
}

// Naive O(N_A N_B) tail of the joint binomial PMF.
double double_sum_tail(std::int64_t threshold, std::uint64_t n_a, std::uint64_t n_b, double c, double p_a) {
  const double p_b = (c - p_a) / c;
  double total = 0.0;
  for (std::uint64_t i = 0; i <= n_a; ++i)
    for (std::uint64_t j = 0; j <= n_b; ++j)
      if (static_cast<double>(i * n_b) + c * static_cast<double>(j * n_a) >= static_cast<double>(threshold))
        total += binom_pmf(n_a, i, p_a) * binom_pmf(n_b, j, p_b);
  return total;
}

// Upper-tail quantile by bisection on erfc; fine for the moderate z of small samples.
double z_from_p(double p) {
  if (p >= 0.5) return 0.0;
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Brute-force significance: dense scan over the boundary nulls with the naive tail.
double oracle_sigma(std::uint64_t k_a, std::uint64_t n_a, std::uint64_t k_b, std::uint64_t n_b, double c) {
  const std::int64_t t = static_cast<std::int64_t>(k_a * n_b) + static_cast<std::int64_t>(c) * static_cast<std::int64_t>(k_b * n_a);
  if (static_cast<double>(t) <= c * static_cast<double>(n_a * n_b)) return 0.0;
  double worst = 0.0;
  for (int s = 0; s <= 5000; ++s) worst = std::max(worst, double_sum_tail(t, n_a, n_b, c, s / 5000.0));
  return z_from_p(worst);
}

std::uint64_t k_of(double p, std::uint64_t n) { return static_cast<std::uint64_t>(std::llround(p * static_cast<double>(n))); }

}  // namespace

TEST(Quantumness, LinearFormulas) {
  EXPECT_NEAR(quantumness(0.952, 0.777, ProtocolKind::factoring), 0.060, 1e-12);
  EXPECT_NEAR(quantumness(0.757, 0.710, ProtocolKind::lwe), 0.177, 1e-12);
  EXPECT_DOUBLE_EQ(quantumness(1, 1, ProtocolKind::lwe), 1.0);
  EXPECT_DOUBLE_EQ(quantumness(1, 1, ProtocolKind::factoring), 1.0);
  EXPECT_EQ(class_constant(ProtocolKind::lwe), 2.0);
  EXPECT_EQ(class_constant(ProtocolKind::factoring), 4.0);
}

TEST(NormalTail, LogSurvivalAndInverse) {
  for (double z : {0.0, 0.5, 1.0, 3.0, 8.0, 20.0}) {
    EXPECT_NEAR(std::exp(log_normal_sf(z)), 0.5 * std::erfc(z / std::sqrt(2.0)),
                1e-12 * 0.5 * std::erfc(z / std::sqrt(2.0)) + 1e-300);
    EXPECT_NEAR(sigma_from_log_p(log_normal_sf(z)), z, 1e-8);
  }
  // Deep tail through the asymptotic branch.
  EXPECT_NEAR(sigma_from_log_p(log_normal_sf(60.0)), 60.0, 1e-6);
  EXPECT_LT(log_normal_sf(60.0), log_normal_sf(59.0));
  EXPECT_EQ(sigma_from_log_p(0.0), 0.0);
}

TEST(Significance, FastTailEqualsDoubleSum) {
  for (auto c : {2.0, 4.0})
    for (std::uint64_t n_a : {1ULL, 7ULL, 19ULL, 30ULL})
      for (std::uint64_t n_b : {1ULL, 12ULL, 30ULL})
        for (double p_a : {0.0, 0.2, 0.55, 0.97, 1.0})
          for (std::int64_t t : {std::int64_t{0}, static_cast<std::int64_t>(n_a * n_b),
                                 static_cast<std::int64_t>(c * n_a * n_b) + 1, static_cast<std::int64_t>((1 + c) * n_a * n_b)}) {
            const double fast = std::exp(log_tail_at_null(t, n_a, n_b, c, p_a));
            EXPECT_NEAR(fast, double_sum_tail(t, n_a, n_b, c, p_a), 1e-12)
                << c << " " << n_a << " " << n_b << " " << p_a << " " << t;
          }
}

TEST(Significance, AgreesWithBruteForceOnSmallSamples) {
  struct Case {
    std::uint64_t k_a, n_a, k_b, n_b;
    ProtocolKind kind;
  };
  for (const auto& cs : {Case{28, 30, 27, 30, ProtocolKind::lwe}, Case{20, 20, 18, 25, ProtocolKind::factoring},
                         Case{25, 30, 29, 30, ProtocolKind::lwe}, Case{30, 30, 28, 30, ProtocolKind::factoring}}) {
    const double want = oracle_sigma(cs.k_a, cs.n_a, cs.k_b, cs.n_b, class_constant(cs.kind));
    EXPECT_NEAR(significance(cs.k_a, cs.n_a, cs.k_b, cs.n_b, cs.kind), want, 5e-3);
    EXPECT_NEAR(significance(cs.k_a, cs.n_a, cs.k_b, cs.n_b, cs.kind, NullSearch::exhaustive), want, 5e-3);
  }
}

TEST(Significance, PublishedRows) {
  EXPECT_NEAR(significance(k_of(0.952, 4096), 4096, k_of(0.777, 15267), 15267, ProtocolKind::factoring), 4.3, 0.2);
  EXPECT_NEAR(significance(k_of(0.601, 8000), 8000, k_of(0.737, 7622), 7622, ProtocolKind::lwe), 6.2, 0.2);
  EXPECT_EQ(significance(k_of(0.864, 2066), 2066, k_of(0.700, 27944), 27944, ProtocolKind::factoring), 0.0);
}

TEST(Significance, NonPositiveQGivesZero) {
  EXPECT_EQ(significance(50, 100, 50, 100, ProtocolKind::lwe), 0.0);
  EXPECT_EQ(significance(100, 100, 50, 100, ProtocolKind::lwe), 0.0);  // q = 0 exactly
  EXPECT_EQ(significance(0, 10, 0, 10, ProtocolKind::factoring), 0.0);
  EXPECT_EQ(significance_at_q(-0.1, 1000, 1000, ProtocolKind::lwe), 0.0);
}

TEST(Significance, MonotoneInAcceptCounts) {
  const std::uint64_t n_a = 400, n_b = 600;
  for (auto kind : {ProtocolKind::lwe, ProtocolKind::factoring}) {
    double prev = 0.0;
    for (std::uint64_t k_a = 300; k_a <= n_a; k_a += 20) {
      const double s = significance(k_a, n_a, 560, n_b, kind);
      EXPECT_GE(s, prev - 1e-9);
      prev = s;
    }
    prev = 0.0;
    for (std::uint64_t k_b = 500; k_b <= n_b; k_b += 10) {
      const double s = significance(390, n_a, k_b, n_b, kind);
      EXPECT_GE(s, prev - 1e-9);
      prev = s;
    }
  }
}

TEST(Significance, RefinedSearchMatchesExhaustive) {
  for (auto [pa, na, pb, nb, kind] : {std::tuple{0.952, 4096ULL, 0.777, 15267ULL, ProtocolKind::factoring},
                                      {0.720, 14000ULL, 0.704, 15310ULL, ProtocolKind::lwe},
                                      {0.934, 2361ULL, 0.798, 31353ULL, ProtocolKind::factoring}}) {
    const auto ka = k_of(pa, na), kb = k_of(pb, nb);
    const auto r = significance_detail(ka, na, kb, nb, kind, NullSearch::refined);
    const auto e = significance_detail(ka, na, kb, nb, kind, NullSearch::exhaustive);
    // Refined polishes between grid points, so it can only find a larger p-value.
    EXPECT_GE(r.log_p, e.log_p - 1e-9);
    EXPECT_NEAR(r.sigma, e.sigma, 0.01);
    const double c = class_constant(kind);
    EXPECT_GE(r.null_p_a, 0.0);
    EXPECT_LE(r.null_p_a, 1.0);
    EXPECT_LE((c - r.null_p_a) / c, 1.0);
  }
}

TEST(Contour, RoundTripAndMonotonicity) {
  for (auto kind : {ProtocolKind::lwe, ProtocolKind::factoring}) {
    double prev = 0.0;
    for (double target : {0.5, 2.0, 5.0, 10.0}) {
      const auto c = contour_q_for_sigma(4000, 8000, target, kind);
      ASSERT_TRUE(c.reachable);
      EXPECT_GE(significance_at_q(c.q, 4000, 8000, kind), target - 1e-6);
      EXPECT_LT(significance_at_q(c.q - 1e-3, 4000, 8000, kind), target);
      EXPECT_GT(c.q, prev);
      prev = c.q;
    }
    EXPECT_LT(contour_q_for_sigma(40000, 80000, 5.0, kind).q, contour_q_for_sigma(4000, 8000, 5.0, kind).q);
    EXPECT_LT(contour_q_for_sigma(4000, 8000, 1e-3, kind).q, 0.01);
  }
  EXPECT_FALSE(contour_q_for_sigma(3, 3, 30.0, ProtocolKind::lwe).reachable);
}

TEST(RelativePerformance, Rescaling) {
  EXPECT_DOUBLE_EQ(relative_performance(0.9, 0.9, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(relative_performance(0.5, 0.9, 0.5), 0.0);
  const double c2 = std::pow(std::cos(std::numbers::pi / 8), 2);
  EXPECT_NEAR(relative_performance(0.777, c2, 0.5), (0.777 - 0.5) / (c2 - 0.5), 1e-15);
  EXPECT_THROW(relative_performance(0.7, 0.5, 0.5), ContractViolation);
}

TEST(RelativePerformance, BranchConstants) {
  const auto f15 = paper_instance(ProtocolKind::factoring, "15").pub;
  EXPECT_DOUBLE_EQ(branch_constants(f15, Branch::standard).p_guess, 0.25);
  EXPECT_NEAR(branch_constants(f15, Branch::interference).p_ideal, std::pow(std::cos(std::numbers::pi / 8), 2), 1e-15);
  const auto l0 = lwe_paper_instance(0).pub;
  EXPECT_DOUBLE_EQ(branch_constants(l0, Branch::standard).p_guess, 2.0 / 32.0);
  EXPECT_DOUBLE_EQ(branch_constants(l0, Branch::interference).p_guess, 0.5);
  EXPECT_DOUBLE_EQ(branch_constants(l0, Branch::interference).p_ideal, 1.0);
}

TEST(Aggregation, FewestShotsNormalisation) {
  const auto agg = aggregate_pb_over_r({{100, 80, 200}, {50, 40, 200}, {50, 45, 200}});
  EXPECT_EQ(agg.n_b, 150U);
  EXPECT_NEAR(agg.p_b, (0.8 + 0.8 + 0.9) / 3, 1e-15);
  const auto equal = aggregate_pb_over_r({{10, 7, 10}, {10, 9, 10}});
  EXPECT_NEAR(equal.p_b, 16.0 / 20.0, 1e-15);
  EXPECT_EQ(equal.n_b, 20U);
  const auto single = aggregate_pb_over_r({{33, 11, 40}});
  EXPECT_NEAR(single.p_b, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(single.n_b, 33U);
  EXPECT_THROW(aggregate_pb_over_r({}), ContractViolation);
}

TEST(Summary, FactoringUsesPerRAggregate) {
  const auto inst = paper_instance(ProtocolKind::factoring, "8").pub;
  Tally t;
  t.a = {100, 95, 200};
  t.b = {150, 120, 300};
  t.per_r = {{"01", {100, 80, 100}}, {"10", {50, 40, 100}}};
  const auto s = summarize(inst, "interactive", t);
  EXPECT_EQ(s.n_b, 100U);
  EXPECT_NEAR(s.p_b, 0.8, 1e-15);
  EXPECT_NEAR(s.q, quantumness(0.95, 0.8, ProtocolKind::factoring), 1e-15);
  EXPECT_NEAR(s.sigma, significance(95, 100, 80, 100, ProtocolKind::factoring), 1e-12);
  const auto back = summary_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST(Summary, CsvRows) {
  const auto inst = lwe_paper_instance(0).pub;
  Tally t;
  t.a = {1000, 1000, 1000};
  t.b = {950, 950, 1000};
  const auto s = summarize(inst, "delayed", t);
  EXPECT_NEAR(s.q, 1.0, 1e-15);
  EXPECT_GT(s.sigma, 10.0);
  EXPECT_DOUBLE_EQ(s.r_a, 1.0);
  const auto csv = report_csv({s});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "instance,mode,branch,p,N,q,sigma,R");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("paper:0,delayed,A,1,1000,"), std::string::npos) << csv;
}

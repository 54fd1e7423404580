#pragma once

// Quantumness, significance against the least-rejected classical null, contours,
// relative performance and report emission.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "poq/protocol.hpp"
#include "poq/tcf.hpp"

namespace poq {

/// c in q = p_A + c p_B - c: 2 for LWE, 4 for factoring.
double class_constant(ProtocolKind kind);
double quantumness(double p_a, double p_b, ProtocolKind kind);

/// log Q(z) = log P(Z > z) for a standard normal, accurate deep into the tail.
double log_normal_sf(double z);
/// z >= 0 with Q(z) = exp(log_p); 0 when log_p >= log(1/2).
double sigma_from_log_p(double log_p);

enum class NullSearch {
  refined,    // coarse grid, local 1e-3 grid, golden-section polish, endpoints
  exhaustive  // every 1e-3 step along the boundary
};

/// log P(k_A' N_B + c k_B' N_A >= threshold) under independent binomials with
/// success rates (p_a_null, (c - p_a_null) / c). Cost O(N_A + N_B).
double log_tail_at_null(std::int64_t threshold, std::uint64_t n_a, std::uint64_t n_b, double c, double p_a_null);

struct SignificanceResult {
  double q = 0.0;
  double sigma = 0.0;
  double log_p = 0.0;      // log of the maximal p-value over the boundary nulls
  double null_p_a = 0.0;   // maximising null, p_A coordinate
};

SignificanceResult significance_detail(std::uint64_t k_a, std::uint64_t n_a, std::uint64_t k_b, std::uint64_t n_b,
                                       ProtocolKind kind, NullSearch search = NullSearch::refined);
double significance(std::uint64_t k_a, std::uint64_t n_a, std::uint64_t k_b, std::uint64_t n_b, ProtocolKind kind,
                    NullSearch search = NullSearch::refined);

/// Significance of an observed quantumness q' (real valued) at the given sample sizes.
double significance_at_q(double q, std::uint64_t n_a, std::uint64_t n_b, ProtocolKind kind,
                         NullSearch search = NullSearch::refined);

struct ContourResult {
  bool reachable = false;
  double q = 0.0;  // smallest q' in (0, 1] with significance >= target, to 1e-6
};

ContourResult contour_q_for_sigma(std::uint64_t n_a, std::uint64_t n_b, double target_sigma, ProtocolKind kind);

/// (p_exp - p_guess) / (p_ideal - p_guess).
double relative_performance(double p_exp, double p_ideal, double p_guess);

struct BranchConstants {
  double p_ideal = 1.0;
  double p_guess = 0.5;
};

/// Branch A: (1, 2 / |domain|). LWE B: (1, 1/2). Factoring B: (cos^2(pi/8), 1/2).
BranchConstants branch_constants(const PublicInstance& inst, Branch branch);

struct AggregateB {
  double p_b = 0.0;
  std::uint64_t n_b = 0;
};

/// Unweighted mean of per-r pass rates; N_B = min per-r size times the number of r values.
AggregateB aggregate_pb_over_r(const std::vector<BranchCount>& per_r);

struct ExperimentSummary {
  std::string instance;
  ProtocolKind protocol = ProtocolKind::lwe;
  std::string mode;
  double p_a = 0.0;
  std::uint64_t n_a = 0;
  double p_b = 0.0;
  std::uint64_t n_b = 0;
  double q = 0.0;
  double sigma = 0.0;
  BranchConstants constants_a;
  BranchConstants constants_b;
  double r_a = 0.0;
  double r_b = 0.0;
};

/// Factoring p_B and N_B come from the per-r aggregation when per-r counts exist.
ExperimentSummary summarize(const PublicInstance& inst, const std::string& mode, const Tally& tally);

nlohmann::json to_json(const ExperimentSummary& s);
ExperimentSummary summary_from_json(const nlohmann::json& j);
/// Header plus one row per branch: instance,mode,branch,p,N,q,sigma,R.
std::string report_csv(const std::vector<ExperimentSummary>& summaries);

}  // namespace poq

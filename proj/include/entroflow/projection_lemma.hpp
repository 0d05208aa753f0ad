#pragma once

// Finite-dimensional model of commuting projections P_1..P_m and the inequality
// |sum P_i xi_i|^2 <= (m-1) sum |xi_i|^2 for vectors with P_1...P_m xi_i = 0.
// Commuting projections diagonalize simultaneously, so each basis vector
// carries a pattern eps in {0,1}^m (bit j set iff P_j fixes it).

#include <cstdint>
#include <random>
#include <vector>

namespace entroflow::projection {

using Vector = std::vector<double>;

struct CommutingProjectionFamily {
  std::size_t dim = 0;
  std::size_t m = 0;
  std::vector<std::uint32_t> pattern;  // one bitmask per basis vector

  /// Family from explicit 0/1 indicator vectors, one per projection.
  static CommutingProjectionFamily from_indicators(const std::vector<std::vector<std::uint8_t>>& indicators);

  std::uint32_t full() const { return (1u << m) - 1u; }
  Vector apply(std::size_t j, const Vector& v) const;
  /// Frobenius norm of P_i P_j - P_j P_i; zero in this model, computed anyway.
  double commutator_norm(std::size_t i, std::size_t j) const;
};

/// Components of a vector in the joint eigenspaces H_eps, keyed by pattern.
struct EpsilonDecomposition {
  std::vector<std::uint32_t> patterns;
  std::vector<Vector> components;
};

/// DimensionTooSmall unless D >= 2^m; 2 <= m <= 6. Every pattern gets at least
/// one basis vector.
CommutingProjectionFamily random_family(std::size_t D, std::size_t m, std::uint64_t seed);

EpsilonDecomposition decompose(const CommutingProjectionFamily& f, const Vector& xi);

/// Removes the component in the joint range of all projections.
Vector project_out_common(const CommutingProjectionFamily& f, const Vector& xi);

struct InequalityResult {
  double lhs;
  double rhs;
  bool holds;
  double slack() const { return rhs - lhs; }
};

/// HypothesisViolated if some |P_1...P_m xi_i| exceeds 1e-10 (relative to |xi_i|).
InequalityResult check_inequality(const CommutingProjectionFamily& f, const std::vector<Vector>& xi);

struct EqualityVerdict {
  bool pass;
  /// Largest relative norm of a component outside the allowed patterns.
  double leak;
};

/// NotAnEqualityCase unless |lhs - rhs| < 1e-8 rhs. PASS iff each xi_i lies in
/// the span of H_j, j != i (patterns with a single zero, not at i).
EqualityVerdict equality_witness_check(const CommutingProjectionFamily& f, const std::vector<Vector>& xi);

/// xi_i = sum_{j != i} eta_j with random eta_j in H_j: the equality case.
std::vector<Vector> equality_case(const CommutingProjectionFamily& f, std::mt19937_64& rng);

/// Adds to xi_index a component in a joint eigenspace with at least two zeros
/// (keeps the hypothesis, breaks equality). Its norm is `rel` times the RMS
/// norm of the xi_j, so the gap is at least rel^2 rhs / (m (m-1)) for m >= 3
/// and rel^2 rhs / m for m = 2.
std::vector<Vector> perturb(const CommutingProjectionFamily& f, std::vector<Vector> xi, std::size_t index, double rel,
                            std::mt19937_64& rng);

struct SuiteReport {
  std::size_t random_trials = 0;
  double min_slack = 0.0;          // min over trials of rhs - lhs
  std::size_t violations = 0;      // trials with slack < -1e-10
  std::size_t equality_cases = 0;
  std::size_t equality_passed = 0;  // |lhs - rhs| < 1e-10 rhs and witness PASS
  std::size_t perturbed_cases = 0;
  std::size_t perturbed_broken = 0;  // gap > 1e-6 rhs
  double min_perturbed_gap = 0.0;    // relative to rhs
};

/// Randomized verification with m in [2, max_m], D in [2^m, max_dim].
SuiteReport run_suite(std::size_t max_dim, std::size_t max_m, std::size_t trials, std::size_t equality_cases,
                      std::uint64_t seed);

}  // namespace entroflow::projection

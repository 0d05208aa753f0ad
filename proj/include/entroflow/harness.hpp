#pragma once

// Executable checks: entropy sequences of normalized sums, equality detection,
// Fisher superadditivity for weighted sums, free entropy convexity and free
// stability.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entroflow/measures.hpp"

namespace entroflow::harness {

/// Numerical slack for "nondecreasing".
inline constexpr double kTolMonotone = 2e-3;
/// Slack for the weighted inequalities.
inline constexpr double kTolWeighted = 2e-3;

enum class SequenceKind { kClassical, kFree };

struct EntropySequence {
  SequenceKind kind = SequenceKind::kClassical;
  /// values[k] belongs to n = k + 1; -infinity for atomic laws.
  std::vector<double> values;
  /// deltas[k] = values[k+1] - values[k]; NaN unless both are finite.
  std::vector<double> deltas;
  LawSpec law_ref;
  /// True when every value is -infinity: monotonicity is then vacuous.
  bool vacuous = false;

  bool monotone(double tol = kTolMonotone) const;
  bool bounded(double tol = 1e-3) const;
};

/// values[n] = H of the n-fold self-convolution scaled by 1/sqrt(n).
/// Requires a standardized law (|mean| < 1e-6, |variance - 1| < 1e-4) and N <= 8.
EntropySequence classical_sequence(const LawSpec& law, int N, const Grid& grid = Grid::standard());
/// values[n] = chi of the normalized n-fold free convolution.
EntropySequence free_sequence(const LawSpec& law, int N, const Grid& grid = Grid::standard());

struct EqualityReport {
  std::vector<bool> plateau;  // per delta index
  bool test_pass = false;
  double test_statistic = 0.0;  // max |alpha_m| or sup |J - x|
  double test_ks = 0.0;
  bool consistent = false;
  bool vacuous = false;
};

/// Plateau at delta k when |deltas[k]| < tol with finite values. Runs the
/// Gaussianity (classical, tolerance test_tol) or semicircularity (free)
/// test on the originating law. Consistent iff (any plateau) == pass and a
/// pass comes with plateaus everywhere.
EqualityReport equality_detector(const EntropySequence& seq, double tol, std::optional<double> test_tol = std::nullopt,
                                 const Grid& grid = Grid::standard());

struct WeightVector {
  std::vector<double> a;
  std::vector<double> b;

  /// a_j = 1/sqrt(n+1), b_j = sqrt(1 - a_j^2)/n for n + 1 summands.
  static WeightVector equal(int summands);
  /// b_j = sqrt(1 - a_j^2)/n, which satisfies sum b_j sqrt(1 - a_j^2) = 1.
  static WeightVector from_a(std::vector<double> a);
  /// Throws kInvalidArgument unless the constraint sums are within 1e-12.
  void validate() const;
};

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  /// |lhs - rhs| < 2e-3.
  bool equality = false;
};

struct SpotCheck {
  double t;
  double lhs;
  double rhs;
  bool holds;
};

struct ConvexityCheck : InequalityCheck {
  /// Fisher inequality for the semicircular flows of all summands at t in {0.25, 1, 4}.
  std::vector<SpotCheck> spot;
};

/// Phi(sum a_j x_j) <= n sum b_j^2 Phi(sum_{i != j} a_i x_i / sqrt(1 - a_j^2)).
InequalityCheck fisher_superadditivity_check(const Law& law, const WeightVector& w,
                                             const Grid& grid = Grid::standard());
/// The same inequality with classical convolution and classical Fisher information.
InequalityCheck classical_fisher_superadditivity_check(const GridDensity& law, const WeightVector& w);

/// chi(sum a_j x_j) >= sum (1 - a_j^2)/n chi(sum_{i != j} a_i x_i / sqrt(1 - a_j^2)).
ConvexityCheck entropy_convexity_check(const Law& law, const std::vector<double>& a,
                                       const Grid& grid = Grid::standard());

struct WeightedReport {
  InequalityCheck fisher;
  ConvexityCheck convexity;
};
/// Both weighted checks from one set of free convolutions.
WeightedReport weighted_checks(const Law& law, const WeightVector& w, const Grid& grid = Grid::standard());

struct StabilityReport {
  double dist = 0.0;  // KS(free_power(law, 2), law)
  bool stable = false;
  double chi = 0.0;   // free entropy of the input
};
StabilityReport stability_check(const Law& law, const Grid& grid = Grid::standard());

/// Free entropy deficit below the semicircle required of random inputs.
inline constexpr double kMinEntropyDeficit = 0.02;
/// Standardized mixture of 2-4 overlapping semicircle bumps with random
/// centres, radii and weights (atoms smoothed by semicircular kernels): one
/// support interval, free entropy at least kMinEntropyDeficit below the
/// semicircle's.
GridDensity random_smoothed_law(std::uint64_t seed, const Grid& grid = Grid::standard());
/// Random weight vector with sum a_j^2 = 1 and all a_j^2 in [0.05, 0.9].
std::vector<double> random_weights(int summands, std::uint64_t seed);

}  // namespace entroflow::harness

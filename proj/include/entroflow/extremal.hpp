#pragma once

// Moment-constrained maximization of entropy, negative Fisher information and
// logarithmic energy over grid densities.

#include <cstdint>
#include <vector>

#include "entroflow/measures.hpp"

namespace entroflow::extremal {

enum class Objective { kEntropy, kNegFisher, kLogEnergy };

/// Maximize the objective over densities on `grid` with mass 1, mean 0 and
/// variance `variance`.
struct ConstrainedDensityProblem {
  Grid grid = Grid::standard();
  Objective objective = Objective::kEntropy;
  double variance = 1.0;
};

struct ExtremalResult {
  GridDensity density;
  /// Objective after every accepted step, starting with the projected init.
  std::vector<double> trace;
  int steps = 0;
  /// Largest |moment - target| seen after any accepted step.
  double constraint_drift = 0.0;
  /// Gradient norm orthogonal to the constraint directions at the result.
  double stationarity = 0.0;
};

/// Objective as the optimizer sees it (node sums with weight dx). Entropy and
/// log-energy agree with classical::entropy / log_energy to grid accuracy;
/// neg_fisher is -4 sum (sqrt p_{i+1} - sqrt p_i)^2 / dx.
double objective(const ConstrainedDensityProblem& problem, const std::vector<double>& p);
/// Functional derivative of objective() at p, one value per node.
std::vector<double> gradient(const ConstrainedDensityProblem& problem, const std::vector<double>& p);

/// Projected ascent from `init`. Entropy and neg_fisher take multiplicative
/// steps followed by an exponential tilt back onto the constraints; log-energy
/// takes additive steps followed by the exact L2 projection onto
/// {p >= 0, moments}. Each step backtracks until the objective does not
/// decrease. Stops once the relative objective change stays below 1e-8 for
/// several consecutive steps; throws StalledBelowTolerance otherwise.
ExtremalResult maximize(const ConstrainedDensityProblem& problem, const GridDensity& init, int steps,
                        double step_size);

/// Largest relative mismatch between central finite differences of objective()
/// and <gradient, v> over `probes` smooth random directions v supported
/// where p > 0.
double gradient_check(const ConstrainedDensityProblem& problem, const GridDensity& at, int probes = 16,
                      std::uint64_t seed = 1);

/// Default step sizes, tuned per geometry.
double default_step_size(Objective objective);

}  // namespace entroflow::extremal

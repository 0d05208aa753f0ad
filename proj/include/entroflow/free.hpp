#pragma once

// Free side: Cauchy transforms, semicircular flow, free convolution powers and
// weighted free sums, free entropy, conjugate variables and the random-matrix
// Monte Carlo used as ground truth.

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "entroflow/measures.hpp"

namespace entroflow::freeprob {

using cplx = std::complex<double>;

/// Value of G together with its derivative and the log potential
/// L(z) = integral of log(z - t) dmu(t) (principal branch in every factor).
struct CauchyValue {
  cplx g;
  cplx dg;
  cplx log_potential;
};

/// G(z) = integral of dmu(t) / (z - t). Grid laws are read as the piecewise
/// linear interpolant of their node values, for which G, G' and the log
/// potential have closed forms that stay exact down to the real axis
/// (boundary values are taken from above).
class CauchyEvaluator {
 public:
  explicit CauchyEvaluator(const Law& law);
  explicit CauchyEvaluator(const GridDensity& d);
  explicit CauchyEvaluator(const AtomicLaw& law);

  /// Evaluator for the law of a*X, a > 0.
  CauchyEvaluator dilated(double a) const;

  /// Im z >= 0 is accepted; on the axis the upper boundary value is returned.
  cplx g(cplx z) const;
  CauchyValue eval(cplx z, bool with_log_potential = false) const;

  /// Support hull of the law (after dilation).
  double support_lo() const;
  double support_hi() const;
  double mean() const;
  double variance() const;
  bool atomic() const;

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
  double scale_ = 1.0;
};

/// BelowAxis unless Im z > 1e-8.
cplx cauchy(const Law& law, cplx z);

/// Stieltjes inversion p(x) = -Im G(x + i eps) / pi at the grid nodes, clipped
/// and renormalized. MassLoss if the captured mass is off by more than 1e-2.
GridDensity density_from_cauchy(const CauchyEvaluator& g, const Grid& grid, double eps);

/// Law of x + sqrt(t) s with s a free standard semicircular.
GridDensity semicircular_flow(const Law& law, double t, const Grid& grid = Grid::standard());
/// Law of (x_1 + ... + x_n)/sqrt(n) for free copies of a standardized law.
GridDensity free_power(const Law& law, int n, const Grid& grid = Grid::standard());
/// Law of sum_j a_j x_j for freely independent x_j ~ laws[j], a_j > 0.
/// a_j = 0 entries are dropped.
GridDensity free_weighted_sum(const std::vector<Law>& laws, const std::vector<double>& a,
                              const Grid& grid = Grid::standard());

/// Free Fisher information of the semicircular flow at time t, computed from
/// the boundary-value parametrization without forming a grid density.
double flow_free_fisher(const CauchyEvaluator& g, double t, std::size_t samples = 1537);

/// Log-energy integral of log|s - t| dmu dmu for the histogram reading of d.
double log_energy(const GridDensity& d);
/// chi = log-energy + 3/4 + log(2 pi)/2; -infinity for atomic laws.
double free_entropy(const GridDensity& d);
double free_entropy(const AtomicLaw& law);
double free_entropy(const Law& law);

struct ConjugateVariable {
  Grid grid;
  std::vector<double> values;
  /// 1 where p > 1e-10 max p.
  std::vector<std::uint8_t> mask;
};

/// J = 2 pi H[p] = 2 Re G(x + i0).
ConjugateVariable conjugate(const GridDensity& d);

struct FreeFisher {
  double phi_primary;  // integral of J^2 p
  double phi_cubic;    // (4 pi^2 / 3) integral of p^3
};
FreeFisher free_fisher(const GridDensity& d);

/// Free entropy via the integrated free Fisher gap along the semicircular
/// flow, starting at t_min (atomic laws require t_min > 0).
struct FreeFlowQuadrature {
  double t_max = 400.0;
  double t_min = 0.0;
  int order = 10;
  int samples = 1536;
};
double free_entropy_via_flow(const Law& law, const FreeFlowQuadrature& q = {});

struct EmpiricalSpectrum {
  std::vector<double> eigenvalues;  // sorted ascending
  std::size_t matrix_size = 0;
  std::size_t trials = 0;
};

/// Spectra of (A_1 + Q_2 A_2 Q_2^T + ... + Q_n A_n Q_n^T)/sqrt(n) with i.i.d.
/// diagonal A_i drawn from the law and Haar orthogonal Q_i.
EmpiricalSpectrum rm_oracle(const Law& law, int n, std::size_t N, std::size_t trials, std::uint64_t seed);

struct SemicircularityVerdict {
  bool pass;
  double sup_dev;  // sup |J(x) - x| on the central 90% of the mass
  double ks;       // KS distance to the unit semicircle
};
SemicircularityVerdict semicircularity_test(const GridDensity& d, double tol);

}  // namespace entroflow::freeprob

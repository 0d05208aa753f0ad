#pragma once

// Classical side: convolution, Gaussian smoothing, entropy, score, Fisher
// information and the Hermite machinery behind the Gaussianity test.

#include <cstdint>
#include <vector>

#include "entroflow/measures.hpp"

namespace entroflow::classical {

struct ScoreFunction {
  Grid grid;
  std::vector<double> values;
  /// 1 where the density is at least 1e-12 of its maximum.
  std::vector<std::uint8_t> mask;
};

struct HermiteCoefficients {
  std::vector<double> alpha;
};

/// Density of X1 + X2 on the grid starting at x0_1 + x0_2. Requires equal dx.
GridDensity convolve(const GridDensity& a, const GridDensity& b);
/// Density of a*X (a > 0) resampled on the same grid.
GridDensity dilate(const GridDensity& d, double a);

/// Law of X + sqrt(t) G on the input grid (GridTooNarrow if mass leaves it).
GridDensity heat_flow(const GridDensity& d, double t);
/// Atomic laws are smoothed analytically; t must be positive.
GridDensity heat_flow(const AtomicLaw& law, double t, const Grid& grid = Grid::standard());
GridDensity heat_flow(const Law& law, double t, const Grid& grid = Grid::standard());

double entropy(const GridDensity& d);

/// j = -p'/p by central differences of log p, one-sided at mask edges.
ScoreFunction score(const GridDensity& d);
/// Integral of j(x) * x * p(x) over the mask.
double score_moment(const ScoreFunction& j, const GridDensity& d);
double fisher(const GridDensity& d);

struct FlowQuadrature {
  double t_max = 400.0;
  /// Lower limit. Atomic laws need t_min > 0; the result is then H(X + sqrt(t_min) G).
  double t_min = 0.0;
  /// Gauss-Legendre order per panel in s = sqrt(t).
  int order = 10;
};

/// Entropy via the integrated Fisher-information gap along the heat flow.
/// Returns -infinity for atomic input with t_min = 0.
double entropy_via_flow(const Law& law, const FlowQuadrature& q = {});

/// Physicists' Hermite polynomial by the three-term recursion.
double hermite(int m, double x);
/// Max residual of n^{m/2} H_m(sum x / sqrt n) = sum over compositions of
/// multinomial * prod H_{k_j}(x_j); each sample point is a vector of n values.
double hermite_multinomial_check(int m, int n, const std::vector<std::vector<double>>& sample_points);

/// alpha_m = <j, H_m(x/sqrt2)>_phi / <H_m(x/sqrt2), H_m(x/sqrt2)>_phi for the
/// standard normal weight phi, m = 0..M. A standard Gaussian has alpha_1 = 1/sqrt2.
HermiteCoefficients score_hermite_coefficients(const GridDensity& d, int M);
/// <H_m(x/sqrt2), H_m(x/sqrt2)>_phi = 2^m m!.
double hermite_norm2(int m);
/// Integral of j^2 phi; equals sum alpha_m^2 hermite_norm2(m) by Parseval.
double score_phi_norm2(const GridDensity& d);

struct GaussianityVerdict {
  bool pass;
  double max_alpha;  // max |alpha_m| over 2 <= m <= 6
  double ks;         // KS distance to N(0,1)
};
GaussianityVerdict gaussianity_test(const GridDensity& d, double tol);

struct DominationResult {
  double inf_phi;
  bool pass;
};
/// inf over the grid of phi(s) = int f(u) exp(-u^2/2t + su/t) du.
DominationResult gaussian_domination_check(const GridDensity& d, double t);

}  // namespace entroflow::classical

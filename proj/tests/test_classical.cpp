#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "entroflow/classical.hpp"

using namespace entroflow;
using namespace entroflow::classical;

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;
const double kGaussH = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

GridDensity smoothed_uniform() {
  // (U + G)/sqrt2 with U uniform of variance 1: standardized smoothed uniform.
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  return standardize(heat_flow(u, 1.0)).law;
}

std::size_t node_of(const Grid& g, double t) { return static_cast<std::size_t>(std::lround((t - g.x0) / g.dx)); }

}  // namespace

TEST(Convolve, UniformTriangle) {
  const auto u = realize(LawSpec::uniform(-0.5, 0.5));
  const auto c = convolve(u, u);
  EXPECT_NEAR(c[node_of(c.grid(), 0.0)], 1.0, 1e-3);
  EXPECT_NEAR(trapezoid(c.grid(), c.values()), 1.0, 1e-8);
}

TEST(Convolve, GaussianIdentity) {
  const auto g = realize(LawSpec::gaussian(0, 1));
  const auto c = convolve(g, g);
  const auto ref = realize(LawSpec::gaussian(0, 2), c.grid());
  EXPECT_LT(distance(Law{c}, Law{ref}, Metric::kL1), 1e-6);
}

TEST(Convolve, MomentsAdd) {
  const auto a = realize(LawSpec::semicircle(1.0, 0.5));
  const auto b = realize(LawSpec::uniform(-2.0, 0.5));
  const auto c = convolve(a, b);
  EXPECT_NEAR(mean(Law{c}), mean(Law{a}) + mean(Law{b}), 1e-6);
  EXPECT_NEAR(variance(Law{c}), variance(Law{a}) + variance(Law{b}), 1e-6);
}

TEST(Convolve, TriangularAfterRescale) {
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  const auto c = convolve(u, u);
  const auto t = push_forward(c, AffineMap{0.0, std::numbers::sqrt2}, Grid::standard());
  const double s6 = std::sqrt(6.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x = t.x(i);
    if (std::abs(std::abs(x) - s6) < 0.02) continue;  // kink at the edge
    worst = std::max(worst, std::abs(t[i] - std::max(0.0, (s6 - std::abs(x)) / 6.0)));
  }
  EXPECT_LT(worst, 2e-3);
}

TEST(Convolve, GridMismatch) {
  const auto a = realize(LawSpec::gaussian(0, 1));
  const auto b = realize(LawSpec::gaussian(0, 1), Grid::symmetric(20.0, 4096));
  try {
    convolve(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGridMismatch);
  }
}

TEST(HeatFlow, GaussianVarianceAndSemigroup) {
  const auto g = realize(LawSpec::gaussian(0, 1));
  const auto f = heat_flow(g, 1.0);
  EXPECT_LT(distance(Law{f}, Law{realize(LawSpec::gaussian(0, 2))}, Metric::kL1), 1e-8);
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  EXPECT_NEAR(variance(Law{heat_flow(u, 0.7)}), variance(Law{u}) + 0.7, 1e-6);
  const auto two_step = heat_flow(heat_flow(u, 0.3), 0.5);
  EXPECT_LT(distance(Law{two_step}, Law{heat_flow(u, 0.8)}, Metric::kL1), 1e-6);
}

TEST(HeatFlow, AtomsBecomeBumps) {
  const auto f = heat_flow(AtomicLaw::symmetric_bernoulli(), 0.25);
  const auto ref = realize(LawSpec::mixture({{0.5, LawSpec::gaussian(-1, 0.25)}, {0.5, LawSpec::gaussian(1, 0.25)}}));
  EXPECT_LT(distance(Law{f}, Law{ref}, Metric::kL1), 1e-12);
  EXPECT_THROW(heat_flow(AtomicLaw::symmetric_bernoulli(), 0.0), Error);
}

TEST(HeatFlow, SmallTimeLimit) {
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  const double l2 = distance(Law{heat_flow(u, 1e-2)}, Law{u}, Metric::kL1);
  const double l3 = distance(Law{heat_flow(u, 1e-3)}, Law{u}, Metric::kL1);
  EXPECT_LT(l3, l2);
  EXPECT_LT(l3, 0.02);
}

TEST(Entropy, ClosedForms) {
  EXPECT_NEAR(entropy(realize(LawSpec::gaussian(0, 1))), kGaussH, 1e-9);
  EXPECT_NEAR(entropy(realize(LawSpec::uniform(-kSqrt3, kSqrt3))), std::log(2 * kSqrt3), 1e-3);
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  const double tri = entropy(convolve(u, u)) - 0.5 * std::log(2.0);
  EXPECT_NEAR(tri, 0.5 + 0.5 * std::log(6.0), 1e-3);
}

TEST(Entropy, BoundedByGaussianProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int k = 0; k < 6; ++k) {
    const auto d = realize(LawSpec::mixture(
        {{0.3, LawSpec::gaussian(-u(rng), u(rng))}, {0.7, LawSpec::semicircle(u(rng), u(rng))}}));
    const double v = variance(Law{d});
    EXPECT_LE(entropy(d), 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * v) + 1e-6);
    EXPECT_GE(fisher(heat_flow(d, 0.2)), 1.0 / variance(Law{heat_flow(d, 0.2)}) - 1e-6);
  }
}

TEST(Score, GaussianIsLinear) {
  for (double v : {1.0, 2.5}) {
    const auto d = realize(LawSpec::gaussian(0, v));
    const auto j = score(d);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (std::abs(d.x(i)) <= 4.0) worst = std::max(worst, std::abs(j.values[i] - d.x(i) / v));
    EXPECT_LT(worst, 1e-3);
  }
}

TEST(Score, SmoothedUniformNormalization) {
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  const auto f = heat_flow(u, 1.0);
  EXPECT_NEAR(score_moment(score(f), f), 1.0, 2e-2);
  const double F = fisher(f);
  EXPECT_GE(F, 0.5);
  EXPECT_LT(F, 1.0);
}

TEST(Fisher, GaussianValues) {
  EXPECT_NEAR(fisher(realize(LawSpec::gaussian(0, 1))), 1.0, 1e-6);
  for (double t : {1.0, 3.0}) EXPECT_NEAR(fisher(realize(LawSpec::gaussian(0, 1 + t))), 1.0 / (1 + t), 1e-6);
}

TEST(EntropyViaFlow, Gaussian) {
  EXPECT_NEAR(entropy_via_flow(Law{realize(LawSpec::gaussian(0, 1))}), kGaussH, 1e-4);
}

TEST(EntropyViaFlow, UniformMatchesDirect) {
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  const double direct = entropy(u);
  EXPECT_NEAR(entropy_via_flow(Law{u}), direct, 1e-2);
  EXPECT_NEAR(entropy_via_flow(Law{u}), 1.2425, 1e-2);
}

TEST(EntropyViaFlow, MixtureMatchesDirect) {
  const auto d = standardize(realize(LawSpec::mixture(
                                 {{0.4, LawSpec::gaussian(-1.2, 0.3)}, {0.6, LawSpec::gaussian(0.8, 0.1)}})))
                     .law;
  EXPECT_NEAR(entropy_via_flow(Law{d}), entropy(d), 1e-2);
}

TEST(EntropyViaFlow, AtomsRegularizedByFlow) {
  const Law atoms = AtomicLaw::symmetric_bernoulli();
  EXPECT_EQ(entropy_via_flow(atoms), -std::numeric_limits<double>::infinity());
  const double eps = 0.05;
  const double flowed = entropy_via_flow(atoms, FlowQuadrature{400.0, eps, 10});
  EXPECT_TRUE(std::isfinite(flowed));
  EXPECT_NEAR(flowed, entropy(heat_flow(AtomicLaw::symmetric_bernoulli(), eps)), 5e-2);
}

TEST(Hermite, RecursionValues) {
  EXPECT_DOUBLE_EQ(hermite(2, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(hermite(3, 2.0), 40.0);
  EXPECT_DOUBLE_EQ(hermite(5, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(hermite(0, 3.7), 1.0);
  EXPECT_DOUBLE_EQ(hermite(1, 3.5), 7.0);
  // Explicit polynomials up to order 8 at dyadic probes (exact in binary).
  auto H8 = [](double x) {
    return 256 * std::pow(x, 8) - 3584 * std::pow(x, 6) + 13440 * std::pow(x, 4) - 13440 * x * x + 1680;
  };
  for (double x : {-1.5, -0.25, 0.5, 1.0, 2.0}) EXPECT_DOUBLE_EQ(hermite(8, x), H8(x));
}

TEST(Hermite, MultinomialIdentity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto [m, n] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {2, 3}, {4, 2}, {1, 4}, {0, 3}, {6, 3}}) {
    std::vector<std::vector<double>> pts(20, std::vector<double>(static_cast<std::size_t>(n)));
    for (auto& p : pts)
      for (double& x : p) x = u(rng);
    EXPECT_LT(hermite_multinomial_check(m, n, pts), 1e-10) << m << "," << n;
  }
  // m=2, n=2: both sides 4(x1+x2)^2 - 4.
  const std::vector<std::vector<double>> pt{{0.3, -1.1}};
  EXPECT_LT(hermite_multinomial_check(2, 2, pt), 1e-12);
  EXPECT_NEAR(4 * std::pow(0.3 - 1.1, 2) - 4, 2 * hermite(2, (0.3 - 1.1) / std::sqrt(2.0)), 1e-12);
}

TEST(Hermite, OrthogonalUnderChosenWeight) {
  const Grid g;
  for (int a = 0; a <= 8; ++a) {
    for (int b = 0; b < a; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.count; ++i) {
        const double x = g.x(i);
        s += hermite(a, x / std::numbers::sqrt2) * hermite(b, x / std::numbers::sqrt2) * std::exp(-0.5 * x * x);
      }
      s *= g.dx / std::sqrt(2 * std::numbers::pi);
      EXPECT_LT(std::abs(s) / std::sqrt(hermite_norm2(a) * hermite_norm2(b)), 1e-8);
    }
    double d = 0.0;
    for (std::size_t i = 0; i < g.count; ++i) {
      const double x = g.x(i);
      d += std::pow(hermite(a, x / std::numbers::sqrt2), 2) * std::exp(-0.5 * x * x);
    }
    EXPECT_NEAR(d * g.dx / std::sqrt(2 * std::numbers::pi) / hermite_norm2(a), 1.0, 1e-10);
  }
}

TEST(HermiteCoefficients, GaussianHasOnlyLinearTerm) {
  const auto g = standardize(realize(LawSpec::gaussian(0, 2))).law;
  const auto c = score_hermite_coefficients(g, 8);
  EXPECT_NEAR(c.alpha[1], 1.0 / std::numbers::sqrt2, 1e-6);
  for (int m = 2; m <= 8; ++m) EXPECT_LT(std::abs(c.alpha[static_cast<std::size_t>(m)]), 1e-4);
}

TEST(HermiteCoefficients, SmoothedUniformOracle) {
  const auto d = smoothed_uniform();
  const auto c = score_hermite_coefficients(d, 12);
  EXPECT_NEAR(c.alpha[1], 0.71766, 5e-4);
  EXPECT_NEAR(c.alpha[3], 0.0230, 5e-4);
  double biggest = 0.0;
  for (int m = 2; m <= 6; ++m) biggest = std::max(biggest, std::abs(c.alpha[static_cast<std::size_t>(m)]));
  EXPECT_GT(biggest, 1e-3);
  EXPECT_NEAR(fisher(d), 1.02442, 2e-3);
}

TEST(HermiteCoefficients, ParsevalAgainstWeightedNorm) {
  for (const auto& d : {smoothed_uniform(), standardize(realize(LawSpec::gaussian(0, 2))).law}) {
    const auto c = score_hermite_coefficients(d, 14);
    double s = 0.0;
    for (int m = 0; m <= 14; ++m) s += std::pow(c.alpha[static_cast<std::size_t>(m)], 2) * hermite_norm2(m);
    EXPECT_NEAR(s, score_phi_norm2(d), 2e-2 * score_phi_norm2(d));
  }
}

TEST(Gaussianity, Verdicts) {
  EXPECT_TRUE(gaussianity_test(realize(LawSpec::gaussian(0, 1)), 1e-3).pass);
  const auto u = gaussianity_test(realize(LawSpec::uniform(-kSqrt3, kSqrt3)), 1e-3);
  EXPECT_FALSE(u.pass);
  EXPECT_NEAR(u.ks, 0.0572, 1e-3);
  EXPECT_FALSE(gaussianity_test(realize(LawSpec::semicircle(0, 1)), 1e-3).pass);
}

TEST(GaussianDomination, Examples) {
  const auto u = realize(LawSpec::uniform(-kSqrt3, kSqrt3));
  const auto r = gaussian_domination_check(u, 1.0);
  EXPECT_TRUE(r.pass);
  // Lower bound from the half-line integral: (1/(2 sqrt3)) * int_0^sqrt3 exp(-u^2/2) du.
  const double bound = 1.0 / (2 * kSqrt3) * std::sqrt(std::numbers::pi / 2) * std::erf(kSqrt3 / std::numbers::sqrt2);
  EXPECT_GE(r.inf_phi, bound - 1e-4);
  const auto g = gaussian_domination_check(realize(LawSpec::gaussian(0, 1)), 1.0);
  EXPECT_TRUE(g.pass);
  EXPECT_NEAR(g.inf_phi, 1.0 / std::numbers::sqrt2, 1e-6);
  try {
    gaussian_domination_check(realize(LawSpec::uniform(1, 2)), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHypothesisViolated);
  }
}

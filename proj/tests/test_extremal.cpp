#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "entroflow/classical.hpp"
#include "entroflow/error.hpp"
#include "entroflow/extremal.hpp"
#include "entroflow/free.hpp"

using namespace entroflow;
using namespace entroflow::extremal;

namespace {

constexpr double kHalfLog2PiE = 1.4189385332046727;
const double kRoot3 = std::sqrt(3.0);

GridDensity uniform_init(const Grid& g) { return realize(LawSpec::uniform(-kRoot3, kRoot3), g); }

// Standardized triangle, lightly heat-smoothed.
GridDensity triangle_init(const Grid& g) {
  const GridDensity u = uniform_init(g);
  GridDensity t = push_forward(classical::convolve(u, u), AffineMap{}, g);
  t = classical::heat_flow(t, 0.05);
  return push_forward(standardize(t).law, AffineMap{}, g);
}

double l1(const GridDensity& a, const GridDensity& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * a.grid().dx;
}

const ExtremalResult& solved(Objective o) {
  static std::map<Objective, ExtremalResult> cache;
  auto it = cache.find(o);
  if (it == cache.end()) {
    const Grid g = Grid::standard();
    const GridDensity init = o == Objective::kNegFisher ? triangle_init(g) : uniform_init(g);
    it = cache.emplace(o, maximize({g, o, 1.0}, init, 3000, default_step_size(o))).first;
  }
  return it->second;
}

void expect_contract(Objective o) {
  const auto& r = solved(o);
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_GE(r.trace[k], r.trace[k - 1]) << "step " << k;
  EXPECT_LT(r.constraint_drift, 1e-10);
  EXPECT_LT(r.stationarity, 1e-4);
  const auto v = r.density.values();
  EXPECT_GE(*std::min_element(v.begin(), v.end()), 0.0);
  EXPECT_NEAR(moment(r.density, 1), 0.0, 1e-8);
  EXPECT_NEAR(moment(r.density, 2), 1.0, 1e-8);
  EXPECT_LT(gradient_check({Grid::standard(), o, 1.0}, r.density), 1e-5);
}

}  // namespace

TEST(Extremal, EntropyReachesGaussian) {
  const auto& r = solved(Objective::kEntropy);
  EXPECT_NEAR(classical::entropy(r.density), kHalfLog2PiE, 1e-3);
  EXPECT_NEAR(r.trace.back(), kHalfLog2PiE, 1e-3);
  EXPECT_LT(l1(r.density, realize(LawSpec::gaussian(0.0, 1.0))), 1e-2);
  expect_contract(Objective::kEntropy);
}

TEST(Extremal, FisherReachesGaussian) {
  const auto& r = solved(Objective::kNegFisher);
  EXPECT_NEAR(classical::fisher(r.density), 1.0, 1e-2);
  EXPECT_LT(l1(r.density, realize(LawSpec::gaussian(0.0, 1.0))), 1e-2);
  expect_contract(Objective::kNegFisher);
}

TEST(Extremal, LogEnergyReachesSemicircle) {
  const auto& r = solved(Objective::kLogEnergy);
  EXPECT_NEAR(freeprob::log_energy(r.density), -0.25, 2e-3);
  EXPECT_LT(l1(r.density, realize(LawSpec::semicircle(0.0, 1.0))), 1e-2);
  expect_contract(Objective::kLogEnergy);
}

TEST(Extremal, VarianceScaling) {
  const Grid g = Grid::standard();
  const auto H = maximize({g, Objective::kEntropy, 2.0}, uniform_init(g), 3000, 0.5);
  EXPECT_NEAR(H.trace.back(), kHalfLog2PiE + 0.5 * std::log(2.0), 1e-6);
  const Grid small = Grid::symmetric(6.0, 2048);
  const auto E = maximize({small, Objective::kLogEnergy, 2.0}, uniform_init(small), 3000, 0.5);
  EXPECT_NEAR(E.trace.back(), -0.25 + 0.5 * std::log(2.0), 2e-3);
  EXPECT_LT(l1(E.density, realize(LawSpec::semicircle(0.0, 2.0), small)), 1e-2);
}

TEST(Extremal, ObjectivesMatchLibraryFunctionals) {
  const Grid g = Grid::standard();
  for (const auto& spec : {LawSpec::gaussian(0.0, 1.0), LawSpec::semicircle(0.0, 1.0)}) {
    const GridDensity d = realize(spec, g);
    const std::vector<double> p(d.values().begin(), d.values().end());
    EXPECT_NEAR(objective({g, Objective::kEntropy, 1.0}, p), classical::entropy(d), 1e-8);
    EXPECT_NEAR(objective({g, Objective::kLogEnergy, 1.0}, p), freeprob::log_energy(d), 1e-10);
  }
  const GridDensity gauss = realize(LawSpec::gaussian(0.0, 1.0), g);
  const std::vector<double> p(gauss.values().begin(), gauss.values().end());
  EXPECT_NEAR(objective({g, Objective::kNegFisher, 1.0}, p), -classical::fisher(gauss), 1e-4);
}

TEST(Extremal, GradientAwayFromOptimum) {
  const Grid g = Grid::standard();
  const GridDensity mix = realize(LawSpec::mixture({{0.4, LawSpec::gaussian(-1.0, 0.3)}, {0.6, LawSpec::gaussian(0.8, 0.5)}}), g);
  EXPECT_LT(gradient_check({g, Objective::kEntropy, 1.0}, mix, 16, 3), 1e-5);
  EXPECT_LT(gradient_check({g, Objective::kNegFisher, 1.0}, triangle_init(g), 16, 4), 1e-5);
  EXPECT_LT(gradient_check({g, Objective::kLogEnergy, 1.0}, uniform_init(g), 16, 5), 1e-5);
  EXPECT_LT(gradient_check({g, Objective::kLogEnergy, 1.0}, mix, 16, 6), 1e-5);
}

TEST(Extremal, StallsOnTinyBudget) {
  const Grid g = Grid::standard();
  try {
    maximize({g, Objective::kLogEnergy, 1.0}, uniform_init(g), 3, 0.5);
    FAIL() << "expected a stall";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStalledBelowTolerance);
  }
}

TEST(Extremal, Preconditions) {
  const Grid g = Grid::standard();
  const GridDensity u = uniform_init(g);
  auto code = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kParseError;
  };
  EXPECT_EQ(code([&] { maximize({g, Objective::kEntropy, 0.0}, u, 10, 0.5); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code([&] { maximize({g, Objective::kEntropy, 1.0}, u, 0, 0.5); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code([&] { maximize({g, Objective::kEntropy, 1.0}, u, 10, -1.0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code([&] { maximize({Grid::symmetric(10.0, 1024), Objective::kEntropy, 1.0}, u, 10, 0.5); }),
            ErrorCode::kGridMismatch);
}

#include "entroflow/projection_lemma.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "entroflow/error.hpp"
#include "entroflow/kernels.hpp"

namespace entroflow::projection {

namespace {

double norm2(const Vector& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); }

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32), tag};
  return std::mt19937_64(seq);
}

// Patterns with exactly one zero, at position j.
std::uint32_t single_zero(const CommutingProjectionFamily& f, std::size_t j) { return f.full() & ~(1u << j); }

}  // namespace

CommutingProjectionFamily CommutingProjectionFamily::from_indicators(
    const std::vector<std::vector<std::uint8_t>>& indicators) {
  CommutingProjectionFamily f;
  f.m = indicators.size();
  if (f.m == 0) throw Error(ErrorCode::kInvalidArgument, "no projections given");
  f.dim = indicators[0].size();
  f.pattern.assign(f.dim, 0u);
  for (std::size_t j = 0; j < f.m; ++j) {
    if (indicators[j].size() != f.dim) throw Error(ErrorCode::kInvalidArgument, "indicator lengths differ");
    for (std::size_t k = 0; k < f.dim; ++k)
      if (indicators[j][k]) f.pattern[k] |= 1u << j;
  }
  return f;
}

Vector CommutingProjectionFamily::apply(std::size_t j, const Vector& v) const {
  Vector out(v.size());
  for (std::size_t k = 0; k < dim; ++k) out[k] = (pattern[k] >> j) & 1u ? v[k] : 0.0;
  return out;
}

double CommutingProjectionFamily::commutator_norm(std::size_t i, std::size_t j) const {
  // Diagonal operators: (P_i P_j - P_j P_i)_kk = a_k b_k - b_k a_k.
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double a = (pattern[k] >> i) & 1u, b = (pattern[k] >> j) & 1u;
    s += (a * b - b * a) * (a * b - b * a);
  }
  return std::sqrt(s);
}

CommutingProjectionFamily random_family(std::size_t D, std::size_t m, std::uint64_t seed) {
  if (m < 2 || m > 6) throw Error(ErrorCode::kInvalidArgument, "need 2 <= m <= 6");
  const std::size_t patterns = std::size_t{1} << m;
  if (D < patterns) throw Error(ErrorCode::kDimensionTooSmall, "dimension below 2^m");
  std::mt19937_64 rng = trial_rng(seed, 0, 0x5eed);
  CommutingProjectionFamily f{D, m, std::vector<std::uint32_t>(D)};
  for (std::size_t k = 0; k < patterns; ++k) f.pattern[k] = static_cast<std::uint32_t>(k);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(patterns - 1));
  for (std::size_t k = patterns; k < D; ++k) f.pattern[k] = pick(rng);
  std::shuffle(f.pattern.begin(), f.pattern.end(), rng);
  return f;
}

EpsilonDecomposition decompose(const CommutingProjectionFamily& f, const Vector& xi) {
  EpsilonDecomposition out;
  for (std::uint32_t e = 0; e <= f.full(); ++e) {
    Vector c(f.dim, 0.0);
    for (std::size_t k = 0; k < f.dim; ++k)
      if (f.pattern[k] == e) c[k] = xi[k];
    out.patterns.push_back(e);
    out.components.push_back(std::move(c));
  }
  return out;
}

Vector project_out_common(const CommutingProjectionFamily& f, const Vector& xi) {
  Vector out = xi;
  for (std::size_t k = 0; k < f.dim; ++k)
    if (f.pattern[k] == f.full()) out[k] = 0.0;
  return out;
}

InequalityResult check_inequality(const CommutingProjectionFamily& f, const std::vector<Vector>& xi) {
  if (xi.size() != f.m) throw Error(ErrorCode::kInvalidArgument, "need one vector per projection");
  Vector sum(f.dim, 0.0);
  double rhs = 0.0;
  for (std::size_t i = 0; i < f.m; ++i) {
    if (xi[i].size() != f.dim) throw Error(ErrorCode::kInvalidArgument, "vector dimension mismatch");
    double common = 0.0;
    for (std::size_t k = 0; k < f.dim; ++k) {
      if (f.pattern[k] == f.full()) common += xi[i][k] * xi[i][k];
      if ((f.pattern[k] >> i) & 1u) sum[k] += xi[i][k];
    }
    const double n2 = norm2(xi[i]);
    if (std::sqrt(common) > 1e-10 * std::max(1.0, std::sqrt(n2)))
      throw Error(ErrorCode::kHypothesisViolated, "P_1...P_m xi_i is not zero");
    rhs += n2;
  }
  rhs *= static_cast<double>(f.m - 1);
  const double lhs = norm2(sum);
  return {lhs, rhs, lhs <= rhs + 1e-10};
}

EqualityVerdict equality_witness_check(const CommutingProjectionFamily& f, const std::vector<Vector>& xi) {
  const InequalityResult r = check_inequality(f, xi);
  if (!(std::abs(r.lhs - r.rhs) < 1e-8 * r.rhs)) throw Error(ErrorCode::kNotAnEqualityCase, "inequality is strict");
  double leak = 0.0;
  for (std::size_t i = 0; i < f.m; ++i) {
    double outside = 0.0;
    for (std::size_t k = 0; k < f.dim; ++k) {
      const std::uint32_t e = f.pattern[k];
      const bool allowed = std::popcount(e) == static_cast<int>(f.m) - 1 && ((e >> i) & 1u);
      if (!allowed) outside += xi[i][k] * xi[i][k];
    }
    const double n = std::sqrt(norm2(xi[i]));
    if (n > 0.0) leak = std::max(leak, std::sqrt(outside) / n);
  }
  return {leak < 1e-8, leak};
}

std::vector<Vector> equality_case(const CommutingProjectionFamily& f, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<Vector> eta(f.m, Vector(f.dim, 0.0));
  for (std::size_t j = 0; j < f.m; ++j)
    for (std::size_t k = 0; k < f.dim; ++k)
      if (f.pattern[k] == single_zero(f, j)) eta[j][k] = normal(rng);
  // Cauchy-Schwarz is tight only when every xi_i carries the same eta_j.
  std::vector<Vector> xi(f.m, Vector(f.dim, 0.0));
  for (std::size_t i = 0; i < f.m; ++i)
    for (std::size_t j = 0; j < f.m; ++j)
      if (j != i)
        for (std::size_t k = 0; k < f.dim; ++k) xi[i][k] += eta[j][k];
  return xi;
}

std::vector<Vector> perturb(const CommutingProjectionFamily& f, std::vector<Vector> xi, std::size_t index, double rel,
                            std::mt19937_64& rng) {
  std::vector<std::uint32_t> targets;
  for (std::uint32_t e = 0; e <= f.full(); ++e)
    if (std::popcount(e) <= static_cast<int>(f.m) - 2) targets.push_back(e);
  const std::uint32_t e = targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng)];
  std::normal_distribution<double> normal;
  Vector dir(f.dim, 0.0);
  for (std::size_t k = 0; k < f.dim; ++k)
    if (f.pattern[k] == e) dir[k] = normal(rng);
  // Sized against the RMS component norm: measured against xi_index alone, a
  // near-zero component would make the (second-order) gap vanish.
  double total = 0.0;
  for (const auto& v : xi) total += norm2(v);
  const double scale = rel * std::sqrt(total / static_cast<double>(xi.size()) / norm2(dir));
  for (std::size_t k = 0; k < f.dim; ++k) xi[index][k] += scale * dir[k];
  return xi;
}

SuiteReport run_suite(std::size_t max_dim, std::size_t max_m, std::size_t trials, std::size_t equality_cases,
                      std::uint64_t seed) {
  if (max_m < 2 || max_dim < (std::size_t{1} << max_m))
    throw Error(ErrorCode::kDimensionTooSmall, "max_dim must be at least 2^max_m");
  SuiteReport rep;
  rep.random_trials = trials;
  rep.equality_cases = equality_cases;
  rep.perturbed_cases = equality_cases;

  auto draw_shape = [&](std::mt19937_64& rng) {
    const auto m = std::uniform_int_distribution<std::size_t>(2, max_m)(rng);
    const auto D = std::uniform_int_distribution<std::size_t>(std::size_t{1} << m, max_dim)(rng);
    return std::pair{D, m};
  };

  double min_slack = std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  kernels::apply_thread_cap();
#pragma omp parallel for reduction(min : min_slack) reduction(+ : violations) schedule(static)
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng = trial_rng(seed, t, 1);
    const auto [D, m] = draw_shape(rng);
    const auto f = random_family(D, m, rng());
    std::normal_distribution<double> normal;
    std::vector<Vector> xi(m, Vector(D));
    for (auto& v : xi) {
      for (double& x : v) x = normal(rng);
      v = project_out_common(f, v);
    }
    const InequalityResult r = check_inequality(f, xi);
    min_slack = std::min(min_slack, r.slack());
    if (r.slack() < -1e-10) ++violations;
  }
  rep.min_slack = min_slack;
  rep.violations = violations;

  std::size_t passed = 0, broken = 0;
  double min_gap = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(+ : passed, broken) reduction(min : min_gap) schedule(static)
  for (std::size_t t = 0; t < equality_cases; ++t) {
    std::mt19937_64 rng = trial_rng(seed, t, 2);
    const auto [D, m] = draw_shape(rng);
    const auto f = random_family(D, m, rng());
    const auto xi = equality_case(f, rng);
    const InequalityResult r = check_inequality(f, xi);
    if (std::abs(r.lhs - r.rhs) < 1e-10 * r.rhs && equality_witness_check(f, xi).pass) ++passed;
    const auto index = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    const auto bent = perturb(f, xi, index, 1e-2, rng);
    const InequalityResult rb = check_inequality(f, bent);
    const double gap = rb.slack() / rb.rhs;
    min_gap = std::min(min_gap, gap);
    if (gap > 1e-6) ++broken;
  }
  rep.equality_passed = passed;
  rep.perturbed_broken = broken;
  rep.min_perturbed_gap = min_gap;
  return rep;
}

}  // namespace entroflow::projection

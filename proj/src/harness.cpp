#include "entroflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "entroflow/classical.hpp"
#include "entroflow/error.hpp"
#include "entroflow/free.hpp"

namespace entroflow::harness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Axis samples per flowed Fisher value; quadrature error stays below 1e-5.
constexpr std::size_t kSpotSamples = 513;

void require_standardized(const Law& law) {
  const double m = mean(law), v = variance(law);
  if (std::abs(m) > 1e-6 || std::abs(v - 1.0) > 1e-4)
    throw Error(ErrorCode::kInvalidArgument, "law must be standardized (mean 0, variance 1)");
}

void finish(EntropySequence& s) {
  s.deltas.clear();
  for (std::size_t k = 0; k + 1 < s.values.size(); ++k) {
    const double a = s.values[k], b = s.values[k + 1];
    s.deltas.push_back(std::isfinite(a) && std::isfinite(b) ? b - a : std::numeric_limits<double>::quiet_NaN());
  }
  s.vacuous = std::none_of(s.values.begin(), s.values.end(), [](double v) { return std::isfinite(v); });
}

void check_length(int N) {
  if (N < 1 || N > 8) throw Error(ErrorCode::kInvalidArgument, "sequence length must be in 1..8");
}

bool all_equal(const std::vector<double>& a) {
  return std::all_of(a.begin(), a.end(), [&](double x) { return std::abs(x - a[0]) < 1e-14; });
}

// Law of sum_j a_j x_j together with every normalized leave-one-out sum.
struct WeightedFamily {
  GridDensity total;
  std::vector<std::optional<GridDensity>> leave_one_out;
};

GridDensity free_sum(const Law& law, const std::vector<double>& a, const Grid& grid) {
  std::vector<double> w;
  for (double x : a)
    if (x > 0.0) w.push_back(x);
  if (all_equal(w)) {
    const int n = static_cast<int>(w.size());
    if (std::abs(w[0] * std::sqrt(static_cast<double>(n)) - 1.0) < 1e-12) return freeprob::free_power(law, n, grid);
  }
  return freeprob::free_weighted_sum(std::vector<Law>(w.size(), law), w, grid);
}

GridDensity classical_sum(const GridDensity& law, const std::vector<double>& a) {
  std::optional<GridDensity> acc;
  for (double x : a) {
    if (x <= 0.0) continue;
    const GridDensity part = classical::dilate(law, x);
    acc = acc ? classical::convolve(*acc, part) : part;
  }
  return *acc;
}

std::vector<double> leave_one_out_weights(const std::vector<double>& a, std::size_t j) {
  const double norm = std::sqrt(1.0 - a[j] * a[j]);
  std::vector<double> c;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (i != j) c.push_back(a[i] / norm);
  return c;
}

template <class Sum>
WeightedFamily build_family(const std::vector<double>& a, Sum&& sum) {
  WeightedFamily f{sum(a), {}};
  const bool equal = all_equal(a);
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (1.0 - a[j] * a[j] <= 0.0) {
      f.leave_one_out.emplace_back();
    } else if (equal && j > 0) {
      f.leave_one_out.push_back(f.leave_one_out[0]);
    } else {
      f.leave_one_out.emplace_back(sum(leave_one_out_weights(a, j)));
    }
  }
  return f;
}

void validate_a(const std::vector<double>& a) {
  if (a.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two weights");
  double s = 0.0;
  for (double x : a) {
    if (!(x >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "weights must be nonnegative");
    s += x * x;
  }
  if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorCode::kInvalidArgument, "sum of squared weights must be 1");
}

const GridDensity& require_density(const Law& law) {
  if (!std::holds_alternative<GridDensity>(law))
    throw Error(ErrorCode::kHypothesisViolated, "inequality checks need an absolutely continuous law");
  return std::get<GridDensity>(law);
}

}  // namespace

bool EntropySequence::monotone(double tol) const {
  return std::all_of(deltas.begin(), deltas.end(), [&](double d) { return std::isnan(d) || d >= -tol; });
}

bool EntropySequence::bounded(double tol) const {
  const double cap = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + tol;
  return std::all_of(values.begin(), values.end(), [&](double v) { return !std::isfinite(v) || v <= cap; });
}

EntropySequence classical_sequence(const LawSpec& spec, int N, const Grid& grid) {
  check_length(N);
  validate(spec);
  EntropySequence s{SequenceKind::kClassical, {}, {}, spec, false};
  if (spec.is_atomic()) {
    // Sums of atoms stay atomic: every entropy is -infinity.
    s.values.assign(static_cast<std::size_t>(N), -kInf);
    finish(s);
    return s;
  }
  const GridDensity d = realize(spec, grid);
  require_standardized(Law(d));
  GridDensity sum = d;
  s.values.push_back(classical::entropy(d));
  for (int n = 2; n <= N; ++n) {
    sum = classical::convolve(sum, d);
    s.values.push_back(classical::entropy(sum) - 0.5 * std::log(static_cast<double>(n)));
  }
  finish(s);
  return s;
}

EntropySequence free_sequence(const LawSpec& spec, int N, const Grid& grid) {
  check_length(N);
  validate(spec);
  const Law law = to_law(spec, grid);
  require_standardized(law);
  EntropySequence s{SequenceKind::kFree, {}, {}, spec, false};
  for (int n = 1; n <= N; ++n)
    s.values.push_back(n == 1 ? freeprob::free_entropy(law) : freeprob::free_entropy(freeprob::free_power(law, n, grid)));
  finish(s);
  return s;
}

EqualityReport equality_detector(const EntropySequence& seq, double tol, std::optional<double> test_tol,
                                 const Grid& grid) {
  EqualityReport r;
  r.vacuous = seq.vacuous;
  bool any = false, all = true, finite_any = false;
  for (double d : seq.deltas) {
    const bool finite = !std::isnan(d);
    const bool flat = finite && std::abs(d) < tol;
    r.plateau.push_back(flat);
    if (finite) {
      finite_any = true;
      any = any || flat;
      all = all && flat;
    }
  }
  if (r.vacuous) {
    r.consistent = true;
    return r;
  }
  const Law law = to_law(seq.law_ref, grid);
  if (const auto* d = std::get_if<GridDensity>(&law)) {
    if (seq.kind == SequenceKind::kClassical) {
      const auto v = classical::gaussianity_test(*d, test_tol.value_or(1e-4));
      r.test_pass = v.pass;
      r.test_statistic = v.max_alpha;
      r.test_ks = v.ks;
    } else {
      const auto v = freeprob::semicircularity_test(*d, test_tol.value_or(1e-2));
      r.test_pass = v.pass;
      r.test_statistic = v.sup_dev;
      r.test_ks = v.ks;
    }
  }
  // Atomic inputs are neither Gaussian nor semicircular: test_pass stays false.
  r.consistent = r.test_pass ? (finite_any && all) : !any;
  return r;
}

WeightVector WeightVector::equal(int summands) {
  if (summands < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two summands");
  return from_a(std::vector<double>(static_cast<std::size_t>(summands), 1.0 / std::sqrt(static_cast<double>(summands))));
}

WeightVector WeightVector::from_a(std::vector<double> a) {
  WeightVector w{std::move(a), {}};
  const double n = static_cast<double>(w.a.size()) - 1.0;
  for (double x : w.a) w.b.push_back(std::sqrt(std::max(0.0, 1.0 - x * x)) / n);
  return w;
}

void WeightVector::validate() const {
  validate_a(a);
  if (b.size() != a.size()) throw Error(ErrorCode::kInvalidArgument, "a and b must have equal length");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (!(1.0 - a[j] * a[j] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "every a_j^2 must be below 1");
    s += b[j] * std::sqrt(1.0 - a[j] * a[j]);
  }
  if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorCode::kInvalidArgument, "sum b_j sqrt(1 - a_j^2) must be 1");
}

namespace {

WeightedFamily free_family(const Law& law, const std::vector<double>& a, const Grid& grid) {
  require_density(law);
  return build_family(a, [&](const std::vector<double>& w) { return free_sum(law, w, grid); });
}

InequalityCheck fisher_from_family(const WeightedFamily& fam, const WeightVector& w) {
  const double n = static_cast<double>(w.a.size()) - 1.0;
  InequalityCheck c;
  c.lhs = freeprob::free_fisher(fam.total).phi_primary;
  for (std::size_t j = 0; j < w.a.size(); ++j)
    c.rhs += n * w.b[j] * w.b[j] * freeprob::free_fisher(*fam.leave_one_out[j]).phi_primary;
  c.holds = c.lhs <= c.rhs + kTolWeighted;
  c.equality = std::abs(c.lhs - c.rhs) < kTolWeighted;
  return c;
}

ConvexityCheck convexity_from_family(const WeightedFamily& fam, const std::vector<double>& a) {
  const double n = static_cast<double>(a.size()) - 1.0;
  ConvexityCheck c;
  c.lhs = freeprob::free_entropy(fam.total);
  for (std::size_t j = 0; j < a.size(); ++j)
    if (fam.leave_one_out[j]) c.rhs += (1.0 - a[j] * a[j]) / n * freeprob::free_entropy(*fam.leave_one_out[j]);
  c.holds = c.lhs >= c.rhs - kTolWeighted;
  c.equality = std::abs(c.lhs - c.rhs) < kTolWeighted;

  // The integrated form rests on the Fisher inequality along the flow; spot
  // check it at three times with b_j = sqrt(1 - a_j^2)/n.
  const freeprob::CauchyEvaluator total(fam.total);
  for (double t : {0.25, 1.0, 4.0}) {
    SpotCheck s{t, freeprob::flow_free_fisher(total, t, kSpotSamples), 0.0, false};
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (!fam.leave_one_out[j]) continue;
      const double b = std::sqrt(1.0 - a[j] * a[j]) / n;
      s.rhs += n * b * b * freeprob::flow_free_fisher(freeprob::CauchyEvaluator(*fam.leave_one_out[j]), t, kSpotSamples);
    }
    s.holds = s.lhs <= s.rhs + kTolWeighted;
    c.spot.push_back(s);
  }
  return c;
}

}  // namespace

InequalityCheck fisher_superadditivity_check(const Law& law, const WeightVector& w, const Grid& grid) {
  w.validate();
  return fisher_from_family(free_family(law, w.a, grid), w);
}

InequalityCheck classical_fisher_superadditivity_check(const GridDensity& law, const WeightVector& w) {
  w.validate();
  const auto fam = build_family(w.a, [&](const std::vector<double>& a) { return classical_sum(law, a); });
  const double n = static_cast<double>(w.a.size()) - 1.0;
  InequalityCheck c;
  c.lhs = classical::fisher(fam.total);
  for (std::size_t j = 0; j < w.a.size(); ++j)
    c.rhs += n * w.b[j] * w.b[j] * classical::fisher(*fam.leave_one_out[j]);
  c.holds = c.lhs <= c.rhs + kTolWeighted;
  c.equality = std::abs(c.lhs - c.rhs) < kTolWeighted;
  return c;
}

ConvexityCheck entropy_convexity_check(const Law& law, const std::vector<double>& a, const Grid& grid) {
  validate_a(a);
  return convexity_from_family(free_family(law, a, grid), a);
}

WeightedReport weighted_checks(const Law& law, const WeightVector& w, const Grid& grid) {
  w.validate();
  const auto fam = free_family(law, w.a, grid);
  return {fisher_from_family(fam, w), convexity_from_family(fam, w.a)};
}

StabilityReport stability_check(const Law& law, const Grid& grid) {
  require_standardized(law);
  StabilityReport r;
  const GridDensity sq = freeprob::free_power(law, 2, grid);
  if (const auto* atoms = std::get_if<AtomicLaw>(&law))
    r.dist = ks_distance(sq, [&](double t) { return atoms->cdf(t); });
  else
    r.dist = distance(Law(sq), law, Metric::kKS);
  r.stable = r.dist < 0.01;
  r.chi = freeprob::free_entropy(law);
  return r;
}

GridDensity random_smoothed_law(std::uint64_t seed, const Grid& grid) {
  const double chi_max = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  for (std::uint32_t attempt = 0;; ++attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x51u, attempt};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int k = 2 + static_cast<int>(unit(rng) * 3.0);
    std::vector<double> centre, radius, weight;
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      radius.push_back(0.5 + unit(rng));
      // Neighbouring bumps overlap, so the support is a single interval.
      centre.push_back(i == 0 ? 0.0 : centre.back() + (0.3 + 0.5 * unit(rng)) * (radius[i - 1] + radius[i]));
      weight.push_back(0.2 + 0.8 * unit(rng));
      total += weight.back();
    }
    std::vector<MixtureComponent> parts;
    double used = 0.0;
    for (int i = 0; i < k; ++i) {
      const double w = i + 1 < k ? weight[i] / total : 1.0 - used;
      used += w;
      parts.push_back({w, LawSpec::semicircle(centre[i], radius[i] * radius[i] / 4.0)});
    }
    GridDensity d = realize(standardize(LawSpec::mixture(std::move(parts))).law, grid);
    // Heavily overlapping bumps come out nearly semicircular; redraw those.
    if (chi_max - freeprob::free_entropy(d) >= kMinEntropyDeficit) return d;
  }
}

std::vector<double> random_weights(int summands, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xa7u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> s(static_cast<std::size_t>(summands));
  double total = 0.0;
  for (double& x : s) total += (x = u(rng));
  std::vector<double> a;
  for (double x : s) a.push_back(std::sqrt(x / total));
  // Renormalize so the squares sum to one to rounding.
  double sq = 0.0;
  for (double x : a) sq += x * x;
  for (double& x : a) x /= std::sqrt(sq);
  return a;
}

}  // namespace entroflow::harness

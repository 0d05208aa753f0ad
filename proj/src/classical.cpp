#include "entroflow/classical.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "fft.hpp"

namespace entroflow::classical {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kScoreFloor = 1e-12;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

void require_same_step(const Grid& a, const Grid& b) {
  if (std::abs(a.dx - b.dx) > 1e-12 * a.dx) throw Error(ErrorCode::kGridMismatch, "convolution needs equal grid steps");
}

// Drops negligible tails so repeated convolution does not grow without bound.
GridDensity trimmed(double x0, double dx, std::vector<double> v) {
  const double vmax = *std::max_element(v.begin(), v.end());
  for (double& x : v)
    if (std::abs(x) < 1e-15 * vmax) x = 0.0;
  std::size_t lo = 0, hi = v.size();
  while (lo + 1 < hi && v[lo] == 0.0) ++lo;
  while (hi > lo + 1 && v[hi - 1] == 0.0) --hi;
  // Keep one zero on each side so the support edge stays visible to differencing.
  if (lo > 0) --lo;
  if (hi < v.size()) ++hi;
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(lo), v.begin() + static_cast<std::ptrdiff_t>(hi));
  const Grid g{x0 + static_cast<double>(lo) * dx, dx, out.size()};
  return GridDensity(g, std::move(out));
}

}  // namespace

GridDensity convolve(const GridDensity& a, const GridDensity& b) {
  require_same_step(a.grid(), b.grid());
  const double dx = a.grid().dx;
  const auto [la, ha] = a.support_range();
  const auto [lb, hb] = b.support_range();
  const auto va = a.values().subspan(la, ha - la);
  const auto vb = b.values().subspan(lb, hb - lb);
  auto c = detail::linear_convolve(va, vb);
  for (double& x : c) x *= dx;
  const double x0 = a.grid().x0 + b.grid().x0 + static_cast<double>(la + lb) * dx;
  return trimmed(x0, dx, std::move(c));
}

GridDensity dilate(const GridDensity& d, double a) {
  if (!(a > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dilation factor must be positive");
  if (a == 1.0) return d;
  return push_forward(d, AffineMap{0.0, 1.0 / a}, d.grid());
}

GridDensity heat_flow(const GridDensity& d, double t) {
  if (t < 0.0) throw Error(ErrorCode::kInvalidArgument, "flow time must be nonnegative");
  if (t == 0.0) return d;
  const Grid& g = d.grid();
  const auto spill = static_cast<std::size_t>(std::ceil(12.0 * std::sqrt(t) / g.dx));
  const std::size_t n = detail::next_pow2(g.count + 2 * spill);
  auto P = detail::rfft(d.values(), n);
  for (std::size_t k = 0; k < P.size(); ++k) {
    const double w = detail::angular_frequency(k, n, g.dx);
    P[k] *= std::exp(-0.5 * t * w * w);
  }
  auto p = detail::irfft(P, n);
  double lost = 0.0;
  for (std::size_t i = g.count; i < n; ++i) lost += std::abs(p[i]) * g.dx;
  if (lost > 1e-6) throw Error(ErrorCode::kGridTooNarrow, "heat flow spills past the grid");
  p.resize(g.count);
  const double pmax = *std::max_element(p.begin(), p.end());
  for (double& x : p) x = std::max(x, 0.0) < 1e-15 * pmax ? 0.0 : x;
  return GridDensity(g, std::move(p));
}

GridDensity heat_flow(const AtomicLaw& law, double t, const Grid& grid) {
  if (!(t > 0.0)) throw Error(ErrorCode::kAtomicNotRealizable, "atomic law needs t > 0 to have a density");
  const double sd = std::sqrt(t);
  double lost = 0.0;
  std::vector<double> v(grid.count, 0.0);
  for (const Atom& a : law.atoms()) {
    lost += a.weight * (normal_cdf((grid.x0 - 0.5 * grid.dx - a.position) / sd) +
                        normal_cdf(-(grid.back() + 0.5 * grid.dx - a.position) / sd));
    for (std::size_t i = 0; i < grid.count; ++i) {
      const double z = (grid.x(i) - a.position) / sd;
      v[i] += a.weight * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
    }
  }
  if (lost > 1e-6) throw Error(ErrorCode::kGridTooNarrow, "smoothed atoms leave the grid");
  return GridDensity(grid, std::move(v));
}

GridDensity heat_flow(const Law& law, double t, const Grid& grid) {
  if (const auto* d = std::get_if<GridDensity>(&law)) return heat_flow(*d, t);
  return heat_flow(std::get<AtomicLaw>(law), t, grid);
}

double entropy(const GridDensity& d) {
  std::vector<double> f(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) f[i] = d[i] > 0.0 ? -d[i] * std::log(d[i]) : 0.0;
  return trapezoid(d.grid(), f);
}

ScoreFunction score(const GridDensity& d) {
  const std::size_t n = d.size();
  const double h = d.grid().dx;
  const double floor = kScoreFloor * d.max_value();
  ScoreFunction j{d.grid(), std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
  double covered = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] < floor || d[i] == 0.0) continue;
    j.mask[i] = 1;
    covered += d[i] * h;
    double dp;
    if (i == 0) {
      dp = (d[1] - d[0]) / h;
    } else if (i + 1 == n) {
      dp = (d[i] - d[i - 1]) / h;
    } else {
      dp = (d[i + 1] - d[i - 1]) / (2.0 * h);
    }
    j.values[i] = -dp / d[i];
  }
  if (covered < 0.99) throw Error(ErrorCode::kSupportTooThin, "score mask covers less than 99% of the mass");
  return j;
}

double score_moment(const ScoreFunction& j, const GridDensity& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (j.mask[i]) s += j.values[i] * d.x(i) * d[i];
  return s * d.grid().dx;
}

double fisher(const GridDensity& d) {
  const ScoreFunction j = score(d);
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (j.mask[i]) s += j.values[i] * j.values[i] * d[i];
  return s * d.grid().dx;
}

namespace {

// Spectral heat flow on one large periodic grid: the law is transformed once,
// and each flow time costs two inverse transforms (density and derivative).
class SpectralFlow {
 public:
  SpectralFlow(const Law& law, double t_max) {
    const double sd_max = std::sqrt(variance(law) + t_max);
    double lo, hi;
    if (const auto* d = std::get_if<GridDensity>(&law)) {
      h_ = d->grid().dx;
      const auto [a, b] = d->support_range();
      lo = d->x(a);
      hi = d->x(b - 1);
    } else {
      h_ = Grid::standard().dx;
      const auto atoms = std::get<AtomicLaw>(law).atoms();
      lo = atoms.front().position;
      hi = atoms.back().position;
    }
    const double half = 0.5 * (hi - lo) + 12.0 * sd_max;
    n_ = detail::next_pow2(static_cast<std::size_t>(std::ceil(2.0 * half / h_)));
    const double origin = 0.5 * (lo + hi) - 0.5 * static_cast<double>(n_) * h_;
    if (const auto* d = std::get_if<GridDensity>(&law)) {
      const auto [a, b] = d->support_range();
      std::vector<double> v(n_, 0.0);
      const auto offset = static_cast<std::size_t>(std::llround((d->x(a) - origin) / h_));
      for (std::size_t i = a; i < b; ++i) v[offset + i - a] = (*d)[i];
      P_ = detail::rfft(v, n_);
    } else {
      P_.assign(n_ / 2 + 1, {0.0, 0.0});
      for (std::size_t k = 0; k < P_.size(); ++k) {
        const double w = detail::angular_frequency(k, n_, h_);
        for (const Atom& a : std::get<AtomicLaw>(law).atoms())
          P_[k] += a.weight / h_ * std::polar(1.0, -w * (a.position - origin));
      }
    }
  }

  double step() const { return h_; }

  double fisher_at(double t) const {
    std::vector<std::complex<double>> P(P_.size()), D(P_.size());
    for (std::size_t k = 0; k < P_.size(); ++k) {
      const double w = detail::angular_frequency(k, n_, h_);
      P[k] = P_[k] * std::exp(-0.5 * t * w * w);
      D[k] = std::complex<double>(0.0, w) * P[k];
    }
    if (n_ % 2 == 0) D.back() = 0.0;
    const auto p = detail::irfft(P, n_);
    const auto dp = detail::irfft(D, n_);
    const double pmax = *std::max_element(p.begin(), p.end());
    double mass = 0.0, f = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (p[i] <= kScoreFloor * pmax) continue;
      mass += p[i];
      f += dp[i] * dp[i] / p[i];
    }
    return f / mass;
  }

 private:
  double h_ = 0.0;
  std::size_t n_ = 0;
  std::vector<std::complex<double>> P_;
};

}  // namespace

double entropy_via_flow(const Law& law, const FlowQuadrature& q) {
  if (!(q.t_max > q.t_min) || q.t_min < 0.0) throw Error(ErrorCode::kInvalidArgument, "need 0 <= t_min < t_max");
  if (std::holds_alternative<AtomicLaw>(law) && q.t_min == 0.0) return -std::numeric_limits<double>::infinity();
  const double var = variance(law);
  const SpectralFlow flow(law, q.t_max);
  // Below a few grid cells of smoothing the sampled law cannot resolve the
  // flow; there F is continued as c t^{-beta}, beta in [0, 1/2] fitted from two
  // resolved times (beta = 1/2 for laws with jumps, 0 for smooth ones).
  const double t_floor = 16.0 * flow.step() * flow.step();
  double head = 0.0;
  double t_lo = q.t_min;
  if (q.t_min < t_floor && q.t_max > 4.0 * t_floor) {
    const double f1 = flow.fisher_at(t_floor), f4 = flow.fisher_at(4.0 * t_floor);
    const double beta = std::clamp(std::log(f1 / f4) / std::log(4.0), 0.0, 0.5);
    const double fisher_part =
        f1 * std::pow(t_floor, beta) * (std::pow(t_floor, 1.0 - beta) - std::pow(q.t_min, 1.0 - beta)) / (1.0 - beta);
    head = std::log((var + t_floor) / (var + q.t_min)) - fisher_part;
    t_lo = t_floor;
  }

  // Panels in s = sqrt(t), graded towards the lower end where the integrand
  // of a law with jumps behaves like t^{-1/2}.
  static constexpr double kBreaks[] = {0.0, 1e-3, 3e-3, 1e-2, 3e-2, 0.06, 0.1, 0.16, 0.25, 0.35, 0.5, 0.7, 1.0};
  const double s0 = std::sqrt(t_lo), s1 = std::sqrt(q.t_max);
  std::vector<double> nodes, weights;
  const auto& x = boost::math::quadrature::gauss<double, 10>::abscissa();
  const auto& w = boost::math::quadrature::gauss<double, 10>::weights();
  for (std::size_t p = 0; p + 1 < std::size(kBreaks); ++p) {
    const double a = s0 + (s1 - s0) * kBreaks[p], b = s0 + (s1 - s0) * kBreaks[p + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        if (x[k] == 0.0 && sign < 0.0) continue;
        nodes.push_back(mid + sign * half * x[k]);
        weights.push_back(half * w[k]);
      }
    }
  }
  std::vector<double> integrand(nodes.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double t = nodes[k] * nodes[k];
    integrand[k] = (1.0 / (var + t) - flow.fisher_at(t)) * 2.0 * nodes[k];
  }
  const double gap_at_end = 1.0 / (var + q.t_max) - flow.fisher_at(q.t_max);
  if (std::abs(gap_at_end) > 1e-3) throw Error(ErrorCode::kTailTooFat, "Fisher gap at t_max exceeds 1e-3");
  double integral = head;
  for (std::size_t k = 0; k < nodes.size(); ++k) integral += weights[k] * integrand[k];
  return 0.5 * integral + 0.5 * std::log(2.0 * kPi * std::numbers::e * (var + q.t_min));
}

double hermite(int m, double x) {
  if (m < 0) throw Error(ErrorCode::kInvalidArgument, "Hermite order must be nonnegative");
  double prev = 1.0, cur = 2.0 * x;
  if (m == 0) return prev;
  for (int k = 1; k < m; ++k) {
    const double next = 2.0 * x * cur - 2.0 * k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Sum over compositions k_1 + ... + k_n = m of m!/prod k_j! * prod H_{k_j}(x_j).
double multinomial_side(int m, const std::vector<double>& x, std::size_t pos, double coeff) {
  if (pos + 1 == x.size()) return coeff / factorial(m) * hermite(m, x[pos]);
  double s = 0.0;
  for (int k = 0; k <= m; ++k) s += multinomial_side(m - k, x, pos + 1, coeff / factorial(k) * hermite(k, x[pos]));
  return s;
}

}  // namespace

double hermite_multinomial_check(int m, int n, const std::vector<std::vector<double>>& sample_points) {
  if (m < 0 || n < 1) throw Error(ErrorCode::kInvalidArgument, "need m >= 0 and n >= 1");
  double worst = 0.0;
  for (const auto& x : sample_points) {
    if (static_cast<int>(x.size()) != n) throw Error(ErrorCode::kInvalidArgument, "sample point has wrong length");
    double sum = 0.0;
    for (double v : x) sum += v;
    const double lhs = std::pow(static_cast<double>(n), 0.5 * m) * hermite(m, sum / std::sqrt(static_cast<double>(n)));
    const double rhs = multinomial_side(m, x, 0, factorial(m));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

double hermite_norm2(int m) { return std::pow(2.0, m) * factorial(m); }

HermiteCoefficients score_hermite_coefficients(const GridDensity& d, int M) {
  if (M < 0) throw Error(ErrorCode::kInvalidArgument, "expansion order must be nonnegative");
  const ScoreFunction j = score(d);
  HermiteCoefficients out{std::vector<double>(static_cast<std::size_t>(M) + 1, 0.0)};
  const double h = d.grid().dx;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!j.mask[i]) continue;
    const double x = d.x(i);
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
    const double y = x / std::numbers::sqrt2;
    double prev = 0.0, cur = 1.0;
    for (int m = 0; m <= M; ++m) {
      out.alpha[static_cast<std::size_t>(m)] += j.values[i] * cur * phi * h;
      const double next = 2.0 * y * cur - 2.0 * m * prev;
      prev = cur;
      cur = next;
    }
  }
  for (int m = 0; m <= M; ++m) out.alpha[static_cast<std::size_t>(m)] /= hermite_norm2(m);
  return out;
}

double score_phi_norm2(const GridDensity& d) {
  const ScoreFunction j = score(d);
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!j.mask[i]) continue;
    const double x = d.x(i);
    s += j.values[i] * j.values[i] * std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  }
  return s * d.grid().dx;
}

GaussianityVerdict gaussianity_test(const GridDensity& d, double tol) {
  const auto c = score_hermite_coefficients(d, 6);
  double worst = 0.0;
  for (int m = 2; m <= 6; ++m) worst = std::max(worst, std::abs(c.alpha[static_cast<std::size_t>(m)]));
  const double ks = ks_distance(d, [](double t) { return normal_cdf(t); });
  return {worst < tol && ks < 5.0 * tol, worst, ks};
}

DominationResult gaussian_domination_check(const GridDensity& d, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "t must be positive");
  const double left = d.cdf(0.0);
  if (left < 1e-12 || 1.0 - left < 1e-12)
    throw Error(ErrorCode::kHypothesisViolated, "law needs mass on both half-lines");
  const auto [lo, hi] = d.support_range();
  const double h = d.grid().dx;
  double min_log = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : min_log)
  for (std::size_t si = 0; si < d.size(); ++si) {
    const double s = d.x(si);
    // log-sum-exp keeps large |s u / t| from overflowing.
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i) {
      if (d[i] <= 0.0) continue;
      const double u = d.x(i);
      peak = std::max(peak, std::log(d[i]) + (2.0 * s * u - u * u) / (2.0 * t));
    }
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (d[i] <= 0.0) continue;
      const double u = d.x(i);
      acc += std::exp(std::log(d[i]) + (2.0 * s * u - u * u) / (2.0 * t) - peak);
    }
    min_log = std::min(min_log, peak + std::log(acc * h));
  }
  const double inf_phi = std::exp(min_log);
  return {inf_phi, inf_phi > 0.0};
}

}  // namespace entroflow::classical

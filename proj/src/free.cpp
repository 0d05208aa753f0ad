#include "entroflow/free.hpp"

#include <cblas.h>
#include <lapacke.h>
#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>

#include "entroflow/error.hpp"
#include "entroflow/kernels.hpp"

namespace entroflow::freeprob {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
// Evaluations at least this many cells away from the support use the node sum.
constexpr double kFarCells = 8.0;
constexpr double kTruncationTol = 1e-6;

}  // namespace

struct CauchyEvaluator::Impl {
  bool atomic = false;
  std::vector<double> pos, w;     // atoms, or grid nodes with their masses p_i h
  std::vector<double> kink, ds;   // piecewise-linear kinks and slope jumps
  double h = 0.0;
  double lo = 0.0, hi = 0.0, mean = 0.0, var = 0.0;

  // Away from the nodes the same transform is a node sum with hat-function
  // moment corrections: for r = (h/d)^2 the hat at distance d contributes
  //   G: sum_m 2 r^m / ((2m+1)(2m+2)) / d,  G': -sum_m r^m / (m+1) / d^2,
  //   L: log d - sum_{m>=1} r^m / (m (2m+1)(2m+2)).
  CauchyValue node_sum(cplx z, double dist, bool with_log) const {
    const double rmax = (h / dist) * (h / dist);
    int terms = 1;
    for (double e = rmax; e > 1e-17 && terms < 24; e *= rmax) ++terms;
    CauchyValue r{};
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const cplx inv = 1.0 / (z - pos[i]);
      const cplx q = h * h * inv * inv;
      cplx sg = 0.0, sd = 0.0, sl = 0.0;
      for (int m = terms - 1; m >= 0; --m) {
        const double mm = m;
        sg = sg * q + 2.0 / ((2.0 * mm + 1.0) * (2.0 * mm + 2.0));
        sd = sd * q + 1.0 / (mm + 1.0);
        if (with_log && m > 0) sl = sl * q + 1.0 / (mm * (2.0 * mm + 1.0) * (2.0 * mm + 2.0));
      }
      r.g += w[i] * inv * sg;
      r.dg -= w[i] * inv * inv * sd;
      if (with_log) r.log_potential += w[i] * (std::log(z - pos[i]) - sl * q);
    }
    return r;
  }

  CauchyValue eval(cplx z, bool with_log) const {
    CauchyValue r{};
    if (atomic) {
      for (std::size_t i = 0; i < pos.size(); ++i) {
        const cplx inv = 1.0 / (z - pos[i]);
        r.g += w[i] * inv;
        r.dg -= w[i] * inv * inv;
        if (with_log) r.log_potential += w[i] * std::log(z - pos[i]);
      }
      return r;
    }
    const double far = kFarCells * h;
    const double dist = std::max(z.imag(), std::max(lo - z.real(), z.real() - hi));
    if (dist >= far) return node_sum(z, dist, with_log);
    // Exact transforms of the piecewise-linear interpolant: G'' of the density
    // is a sum of slope jumps, so G, G' and L are sums of elementary kernels.
    // Boundary values on the axis come from Im z = +0.
    for (std::size_t k = 0; k < kink.size(); ++k) {
      const cplx d(z.real() - kink[k], z.imag());
      if (d.real() == 0.0 && d.imag() == 0.0) {
        r.dg += ds[k] * -745.0;  // log of the smallest double; a genuine log singularity
        continue;
      }
      const cplx lg = std::log(d);
      r.g += ds[k] * d * lg;
      r.dg += ds[k] * lg;
      if (with_log) r.log_potential += ds[k] * (d * d * (0.5 * lg - 0.75));
    }
    return r;
  }
};

CauchyEvaluator::CauchyEvaluator(const Law& law)
    : CauchyEvaluator(std::holds_alternative<GridDensity>(law) ? CauchyEvaluator(std::get<GridDensity>(law))
                                                                : CauchyEvaluator(std::get<AtomicLaw>(law))) {}

CauchyEvaluator::CauchyEvaluator(const GridDensity& d) {
  auto impl = std::make_shared<Impl>();
  const auto [lo, hi] = d.support_range();
  if (lo >= hi) throw Error(ErrorCode::kDegenerateLaw, "empty density");
  const double h = d.grid().dx;
  impl->h = h;
  auto p = [&](std::ptrdiff_t i) {
    return i < static_cast<std::ptrdiff_t>(lo) || i >= static_cast<std::ptrdiff_t>(hi) ? 0.0
                                                                                       : d[static_cast<std::size_t>(i)];
  };
  const double x0 = d.grid().x0;
  for (auto k = static_cast<std::ptrdiff_t>(lo) - 1; k <= static_cast<std::ptrdiff_t>(hi); ++k) {
    const double jump = (p(k + 1) - 2.0 * p(k) + p(k - 1)) / h;
    if (jump != 0.0) {
      impl->kink.push_back(x0 + h * static_cast<double>(k));
      impl->ds.push_back(jump);
    }
  }
  double mass = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    impl->pos.push_back(d.x(i));
    impl->w.push_back(d[i] * h);
    mass += d[i] * h;
  }
  for (double& m : impl->w) m /= mass;
  for (double& s : impl->ds) s /= mass;
  for (std::size_t i = 0; i < impl->pos.size(); ++i) impl->mean += impl->w[i] * impl->pos[i];
  for (std::size_t i = 0; i < impl->pos.size(); ++i)
    impl->var += impl->w[i] * (impl->pos[i] - impl->mean) * (impl->pos[i] - impl->mean);
  impl->lo = x0 + h * (static_cast<double>(lo) - 1.0);
  impl->hi = x0 + h * static_cast<double>(hi);
  impl_ = std::move(impl);
}

CauchyEvaluator::CauchyEvaluator(const AtomicLaw& law) {
  auto impl = std::make_shared<Impl>();
  impl->atomic = true;
  for (const Atom& a : law.atoms()) {
    impl->pos.push_back(a.position);
    impl->w.push_back(a.weight);
    impl->mean += a.weight * a.position;
  }
  for (const Atom& a : law.atoms()) impl->var += a.weight * (a.position - impl->mean) * (a.position - impl->mean);
  impl->lo = impl->pos.front();
  impl->hi = impl->pos.back();
  impl_ = std::move(impl);
}

CauchyEvaluator CauchyEvaluator::dilated(double a) const {
  if (!(a > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dilation factor must be positive");
  CauchyEvaluator out = *this;
  out.scale_ = scale_ * a;
  return out;
}

CauchyValue CauchyEvaluator::eval(cplx z, bool with_log_potential) const {
  if (z.imag() < 0.0) throw Error(ErrorCode::kBelowAxis, "evaluation below the real axis");
  const double a = scale_;
  CauchyValue r = impl_->eval(z / a, with_log_potential);
  r.g /= a;
  r.dg /= a * a;
  if (with_log_potential) r.log_potential += std::log(a);
  return r;
}

cplx CauchyEvaluator::g(cplx z) const { return eval(z).g; }
double CauchyEvaluator::support_lo() const { return scale_ * impl_->lo; }
double CauchyEvaluator::support_hi() const { return scale_ * impl_->hi; }
double CauchyEvaluator::mean() const { return scale_ * impl_->mean; }
double CauchyEvaluator::variance() const { return scale_ * scale_ * impl_->var; }
bool CauchyEvaluator::atomic() const { return impl_->atomic; }

cplx cauchy(const Law& law, cplx z) {
  if (!(z.imag() > 1e-8)) throw Error(ErrorCode::kBelowAxis, "Im z must exceed 1e-8");
  return CauchyEvaluator(law).g(z);
}

GridDensity density_from_cauchy(const CauchyEvaluator& g, const Grid& grid, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inversion height must be positive");
  std::vector<double> p(grid.count);
  kernels::apply_thread_cap();
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < grid.count; ++i) p[i] = std::max(0.0, -g.g(cplx(grid.x(i), eps)).imag() / kPi);
  double mass = 0.0;
  for (double v : p) mass += v * grid.dx;
  if (std::abs(mass - 1.0) > 1e-2) throw Error(ErrorCode::kMassLoss, "inverted density lost more than 1e-2 of its mass");
  return GridDensity(grid, std::move(p));
}

namespace {

// ---------------------------------------------------------------------------
// Boundary values on the real axis. The semicircular flow and the free
// convolution power both have a subordination function omega whose real-axis
// boundary values u + i v(u) are characterized by a scalar equation in v for
// each u. Scanning u therefore walks the whole output support, including
// gaps, without any inversion height.

struct AxisSample {
  double u, v, x, cdf, p;
};

class AxisProblem {
 public:
  // Flow: -Im G(u+iv)/v = 1/t.  Power: Im F(u+iv)/v = n/(n-1), F = 1/G.
  AxisProblem(const CauchyEvaluator& g, double t, int n) : g_(g), t_(t), n_(n) {
    if (n_ > 0) {
      c_ = (n_ - 1.0) / n_;
      vmax_ = std::sqrt(g.variance() * (n_ - 1.0)) * (1.0 + 1e-9);
    } else {
      c_ = t_;
      vmax_ = std::sqrt(t_) * (1.0 + 1e-9);
    }
  }

  double solve(double u, double guess) const {
    // Inside the support the boundary value is strictly above the axis.
    const CauchyValue at_axis = g_.eval(cplx(u, 0.0));
    const double density = -at_axis.g.imag() / kPi;
    if (!(density > 1e-13 * density_scale())) {
      const double slope = q_slope(at_axis);  // dQ/dv at v = 0
      if (!(slope * c_ > 1.0)) return 0.0;
    }
    double a = 0.0, b = vmax_;
    double v = guess > 0.0 && guess < b ? guess : 0.5 * b;
    for (int it = 0; it < 300; ++it) {
      const CauchyValue e = g_.eval(cplx(u, v));
      const double q = q_value(e), dq = q_slope(e);
      const double gv = v / q - c_;
      if (gv < 0.0) a = v; else b = v;
      if (std::abs(gv) <= 1e-15 * c_) return v;
      const double dg = (q - v * dq) / (q * q);
      double next = v - gv / dg;
      if (!(next > a && next < b)) next = a > 0.0 ? (b / a > 8.0 ? std::sqrt(a * b) : 0.5 * (a + b)) : 0.05 * b;
      if (std::abs(next - v) <= 1e-15 * v || b - a <= 1e-16 * b + 1e-12 * vmax_) return next;
      v = next;
    }
    throw Error(ErrorCode::kNoConvergence, "boundary-value solve did not converge");
  }

  AxisSample sample(double u, double v) const {
    const CauchyValue e = g_.eval(cplx(u, v), true);
    AxisSample s{u, v, 0.0, 0.0, -e.g.imag() / kPi};
    if (n_ > 0) {
      const cplx f = 1.0 / e.g;
      s.x = n_ * u - (n_ - 1.0) * f.real();
      double arg = std::atan2(e.g.imag(), e.g.real());
      if (arg > 0.0) arg = arg > 0.5 * kPi ? arg - 2.0 * kPi : 0.0;  // G lies in the closed lower half-plane
      s.cdf = 1.0 - (n_ * e.log_potential.imag() + (n_ - 1.0) * arg) / kPi;
    } else {
      s.x = u + t_ * e.g.real();
      s.cdf = 1.0 - (e.log_potential + 0.5 * t_ * e.g * e.g).imag() / kPi;
    }
    s.cdf = std::clamp(s.cdf, 0.0, 1.0);
    s.p = std::max(s.p, 0.0);
    return s;
  }

  bool zero_at(double u) const {
    const CauchyValue e = g_.eval(cplx(u, 0.0));
    return !(-e.g.imag() / kPi > 1e-13 * density_scale()) && !(q_slope(e) * c_ > 1.0);
  }

  double spread() const { return n_ > 0 ? vmax_ : std::sqrt(t_); }

 private:
  double density_scale() const { return 1.0 / std::max(g_.support_hi() - g_.support_lo(), 1e-300); }
  double q_value(const CauchyValue& e) const { return n_ > 0 ? (1.0 / e.g).imag() : -e.g.imag(); }
  double q_slope(const CauchyValue& e) const { return n_ > 0 ? (-e.dg / (e.g * e.g)).real() : -e.dg.real(); }

  const CauchyEvaluator& g_;
  double t_;
  int n_;
  double c_ = 0.0, vmax_ = 0.0;
};

std::vector<AxisSample> scan_axis(const AxisProblem& prob, double lo, double hi, std::size_t m) {
  // Extend past the support hull until the boundary value is on the axis.
  const double step = 0.02 * (hi - lo + prob.spread());
  double ul = lo - step, ur = hi + step;
  for (int k = 0; !prob.zero_at(ul); ++k) {
    if (k > 2000) throw Error(ErrorCode::kNoConvergence, "left edge of the output support not found");
    ul -= step;
  }
  for (int k = 0; !prob.zero_at(ur); ++k) {
    if (k > 2000) throw Error(ErrorCode::kNoConvergence, "right edge of the output support not found");
    ur += step;
  }
  std::vector<AxisSample> out(m);
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (m + kChunk - 1) / kChunk;
  kernels::apply_thread_cap();
  // Exceptions may not leave a parallel region; the first one is rethrown.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    try {
      double v = 0.0;
      for (std::size_t i = c * kChunk; i < std::min(m, (c + 1) * kChunk); ++i) {
        const double u = ul + (ur - ul) * static_cast<double>(i) / static_cast<double>(m - 1);
        v = prob.solve(u, v);
        out[i] = prob.sample(u, v);
      }
    } catch (...) {
#pragma omp critical(entroflow_axis_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  out.front().cdf = 0.0;
  out.back().cdf = 1.0;
  return out;
}

double catmull(const std::vector<AxisSample>& s, std::size_t k, double f, double AxisSample::*field) {
  const std::size_t n = s.size();
  const double p1 = s[k].*field, p2 = s[k + 1].*field;
  const double p0 = k > 0 ? s[k - 1].*field : 2.0 * p1 - p2;
  const double p3 = k + 2 < n ? s[k + 2].*field : 2.0 * p2 - p1;
  const double f2 = f * f, f3 = f2 * f;
  return 0.5 * (2.0 * p1 + (p2 - p0) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * f3);
}

// CDF of the sampled law at x: both x(u) and cdf(u) are smooth in u, so the
// parameter of x is located on a cubic interpolant and the CDF read there.
double cdf_at(const std::vector<AxisSample>& s, double x) {
  if (x <= s.front().x) return 0.0;
  if (x >= s.back().x) return 1.0;
  const auto it = std::upper_bound(s.begin(), s.end(), x, [](double v, const AxisSample& a) { return v < a.x; });
  const std::size_t k = static_cast<std::size_t>(it - s.begin()) - 1;
  double a = 0.0, b = 1.0;
  for (int it2 = 0; it2 < 60; ++it2) {
    const double mid = 0.5 * (a + b);
    if (catmull(s, k, mid, &AxisSample::x) < x) a = mid; else b = mid;
  }
  const double c = catmull(s, k, 0.5 * (a + b), &AxisSample::cdf);
  return std::clamp(c, std::min(s[k].cdf, s[k + 1].cdf), std::max(s[k].cdf, s[k + 1].cdf));
}

// Cell averages on `grid` of the law of X / scale, from a CDF in x.
template <class Cdf>
GridDensity cells_from_cdf(const Grid& grid, double scale, Cdf&& cdf) {
  std::vector<double> c(grid.count + 1);
  for (std::size_t b = 0; b <= grid.count; ++b) c[b] = cdf(scale * (grid.x0 + grid.dx * (static_cast<double>(b) - 0.5)));
  if (c.front() > kTruncationTol || 1.0 - c.back() > kTruncationTol)
    throw Error(ErrorCode::kGridTooNarrow, "free convolution output leaves the grid");
  std::vector<double> p(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) p[i] = std::max(0.0, (c[i + 1] - c[i]) / grid.dx);
  return GridDensity(grid, std::move(p));
}

std::size_t sample_count(const Grid& grid, double width) {
  // About two samples per output cell across the support, within bounds.
  const auto cells = static_cast<std::size_t>(width / grid.dx);
  return std::clamp<std::size_t>(2 * cells + 1, 1025, 8193);
}

GridDensity dilate_law(const Law& law, double a, const Grid& grid) {
  if (std::holds_alternative<AtomicLaw>(law)) throw Error(ErrorCode::kAtomicNotRealizable, "atomic law has no density");
  return push_forward(std::get<GridDensity>(law), AffineMap{0.0, 1.0 / a}, grid);
}

}  // namespace

GridDensity semicircular_flow(const Law& law, double t, const Grid& grid) {
  if (!(t >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "flow time must be nonnegative");
  if (t == 0.0) {
    if (const auto* d = std::get_if<GridDensity>(&law); d && d->grid() == grid) return *d;
    return dilate_law(law, 1.0, grid);
  }
  const CauchyEvaluator g(law);
  const AxisProblem prob(g, t, 0);
  const double lo = g.support_lo(), hi = g.support_hi();
  const auto s = scan_axis(prob, lo, hi, sample_count(grid, hi - lo + 4.0 * std::sqrt(t)));
  return cells_from_cdf(grid, 1.0, [&](double x) { return cdf_at(s, x); });
}

GridDensity free_power(const Law& law, int n, const Grid& grid) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "free power needs n >= 1");
  if (n == 1) {
    if (const auto* d = std::get_if<GridDensity>(&law); d && d->grid() == grid) return *d;
    return dilate_law(law, 1.0, grid);
  }
  const CauchyEvaluator g(law);
  const AxisProblem prob(g, 0.0, n);
  const double lo = g.support_lo(), hi = g.support_hi();
  const double width = (n * (hi - lo) + 4.0 * std::sqrt(n * g.variance())) / std::sqrt(static_cast<double>(n));
  const auto s = scan_axis(prob, lo, hi, sample_count(grid, width));
  return cells_from_cdf(grid, std::sqrt(static_cast<double>(n)), [&](double x) { return cdf_at(s, x); });
}

double flow_free_fisher(const CauchyEvaluator& g, double t, std::size_t samples) {
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "flow time must be positive");
  const AxisProblem prob(g, t, 0);
  const auto s = scan_axis(prob, g.support_lo(), g.support_hi(), samples);
  // (4 pi^2 / 3) integral of p^3 dx along the parametrized support.
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < s.size(); ++k)
    acc += 0.5 * (s[k].p * s[k].p * s[k].p + s[k + 1].p * s[k + 1].p * s[k + 1].p) * (s[k + 1].x - s[k].x);
  return 4.0 * kPi * kPi / 3.0 * acc;
}

// ---------------------------------------------------------------------------
// Weighted free sums of k >= 2 laws: subordination functions omega_j with
// F(z) = F_j(omega_j) and omega_j = z + sum_{i != j} (F_i(omega_i) - omega_i),
// solved by Newton at z = x + i eps, marched along the output boundaries.

namespace {

class SubordinationSystem {
 public:
  explicit SubordinationSystem(std::vector<CauchyEvaluator> ev) : ev_(std::move(ev)), k_(ev_.size()) {}

  std::size_t size() const { return k_; }

  struct Terms {
    std::vector<cplx> h, dh;
    std::vector<CauchyValue> e;
  };

  Terms terms(const std::vector<cplx>& w, bool with_log = false) const {
    Terms t{std::vector<cplx>(k_), std::vector<cplx>(k_), std::vector<CauchyValue>(k_)};
    for (std::size_t j = 0; j < k_; ++j) {
      t.e[j] = ev_[j].eval(w[j], with_log);
      const cplx f = 1.0 / t.e[j].g;
      t.h[j] = f - w[j];
      t.dh[j] = -t.e[j].dg * f * f - 1.0;
    }
    return t;
  }

  double residual(cplx z, const std::vector<cplx>& w, const Terms& t, std::vector<cplx>* r) const {
    cplx sum = 0.0;
    for (const cplx& v : t.h) sum += v;
    double worst = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
      const cplx rj = w[j] - z - (sum - t.h[j]);
      if (r) (*r)[j] = rj;
      worst = std::max(worst, std::abs(rj));
    }
    return worst;
  }

  bool newton(cplx z, std::vector<cplx>& w) const {
    // Rounding in the residual grows with the size of the subordination values.
    auto tolerance = [&] {
      double scale = 1.0 + std::abs(z);
      for (const cplx& v : w) scale = std::max(scale, std::abs(v));
      return 1e-12 * scale;
    };
    double tol = tolerance();
    std::vector<cplx> r(k_);
    Terms t = terms(w);
    double res = residual(z, w, t, &r);
    for (int it = 0; it < 60; ++it) {
      tol = tolerance();
      if (res < tol) return attracting(t);
      Eigen::MatrixXcd J(k_, k_);
      Eigen::VectorXcd rhs(k_);
      for (std::size_t j = 0; j < k_; ++j) {
        rhs(j) = -r[j];
        for (std::size_t l = 0; l < k_; ++l) J(j, l) = j == l ? cplx(1.0) : -t.dh[l];
      }
      const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(J);
      const Eigen::VectorXcd step = lu.solve(rhs);
      if (!step.allFinite()) return false;
      const double step_norm = step.norm();
      bool accepted = false;
      for (double lambda = 1.0; lambda > 1e-4; lambda *= 0.5) {
        std::vector<cplx> trial(k_);
        bool ok = true;
        for (std::size_t j = 0; j < k_; ++j) {
          trial[j] = w[j] + lambda * step(j);
          if (!(trial[j].imag() >= 0.5 * z.imag())) ok = false;
        }
        if (!ok) continue;
        Terms tt = terms(trial);
        std::vector<cplx> rr(k_);
        const double nres = residual(z, trial, tt, &rr);
        // Natural monotonicity test: the residual norm is a poor merit
        // function near the axis, the simplified Newton correction is not.
        Eigen::VectorXcd rv(k_);
        for (std::size_t j = 0; j < k_; ++j) rv(j) = -rr[j];
        const double simplified = lu.solve(rv).norm();
        if (std::isfinite(nres) && (nres < tol || simplified < (1.0 - 0.25 * lambda) * step_norm)) {
          w = std::move(trial);
          t = std::move(tt);
          r = std::move(rr);
          res = nres;
          accepted = true;
          break;
        }
      }
      if (!accepted) return false;
    }
    return res < tol && attracting(t);
  }

  // Solution at z = x + i eps reached from far above by continuation.
  bool descend(double x, double eps, double height, std::vector<cplx>& w) const {
    cplx z(x, height);
    w.assign(k_, z);
    for (int it = 0; it < 2000; ++it) {
      const Terms t = terms(w);
      cplx sum = 0.0;
      for (const cplx& v : t.h) sum += v;
      double change = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        const cplx next = 0.5 * w[j] + 0.5 * (z + sum - t.h[j]);
        change = std::max(change, std::abs(next - w[j]));
        w[j] = next;
      }
      if (change < 1e-13 * std::abs(z)) break;
    }
    if (!newton(z, w)) return false;
    double eta = height, ratio = 0.25;
    while (eta > eps) {
      const double next = std::max(eps, eta * ratio);
      std::vector<cplx> trial = w;
      if (newton(cplx(x, next), trial)) {
        w = std::move(trial);
        eta = next;
        ratio = std::max(ratio * ratio, 1e-3);
      } else {
        ratio = std::sqrt(ratio);
        if (ratio > 0.98) return false;
      }
    }
    return true;
  }

  double cdf(cplx z, const std::vector<cplx>& w) const {
    const Terms t = terms(w, true);
    cplx lp = 0.0;
    for (const auto& e : t.e) lp += e.log_potential;
    const cplx g = t.e[0].g;
    double arg = std::atan2(g.imag(), g.real());
    if (arg > 0.0) arg = arg > 0.5 * kPi ? arg - 2.0 * kPi : 0.0;
    (void)z;
    return std::clamp(1.0 - (lp.imag() + (static_cast<double>(k_) - 1.0) * arg) / kPi, 0.0, 1.0);
  }

 private:
  // The physical solution is the attracting fixed point of the iteration map;
  // spurious real-axis branches are repelling.
  bool attracting(const Terms& t) const {
    Eigen::MatrixXcd K(k_, k_);
    for (std::size_t j = 0; j < k_; ++j)
      for (std::size_t l = 0; l < k_; ++l) K(j, l) = j == l ? cplx(0.0) : t.dh[l];
    const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(K, false);
    return es.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-3;
  }

  std::vector<CauchyEvaluator> ev_;
  std::size_t k_;
};

}  // namespace

GridDensity free_weighted_sum(const std::vector<Law>& laws, const std::vector<double>& a, const Grid& grid) {
  if (laws.size() != a.size() || laws.empty()) throw Error(ErrorCode::kInvalidArgument, "one weight per law required");
  std::vector<CauchyEvaluator> ev;
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < laws.size(); ++j) {
    if (a[j] < 0.0) throw Error(ErrorCode::kInvalidArgument, "weights must be nonnegative");
    if (a[j] == 0.0) continue;
    ev.push_back(CauchyEvaluator(laws[j]).dilated(a[j]));
    used.push_back(j);
  }
  if (ev.empty()) throw Error(ErrorCode::kInvalidArgument, "all weights vanish");
  if (ev.size() == 1) return dilate_law(laws[used[0]], a[used[0]], grid);

  double lo = 0.0, hi = 0.0, var = 0.0;
  for (const auto& e : ev) {
    lo += e.support_lo();
    hi += e.support_hi();
    var += e.variance();
  }
  const SubordinationSystem sys(std::move(ev));
  const double eps = 1e-10 * (hi - lo);
  const double height = 4.0 * std::sqrt(var) + (hi - lo);

  std::vector<double> edges(grid.count + 1);
  for (std::size_t b = 0; b <= grid.count; ++b) edges[b] = grid.x0 + grid.dx * (static_cast<double>(b) - 0.5);
  std::vector<double> c(grid.count + 1);
  std::vector<std::size_t> inner;
  for (std::size_t b = 0; b <= grid.count; ++b) {
    if (edges[b] <= lo) c[b] = 0.0;
    else if (edges[b] >= hi) c[b] = 1.0;
    else inner.push_back(b);
  }
  constexpr std::size_t kChunk = 48;
  const std::size_t chunks = (inner.size() + kChunk - 1) / kChunk;
  kernels::apply_thread_cap();
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t ch = 0; ch < chunks; ++ch) {
    std::vector<cplx> w, prev, prev2;
    for (std::size_t i = ch * kChunk; i < std::min(inner.size(), (ch + 1) * kChunk); ++i) {
      const double x = edges[inner[i]];
      const cplx z(x, eps);
      bool ok = false;
      if (!prev.empty()) {
        w = prev;
        if (!prev2.empty())
          for (std::size_t j = 0; j < w.size(); ++j) {
            const cplx guess = 2.0 * prev[j] - prev2[j];
            if (guess.imag() > eps) w[j] = guess;
          }
        ok = sys.newton(z, w);
      }
      if (!ok) ok = sys.descend(x, eps, height, w);
      if (!ok) {
#pragma omp atomic write
        failed = true;
        break;
      }
      c[inner[i]] = sys.cdf(z, w);
      prev2 = std::move(prev);
      prev = w;
    }
  }
  if (failed) throw Error(ErrorCode::kNoConvergence, "subordination system did not converge");
  if (c.front() > kTruncationTol || 1.0 - c.back() > kTruncationTol)
    throw Error(ErrorCode::kGridTooNarrow, "weighted free sum leaves the grid");
  std::vector<double> p(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) p[i] = std::max(0.0, (c[i + 1] - c[i]) / grid.dx);
  return GridDensity(grid, std::move(p));
}

// ---------------------------------------------------------------------------

double log_energy(const GridDensity& d) {
  const auto [lo, hi] = d.support_range();
  const std::size_t n = hi - lo;
  const double h = d.grid().dx;
  std::vector<double> p(d.values().begin() + static_cast<std::ptrdiff_t>(lo),
                        d.values().begin() + static_cast<std::ptrdiff_t>(hi));
  double mass = 0.0;
  for (double v : p) mass += v * h;
  for (double& v : p) v *= h / mass;
  // Histogram reading: cell pairs at offset k contribute log h + W_k exactly.
  const auto W = kernels::log_cell_weights(n);
  return std::log(h) + kernels::toeplitz_form(W, p, kernels::Exec::kFft);
}

double free_entropy(const GridDensity& d) { return log_energy(d) + 0.75 + 0.5 * std::log(2.0 * kPi); }
double free_entropy(const AtomicLaw&) { return -kInf; }
double free_entropy(const Law& law) {
  return std::visit([](const auto& l) { return free_entropy(l); }, law);
}

ConjugateVariable conjugate(const GridDensity& d) {
  const auto [lo, hi] = d.support_range();
  if (hi - lo < 3) throw Error(ErrorCode::kSupportTooThin, "support narrower than three cells");
  const double h = d.grid().dx;
  // Window [lo-1, hi]: every kink of the interpolant and every evaluation node.
  const std::size_t n = hi - lo + 2;
  auto p = [&](std::ptrdiff_t i) {
    return i < static_cast<std::ptrdiff_t>(lo) || i >= static_cast<std::ptrdiff_t>(hi) ? 0.0
                                                                                       : d[static_cast<std::size_t>(i)];
  };
  std::vector<double> ds(n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto k = static_cast<std::ptrdiff_t>(lo + m) - 1;
    ds[m] = (p(k + 1) - 2.0 * p(k) + p(k - 1)) / h;
  }
  // Re G(x_i + i0) = sum_k ds_k (x_i - x_k) log|x_i - x_k|, a Toeplitz product.
  std::vector<double> kernel(2 * n - 1);
  for (std::size_t m = 0; m < kernel.size(); ++m) {
    const double off = (static_cast<double>(m) - static_cast<double>(n - 1)) * h;
    kernel[m] = off == 0.0 ? 0.0 : off * std::log(std::abs(off));
  }
  const auto re_g = kernels::toeplitz_general(kernel, ds, kernels::Exec::kFft);

  ConjugateVariable J{d.grid(), std::vector<double>(d.size(), 0.0), std::vector<std::uint8_t>(d.size(), 0)};
  const double floor = 1e-10 * d.max_value();
  for (std::size_t i = lo; i < hi; ++i) {
    if (d[i] <= floor) continue;
    J.values[i] = 2.0 * re_g[i - lo + 1];
    J.mask[i] = 1;
  }
  return J;
}

FreeFisher free_fisher(const GridDensity& d) {
  const ConjugateVariable J = conjugate(d);
  const double h = d.grid().dx;
  double primary = 0.0, cubic = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    mass += d[i] * h;
    cubic += d[i] * d[i] * d[i] * h;
    if (J.mask[i]) primary += J.values[i] * J.values[i] * d[i] * h;
  }
  return {primary / mass, 4.0 * kPi * kPi / 3.0 * cubic / (mass * mass * mass)};
}

namespace {

template <int N>
void append_gauss(double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
  const auto& x = boost::math::quadrature::gauss<double, N>::abscissa();
  const auto& w = boost::math::quadrature::gauss<double, N>::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (double sign : {-1.0, 1.0}) {
      if (x[k] == 0.0 && sign < 0.0) continue;
      nodes.push_back(mid + sign * half * x[k]);
      weights.push_back(half * w[k]);
    }
  }
}

void append_rule(int order, double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
  switch (order) {
    case 4: return append_gauss<4>(a, b, nodes, weights);
    case 6: return append_gauss<6>(a, b, nodes, weights);
    case 8: return append_gauss<8>(a, b, nodes, weights);
    case 10: return append_gauss<10>(a, b, nodes, weights);
    default: throw Error(ErrorCode::kInvalidArgument, "quadrature order must be 4, 6, 8 or 10");
  }
}

}  // namespace

double free_entropy_via_flow(const Law& law, const FreeFlowQuadrature& q) {
  if (!(q.t_max > q.t_min) || q.t_min < 0.0) throw Error(ErrorCode::kInvalidArgument, "need 0 <= t_min < t_max");
  if (q.samples < 16) throw Error(ErrorCode::kInvalidArgument, "need at least 16 axis samples");
  if (std::holds_alternative<AtomicLaw>(law) && q.t_min == 0.0) return -kInf;
  const CauchyEvaluator g(law);
  const double var = g.variance();
  const auto m = static_cast<std::size_t>(q.samples) + 1;
  static constexpr double kBreaks[] = {0.0, 1e-3, 3e-3, 1e-2, 3e-2, 0.06, 0.1, 0.16, 0.25, 0.35, 0.5, 0.7, 1.0};
  const double s0 = std::sqrt(q.t_min), s1 = std::sqrt(q.t_max);
  std::vector<double> nodes, weights;
  for (std::size_t p = 0; p + 1 < std::size(kBreaks); ++p)
    append_rule(q.order, s0 + (s1 - s0) * kBreaks[p], s0 + (s1 - s0) * kBreaks[p + 1], nodes, weights);
  double integral = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double t = nodes[k] * nodes[k];
    integral += weights[k] * (1.0 / (var + t) - flow_free_fisher(g, t, m)) * 2.0 * nodes[k];
  }
  // The gap decays like t^-4; beyond t_max it is below double precision.
  const double gap_at_end = 1.0 / (var + q.t_max) - flow_free_fisher(g, q.t_max, m);
  if (std::abs(gap_at_end) > 1e-3) throw Error(ErrorCode::kTailTooFat, "free Fisher gap at t_max exceeds 1e-3");
  return 0.5 * integral + 0.5 * std::log(2.0 * kPi * std::numbers::e * (var + q.t_min));
}

// ---------------------------------------------------------------------------

namespace {

class LawSampler {
 public:
  explicit LawSampler(const Law& law) {
    if (const auto* a = std::get_if<AtomicLaw>(&law)) {
      double acc = 0.0;
      for (const Atom& at : a->atoms()) {
        acc += at.weight;
        pos_.push_back(at.position);
        cum_.push_back(acc);
      }
      atomic_ = true;
    } else {
      const auto& d = std::get<GridDensity>(law);
      cum_ = d.cell_cdf();
      for (std::size_t i = 0; i < d.size(); ++i) pos_.push_back(d.x(i));
      dx_ = d.grid().dx;
    }
  }

  double operator()(std::mt19937_64& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, cum_.back())(rng);
    const auto k = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
    const std::size_t i = std::min(k, cum_.size() - 1);
    if (atomic_) return pos_[i];
    // Uniform within the cell: inverse of the histogram CDF.
    const double below = i > 0 ? cum_[i - 1] : 0.0;
    const double frac = cum_[i] > below ? (u - below) / (cum_[i] - below) : 0.5;
    return pos_[i] - 0.5 * dx_ + frac * dx_;
  }

 private:
  std::vector<double> pos_, cum_;
  double dx_ = 0.0;
  bool atomic_ = false;
};

// Haar orthogonal matrix (column-major) from the QR factorization of a
// Gaussian matrix with the signs of diag(R) absorbed.
std::vector<double> haar_orthogonal(std::size_t N, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> a(N * N);
  for (double& v : a) v = normal(rng);
  const auto n = static_cast<lapack_int>(N);
  std::vector<double> tau(N);
  if (LAPACKE_dgeqrf(LAPACK_COL_MAJOR, n, n, a.data(), n, tau.data()) != 0)
    throw Error(ErrorCode::kNoConvergence, "QR factorization failed");
  std::vector<double> sign(N);
  for (std::size_t i = 0; i < N; ++i) sign[i] = a[i * N + i] < 0.0 ? -1.0 : 1.0;
  if (LAPACKE_dorgqr(LAPACK_COL_MAJOR, n, n, n, a.data(), n, tau.data()) != 0)
    throw Error(ErrorCode::kNoConvergence, "forming Q failed");
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 0; i < N; ++i) a[j * N + i] *= sign[j];
  return a;
}

}  // namespace

EmpiricalSpectrum rm_oracle(const Law& law, int n, std::size_t N, std::size_t trials, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be at least 1");
  if (N < 500) throw Error(ErrorCode::kInvalidArgument, "matrix size must be at least 500");
  const LawSampler sample(law);
  EmpiricalSpectrum out;
  out.matrix_size = N;
  out.trials = trials;
  out.eigenvalues.reserve(N * trials);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    std::mt19937_64 rng(seq);
    std::vector<double> m(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i) m[i * N + i] = sample(rng);
    std::vector<double> b(N * N);
    for (int r = 1; r < n; ++r) {
      const auto q = haar_orthogonal(N, rng);
      for (std::size_t j = 0; j < N; ++j) {
        const double a = sample(rng);
        for (std::size_t i = 0; i < N; ++i) b[j * N + i] = q[j * N + i] * a;
      }
      const auto ni = static_cast<int>(N);
      cblas_dgemm(CblasColMajor, CblasNoTrans, CblasTrans, ni, ni, ni, 1.0, b.data(), ni, q.data(), ni, 1.0, m.data(), ni);
    }
    std::vector<double> eig(N);
    const auto nn = static_cast<lapack_int>(N);
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', nn, m.data(), nn, eig.data()) != 0)
      throw Error(ErrorCode::kNoConvergence, "eigenvalue solver failed");
    for (double e : eig) out.eigenvalues.push_back(e * norm);
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

SemicircularityVerdict semicircularity_test(const GridDensity& d, double tol) {
  const ConjugateVariable J = conjugate(d);
  const auto c = d.cell_cdf();
  double sup = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double below = i > 0 ? c[i - 1] : 0.0;
    if (!J.mask[i] || below < 0.05 || c[i] > 0.95) continue;
    sup = std::max(sup, std::abs(J.values[i] - d.x(i)));
  }
  const LawSpec unit = LawSpec::semicircle(0.0, 1.0);
  const double ks = ks_distance(d, [&](double t) { return spec_cdf(unit, t); });
  return {sup < tol && ks < 5.0 * tol, sup, ks};
}

}  // namespace entroflow::freeprob

#include "entroflow/extremal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "entroflow/error.hpp"
#include "entroflow/kernels.hpp"

namespace entroflow::extremal {
namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Positive floor for the multiplicative geometries: a node at exactly zero
// could never gain mass.
constexpr double kFloor = 1e-250;
constexpr double kStopChange = 1e-12;
constexpr double kStallChange = 1e-8;
constexpr int kStallWindow = 5;

Vec3 basis(double x) { return {1.0, x, x * x}; }

Vec3 targets(const ConstrainedDensityProblem& pb) { return {1.0, 0.0, pb.variance}; }

Vec3 moments(const Grid& g, const std::vector<double>& p) {
  Vec3 m = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) m += p[i] * basis(g.x(i));
  return m * g.dx;
}

double drift(const ConstrainedDensityProblem& pb, const std::vector<double>& p) {
  return (moments(pb.grid, p) - targets(pb)).cwiseAbs().maxCoeff();
}

bool multiplicative(Objective o) { return o != Objective::kLogEnergy; }

// p_i = exp(l_i + lambda . b_i) with lambda minimizing the convex dual
// sum exp(l + lambda . b) dx - lambda . c; its stationarity is the constraint.
std::vector<double> tilt(const Grid& g, const std::vector<double>& l, const Vec3& c) {
  const std::size_t n = l.size();
  const double h = g.dx;
  auto evaluate = [&](const Vec3& lam, Vec3* grad, Mat3* hess) {
    double phi = -lam.dot(c);
    if (grad) *grad = -c;
    if (hess) hess->setZero();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 b = basis(g.x(i));
      const double e = std::exp(l[i] + lam.dot(b)) * h;
      phi += e;
      if (grad) *grad += e * b;
      if (hess) *hess += e * b * b.transpose();
    }
    return phi;
  };
  Vec3 lam = Vec3::Zero();
  Vec3 grad;
  Mat3 hess;
  double phi = evaluate(lam, &grad, &hess);
  for (int it = 0; it < 100; ++it) {
    if (grad.cwiseAbs().maxCoeff() < 1e-14) break;
    const Vec3 step = hess.ldlt().solve(-grad);
    // Near the solution the dual decrease drops below rounding; a full Newton
    // step that shrinks the gradient is then taken on that basis alone.
    {
      Vec3 g_full;
      const Vec3 full = lam + step;
      evaluate(full, &g_full, nullptr);
      if (g_full.allFinite() && g_full.norm() < 0.5 * grad.norm() && grad.norm() < 1e-6) {
        lam = full;
        phi = evaluate(lam, &grad, &hess);
        continue;
      }
    }
    double s = 1.0;
    Vec3 trial;
    double phi_t = 0.0;
    for (int k = 0; k < 60; ++k, s *= 0.5) {
      trial = lam + s * step;
      phi_t = evaluate(trial, nullptr, nullptr);
      if (std::isfinite(phi_t) && phi_t <= phi + 1e-4 * s * grad.dot(step)) break;
    }
    if (!(phi_t <= phi)) break;
    lam = trial;
    phi = evaluate(lam, &grad, &hess);
  }
  if (grad.cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorCode::kNoConvergence, "exponential tilt did not meet the moment constraints");
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(std::exp(l[i] + lam.dot(basis(g.x(i)))), kFloor);
  return p;
}

// L2(dx) projection of y onto {p >= 0, moments = c}: p = max(0, y + mu . b),
// with mu maximizing the concave dual.
std::vector<double> project(const Grid& g, const std::vector<double>& y, const Vec3& c) {
  const std::size_t n = y.size();
  const double h = g.dx;
  auto evaluate = [&](const Vec3& mu, Vec3* grad, Mat3* hess) {
    double d = mu.dot(c);
    if (grad) *grad = c;
    if (hess) hess->setZero();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 b = basis(g.x(i));
      const double v = y[i] + mu.dot(b);
      if (v <= 0.0) continue;
      d -= 0.5 * v * v * h;
      if (grad) *grad -= v * h * b;
      if (hess) *hess -= h * b * b.transpose();
    }
    return d;
  };
  Vec3 mu = Vec3::Zero();
  Vec3 grad;
  Mat3 hess;
  double d = evaluate(mu, &grad, &hess);
  for (int it = 0; it < 200; ++it) {
    if (grad.cwiseAbs().maxCoeff() < 1e-14) break;
    // Regularized Newton: the active set may be too small for a full-rank
    // Hessian far from the solution.
    const Mat3 reg = -hess + 1e-12 * Mat3::Identity();
    const Vec3 step = reg.ldlt().solve(grad);
    {
      Vec3 g_full;
      const Vec3 full = mu + step;
      evaluate(full, &g_full, nullptr);
      if (g_full.norm() < 0.5 * grad.norm() && grad.norm() < 1e-6) {
        mu = full;
        d = evaluate(mu, &grad, &hess);
        continue;
      }
    }
    double s = 1.0;
    Vec3 trial;
    double d_t = 0.0;
    for (int k = 0; k < 60; ++k, s *= 0.5) {
      trial = mu + s * step;
      d_t = evaluate(trial, nullptr, nullptr);
      if (d_t >= d + 1e-4 * s * grad.dot(step)) break;
    }
    if (!(d_t >= d)) break;
    mu = trial;
    d = evaluate(mu, &grad, &hess);
  }
  if (grad.cwiseAbs().maxCoeff() > 1e-12)
    throw Error(ErrorCode::kNoConvergence, "moment projection did not converge");
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(0.0, y[i] + mu.dot(basis(g.x(i))));
  return p;
}

std::vector<double> restore(const ConstrainedDensityProblem& pb, const std::vector<double>& p) {
  if (multiplicative(pb.objective)) {
    std::vector<double> l(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) l[i] = std::log(std::max(p[i], kFloor));
    return tilt(pb.grid, l, targets(pb));
  }
  return project(pb.grid, p, targets(pb));
}

// Least-squares fit of g by span{1, x, x^2} in L2(p dx) over nodes above floor.
Vec3 fit_multipliers(const Grid& grid, const std::vector<double>& p, const std::vector<double>& g, double floor) {
  Mat3 A = Mat3::Zero();
  Vec3 r = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= floor) continue;
    const Vec3 b = basis(grid.x(i));
    A += p[i] * b * b.transpose();
    r += p[i] * g[i] * b;
  }
  return A.ldlt().solve(r);
}

std::vector<double> step(const ConstrainedDensityProblem& pb, const std::vector<double>& p,
                         const std::vector<double>& g, double eta) {
  const std::size_t n = p.size();
  if (pb.objective == Objective::kNegFisher) {
    // Backward Euler on q = sqrt(p) for the Lagrangian
    // -4 int q'^2 - int U q^2, U the current multiplier fit:
    // (I + eta (8 K / dx^2 + 2 U)) q_new = q, K = tridiag(-1, 2, -1).
    // Including U makes the constrained optimum an exact fixed point, so the
    // tilt that follows vanishes there. Thomas algorithm.
    const double h = pb.grid.dx;
    const Vec3 mu = fit_multipliers(pb.grid, p, g, 0.0);
    const double off = -8.0 * eta / (h * h);
    std::vector<double> c(n), q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = std::sqrt(p[i]);
    double prev_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diag = 1.0 - 2.0 * off + 2.0 * eta * mu.dot(basis(pb.grid.x(i)));
      const double m = diag - (i ? off * prev_c : 0.0);
      if (!(m > 0.0)) return {};
      c[i] = off / m;
      q[i] = (q[i] - (i ? off * q[i - 1] : 0.0)) / m;
      prev_c = c[i];
    }
    for (std::size_t i = n - 1; i-- > 0;) q[i] -= c[i] * q[i + 1];
    std::vector<double> l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = std::log(std::max(q[i] * q[i], kFloor));
    return tilt(pb.grid, l, targets(pb));
  }
  if (multiplicative(pb.objective)) {
    std::vector<double> l(n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = std::log(p[i]) + eta * g[i];
      top = std::max(top, l[i]);
    }
    for (double& v : l) v -= top;
    return tilt(pb.grid, l, targets(pb));
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = p[i] + eta * g[i];
  return project(pb.grid, y, targets(pb));
}

// Residual of g against span{1, x, x^2} in L2(p dx); off the support only the
// positive part counts, since moving mass there is the only admissible change.
double stationarity(const ConstrainedDensityProblem& pb, const std::vector<double>& p,
                    const std::vector<double>& g) {
  const Grid& grid = pb.grid;
  const double floor = multiplicative(pb.objective) ? 1e3 * kFloor : 0.0;
  const Vec3 mu = fit_multipliers(grid, p, g, floor);
  double on = 0.0, off = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double res = g[i] - mu.dot(basis(grid.x(i)));
    if (p[i] > floor) {
      on += p[i] * res * res;
    } else if (!multiplicative(pb.objective) && res > 0.0) {
      off += res * res;
    }
  }
  return std::sqrt((on + off) * grid.dx);
}

void check_problem(const ConstrainedDensityProblem& pb) {
  if (!(pb.variance > 0.0) || !std::isfinite(pb.variance))
    throw Error(ErrorCode::kInvalidArgument, "variance must be positive");
  if (pb.grid.count < 16) throw Error(ErrorCode::kInvalidArgument, "grid too small");
}

}  // namespace

double objective(const ConstrainedDensityProblem& pb, const std::vector<double>& p) {
  const double h = pb.grid.dx;
  switch (pb.objective) {
    case Objective::kEntropy: {
      double s = 0.0;
      for (double v : p)
        if (v > 0.0) s -= v * std::log(v);
      return s * h;
    }
    case Objective::kNegFisher: {
      double s = 0.0, prev = 0.0;
      for (double v : p) {
        const double q = std::sqrt(v);
        s += (q - prev) * (q - prev);
        prev = q;
      }
      s += prev * prev;
      return -4.0 * s / h;
    }
    case Objective::kLogEnergy: {
      double mass = 0.0;
      std::vector<double> m(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = p[i] * h;
        mass += m[i];
      }
      const auto W = kernels::log_cell_weights(p.size());
      return std::log(h) * mass * mass + kernels::toeplitz_form(W, m, kernels::Exec::kFft);
    }
  }
  return 0.0;
}

std::vector<double> gradient(const ConstrainedDensityProblem& pb, const std::vector<double>& p) {
  const std::size_t n = p.size();
  const double h = pb.grid.dx;
  std::vector<double> g(n);
  switch (pb.objective) {
    case Objective::kEntropy:
      for (std::size_t i = 0; i < n; ++i) g[i] = -std::log(std::max(p[i], kFloor)) - 1.0;
      break;
    case Objective::kNegFisher: {
      auto q = [&](std::ptrdiff_t i) {
        return i < 0 || i >= static_cast<std::ptrdiff_t>(n) ? 0.0 : std::sqrt(p[static_cast<std::size_t>(i)]);
      };
      for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::ptrdiff_t>(i);
        const double qi = std::max(q(k), std::sqrt(kFloor));
        g[i] = -4.0 / (h * h) * (2.0 - (q(k - 1) + q(k + 1)) / qi);
      }
      break;
    }
    case Objective::kLogEnergy: {
      double mass = 0.0;
      std::vector<double> m(n);
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = p[i] * h;
        mass += m[i];
      }
      const auto W = kernels::log_cell_weights(n);
      const auto Wm = kernels::toeplitz_symmetric(W, m, kernels::Exec::kFft);
      for (std::size_t i = 0; i < n; ++i) g[i] = 2.0 * mass * std::log(h) + 2.0 * Wm[i];
      break;
    }
  }
  return g;
}

double default_step_size(Objective objective) {
  switch (objective) {
    case Objective::kEntropy: return 0.5;
    case Objective::kNegFisher: return 0.1;
    case Objective::kLogEnergy: return 0.5;
  }
  return 0.1;
}

ExtremalResult maximize(const ConstrainedDensityProblem& pb, const GridDensity& init, int steps,
                        double step_size) {
  check_problem(pb);
  if (!(init.grid() == pb.grid)) throw Error(ErrorCode::kGridMismatch, "init lives on a different grid");
  if (steps < 1 || !(step_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "need steps >= 1 and step_size > 0");

  std::vector<double> p(init.values().begin(), init.values().end());
  p = restore(pb, p);
  ExtremalResult out;
  double J = objective(pb, p);
  out.trace.push_back(J);
  out.constraint_drift = drift(pb, p);

  double eta = step_size;
  int small_run = 0;
  bool converged = false;
  for (int k = 0; k < steps; ++k) {
    const auto g = gradient(pb, p);
    std::vector<double> trial;
    double J_t = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < 50; ++bt) {
      trial = step(pb, p, g, eta);
      J_t = trial.empty() ? -std::numeric_limits<double>::infinity() : objective(pb, trial);
      if (J_t >= J) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      // No ascent at any step length: stationary to working precision.
      converged = true;
      break;
    }
    const double change = (J_t - J) / std::max(1.0, std::abs(J));
    p = std::move(trial);
    J = J_t;
    out.trace.push_back(J);
    out.constraint_drift = std::max(out.constraint_drift, drift(pb, p));
    ++out.steps;
    eta *= 1.25;
    small_run = change < kStallChange ? small_run + 1 : 0;
    if (change < kStopChange && small_run >= kStallWindow) {
      converged = true;
      break;
    }
  }
  if (!converged && small_run < kStallWindow)
    throw Error(ErrorCode::kStalledBelowTolerance, "objective still moving by more than 1e-8 at the step budget");

  out.stationarity = stationarity(pb, p, gradient(pb, p));
  out.density = GridDensity(pb.grid, std::move(p));
  return out;
}

double gradient_check(const ConstrainedDensityProblem& pb, const GridDensity& at, int probes, std::uint64_t seed) {
  check_problem(pb);
  const std::vector<double> p(at.values().begin(), at.values().end());
  const auto g = gradient(pb, p);
  const double h = pb.grid.dx;
  const double width = pb.grid.back() - pb.grid.x0;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x3du};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    // Smooth relative perturbation p * r(x) with a few low modes.
    std::array<double, 4> c{}, ph{};
    for (int m = 0; m < 4; ++m) {
      c[m] = normal(rng);
      ph[m] = phase(rng);
    }
    std::vector<double> v(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double u = 2.0 * std::numbers::pi * (pb.grid.x(i) - pb.grid.x0) / width;
      double r = 0.0;
      for (int m = 0; m < 4; ++m) r += c[m] * std::cos((m + 1) * u + ph[m]);
      v[i] = p[i] * r;
    }
    double analytic = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) analytic += g[i] * v[i] * h;
    const double eps = 1e-6;
    std::vector<double> plus(p), minus(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      plus[i] += eps * v[i];
      minus[i] -= eps * v[i];
    }
    const double fd = (objective(pb, plus) - objective(pb, minus)) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
  }
  return worst;
}

}  // namespace entroflow::extremal

#include "entroflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace entroflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAtomicNotRealizable: return "AtomicNotRealizable";
    case ErrorCode::kGridTooNarrow: return "GridTooNarrow";
    case ErrorCode::kDegenerateLaw: return "DegenerateLaw";
    case ErrorCode::kIncompatibleSupports: return "IncompatibleSupports";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kSupportTooThin: return "SupportTooThin";
    case ErrorCode::kTailTooFat: return "TailTooFat";
    case ErrorCode::kHypothesisViolated: return "HypothesisViolated";
    case ErrorCode::kBelowAxis: return "BelowAxis";
    case ErrorCode::kMassLoss: return "MassLoss";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kDimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::kNotAnEqualityCase: return "NotAnEqualityCase";
    case ErrorCode::kStalledBelowTolerance: return "StalledBelowTolerance";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

namespace {

constexpr double kPi = std::numbers::pi;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// CDF of the semicircle law centred at 0 with radius R = 2 sqrt(variance).
double semicircle_cdf(double t, double radius) {
  const double u = std::clamp(t / radius, -1.0, 1.0);
  return 0.5 + (u * std::sqrt(1.0 - u * u) + std::asin(u)) / kPi;
}

double catmull_rom(std::span<const double> v, double e) {
  const auto n = static_cast<std::ptrdiff_t>(v.size());
  const double fl = std::floor(e);
  const auto i = static_cast<std::ptrdiff_t>(fl);
  const double f = e - fl;
  auto at = [&](std::ptrdiff_t k) { return (k < 0 || k >= n) ? 0.0 : v[static_cast<std::size_t>(k)]; };
  const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  return 0.5 * (2.0 * p1 + (p2 - p0) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f * f +
                (3.0 * p1 - p0 - 3.0 * p2 + p3) * f * f * f);
}

std::vector<double> clip_negative(std::vector<double> v) {
  for (double& x : v) x = std::max(x, 0.0);
  return v;
}

// Cell averages of a law given by its CDF, over the cells centred at the grid nodes.
std::vector<double> cell_averages(const Grid& grid, const std::function<double(double)>& cdf) {
  std::vector<double> out(grid.count);
  double left = cdf(grid.x0 - 0.5 * grid.dx);
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double right = cdf(grid.x(i) + 0.5 * grid.dx);
    out[i] = std::max(right - left, 0.0) / grid.dx;
    left = right;
  }
  return out;
}

double mass_outside(const Grid& grid, const std::function<double(double)>& cdf) {
  return cdf(grid.x0 - 0.5 * grid.dx) + (1.0 - cdf(grid.back() + 0.5 * grid.dx));
}

constexpr double kTruncationTol = 1e-6;

std::vector<double> realize_values(const LawSpec& spec, const Grid& grid) {
  return std::visit(
      [&](const auto& s) -> std::vector<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          const double sd = std::sqrt(s.variance);
          auto cdf = [&](double t) { return normal_cdf((t - s.mean) / sd); };
          if (mass_outside(grid, cdf) > kTruncationTol)
            throw Error(ErrorCode::kGridTooNarrow, "gaussian tails leave the grid");
          // Point samples: the trapezoid rule is spectrally accurate on smooth laws.
          std::vector<double> v(grid.count);
          for (std::size_t i = 0; i < grid.count; ++i) {
            const double z = (grid.x(i) - s.mean) / sd;
            v[i] = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
          }
          return v;
        } else if constexpr (std::is_same_v<T, SemicircleSpec>) {
          const double radius = 2.0 * std::sqrt(s.variance);
          if (mass_outside(grid, [&](double t) { return semicircle_cdf(t - s.mean, radius); }) >
              kTruncationTol)
            throw Error(ErrorCode::kGridTooNarrow, "semicircle support leaves the grid");
          // Cell averaging adds dx^2/12 to the quadrature variance; shrink first.
          const double shrunk = s.variance - grid.dx * grid.dx / 12.0;
          if (shrunk <= 0.0) throw Error(ErrorCode::kInvalidArgument, "semicircle narrower than grid step");
          const double r = 2.0 * std::sqrt(shrunk);
          return cell_averages(grid, [&](double t) { return semicircle_cdf(t - s.mean, r); });
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          const double c = 0.5 * (s.a + s.b);
          const double w = 0.5 * (s.b - s.a);
          if (mass_outside(grid, [&](double t) { return std::clamp((t - s.a) / (s.b - s.a), 0.0, 1.0); }) >
              kTruncationTol)
            throw Error(ErrorCode::kGridTooNarrow, "uniform support leaves the grid");
          const double w2 = w * w - 0.25 * grid.dx * grid.dx;
          if (w2 <= 0.0) throw Error(ErrorCode::kInvalidArgument, "uniform narrower than grid step");
          const double ws = std::sqrt(w2);
          return cell_averages(grid, [&](double t) { return std::clamp((t - c + ws) / (2.0 * ws), 0.0, 1.0); });
        } else if constexpr (std::is_same_v<T, GridSpec>) {
          const GridDensity& d = s.density;
          if (d.grid() == grid) return std::vector<double>(d.values().begin(), d.values().end());
          if (mass_outside(grid, [&](double t) { return d.cdf(t); }) > kTruncationTol)
            throw Error(ErrorCode::kGridTooNarrow, "grid law leaves the target grid");
          const GridDensity moved = push_forward(d, AffineMap{}, grid);
          return std::vector<double>(moved.values().begin(), moved.values().end());
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          throw Error(ErrorCode::kAtomicNotRealizable, "atoms have no density");
        } else {
          std::vector<double> v(grid.count, 0.0);
          for (const auto& c : s.components) {
            if (c.law.is_atomic())
              throw Error(ErrorCode::kAtomicNotRealizable, "atomic component inside a mixture");
            const GridDensity part = realize(c.law, grid);
            for (std::size_t i = 0; i < grid.count; ++i) v[i] += c.weight * part[i];
          }
          return v;
        }
      },
      spec.kind);
}

}  // namespace

Grid Grid::symmetric(double half_width, std::size_t count) {
  return Grid{-half_width, 2.0 * half_width / static_cast<double>(count), count};
}

AffineMap AffineMap::compose(const AffineMap& outer, const AffineMap& inner) {
  return AffineMap{inner.s + outer.s * inner.r, inner.r * outer.r};
}

double trapezoid(const Grid& grid, std::span<const double> f) {
  if (f.empty()) return 0.0;
  const double sum = std::accumulate(f.begin(), f.end(), 0.0);
  return grid.dx * (sum - 0.5 * (f.front() + f.back()));
}

GridDensity::GridDensity(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (grid_.count != values_.size())
    throw Error(ErrorCode::kInvalidArgument, "grid count does not match value count");
  if (!(grid_.dx > 0.0)) throw Error(ErrorCode::kInvalidArgument, "grid step must be positive");
  double vmax = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite density value");
    vmax = std::max(vmax, v);
  }
  for (double& v : values_) {
    if (v < 0.0) {
      if (v < -1e-10 * vmax) throw Error(ErrorCode::kInvalidArgument, "negative density value");
      v = 0.0;
    }
  }
  const double mass = trapezoid(grid_, values_);
  if (!(mass > 0.0)) throw Error(ErrorCode::kDegenerateLaw, "density has zero mass");
  for (double& v : values_) v /= mass;
}

double GridDensity::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

std::pair<std::size_t, std::size_t> GridDensity::support_range() const {
  std::size_t lo = 0, hi = values_.size();
  while (lo < hi && values_[lo] == 0.0) ++lo;
  while (hi > lo && values_[hi - 1] == 0.0) --hi;
  return {lo, hi};
}

std::vector<double> GridDensity::cell_cdf() const {
  std::vector<double> c(values_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    acc += values_[i] * grid_.dx;
    c[i] = acc;
  }
  for (double& v : c) v /= acc;
  return c;
}

double GridDensity::cdf(double t) const {
  const double e = (t - (grid_.x0 - 0.5 * grid_.dx)) / grid_.dx;
  if (e <= 0.0) return 0.0;
  const auto k = static_cast<std::size_t>(std::floor(e));
  if (k >= values_.size()) return 1.0;
  // Partial sums are recomputed on demand; callers needing many points use cell_cdf().
  double below = 0.0, total = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i < k) below += values_[i];
    total += values_[i];
  }
  return (below + (e - static_cast<double>(k)) * values_[k]) / total;
}

AtomicLaw::AtomicLaw(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty atomic law");
  std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.position < b.position; });
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (!(atoms_[i].weight > 0.0) || !std::isfinite(atoms_[i].position))
      throw Error(ErrorCode::kInvalidArgument, "atom weights must be positive");
    if (i > 0 && atoms_[i].position == atoms_[i - 1].position)
      throw Error(ErrorCode::kInvalidArgument, "repeated atom position");
    total += atoms_[i].weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::kInvalidArgument, "atom weights must sum to one");
}

double AtomicLaw::cdf(double t) const {
  double c = 0.0;
  for (const Atom& a : atoms_)
    if (a.position <= t) c += a.weight;
  return std::min(c, 1.0);
}

AtomicLaw AtomicLaw::symmetric_bernoulli() { return AtomicLaw({{-1.0, 0.5}, {1.0, 0.5}}); }

LawSpec LawSpec::gaussian(double mean, double variance) { return LawSpec{GaussianSpec{mean, variance}}; }
LawSpec LawSpec::semicircle(double mean, double variance) { return LawSpec{SemicircleSpec{mean, variance}}; }
LawSpec LawSpec::uniform(double a, double b) { return LawSpec{UniformSpec{a, b}}; }
LawSpec LawSpec::grid(GridDensity d) { return LawSpec{GridSpec{std::move(d)}}; }
LawSpec LawSpec::atoms(AtomicLaw law) { return LawSpec{AtomsSpec{std::move(law)}}; }
LawSpec LawSpec::mixture(std::vector<MixtureComponent> components) {
  return LawSpec{MixtureSpec{std::move(components)}};
}

void validate(const LawSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec> || std::is_same_v<T, SemicircleSpec>) {
          if (!(s.variance > 0.0) || !std::isfinite(s.mean))
            throw Error(ErrorCode::kInvalidArgument, "variance must be positive");
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          if (!(s.b > s.a)) throw Error(ErrorCode::kInvalidArgument, "uniform needs a < b");
        } else if constexpr (std::is_same_v<T, MixtureSpec>) {
          if (s.components.empty()) throw Error(ErrorCode::kInvalidArgument, "empty mixture");
          double total = 0.0;
          for (const auto& c : s.components) {
            if (!(c.weight > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mixture weights must be positive");
            total += c.weight;
            validate(c.law);
          }
          if (std::abs(total - 1.0) > 1e-12)
            throw Error(ErrorCode::kInvalidArgument, "mixture weights must sum to one");
        }
      },
      spec.kind);
}

GridDensity realize(const LawSpec& spec, const Grid& grid) {
  validate(spec);
  return GridDensity(grid, realize_values(spec, grid));
}

Law to_law(const LawSpec& spec, const Grid& grid) {
  if (const auto* a = std::get_if<AtomsSpec>(&spec.kind)) return a->law;
  return realize(spec, grid);
}

double moment(const GridDensity& d, int k) {
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "moment order must be nonnegative");
  std::vector<double> f(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double xk = 1.0;
    for (int j = 0; j < k; ++j) xk *= d.x(i);
    f[i] = xk * d[i];
  }
  return trapezoid(d.grid(), f);
}

double moment(const AtomicLaw& law, int k) {
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "moment order must be nonnegative");
  double m = 0.0;
  for (const Atom& a : law.atoms()) m += a.weight * std::pow(a.position, k);
  return m;
}

double moment(const Law& law, int k) {
  return std::visit([k](const auto& l) { return moment(l, k); }, law);
}

double mean(const Law& law) { return moment(law, 1); }

double variance(const Law& law) {
  const double m = moment(law, 1);
  // Centred second moment avoids cancellation for laws far from the origin.
  return std::visit(
      [m](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GridDensity>) {
          std::vector<double> f(l.size());
          for (std::size_t i = 0; i < l.size(); ++i) f[i] = (l.x(i) - m) * (l.x(i) - m) * l[i];
          return trapezoid(l.grid(), f);
        } else {
          double v = 0.0;
          for (const Atom& a : l.atoms()) v += a.weight * (a.position - m) * (a.position - m);
          return v;
        }
      },
      law);
}

double mean(const LawSpec& spec) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec> || std::is_same_v<T, SemicircleSpec>) {
          return s.mean;
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          return 0.5 * (s.a + s.b);
        } else if constexpr (std::is_same_v<T, GridSpec>) {
          return moment(s.density, 1);
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          return moment(s.law, 1);
        } else {
          double m = 0.0;
          for (const auto& c : s.components) m += c.weight * mean(c.law);
          return m;
        }
      },
      spec.kind);
}

double variance(const LawSpec& spec) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec> || std::is_same_v<T, SemicircleSpec>) {
          return s.variance;
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          return (s.b - s.a) * (s.b - s.a) / 12.0;
        } else if constexpr (std::is_same_v<T, GridSpec>) {
          return variance(Law{s.density});
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          return variance(Law{s.law});
        } else {
          double m = 0.0, second = 0.0;
          for (const auto& c : s.components) {
            const double mk = mean(c.law);
            m += c.weight * mk;
            second += c.weight * (variance(c.law) + mk * mk);
          }
          return second - m * m;
        }
      },
      spec.kind);
}

GridDensity push_forward(const GridDensity& d, const AffineMap& map, const Grid& target) {
  if (!(map.r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "affine scale must be positive");
  std::vector<double> out(target.count);
  const Grid& g = d.grid();
  for (std::size_t i = 0; i < target.count; ++i) {
    const double t = map.r * target.x(i) + map.s;
    out[i] = map.r * catmull_rom(d.values(), (t - g.x0) / g.dx);
  }
  out = clip_negative(std::move(out));
  const double lost = d.cdf(map.r * (target.x0 - 0.5 * target.dx) + map.s) +
                      (1.0 - d.cdf(map.r * (target.back() + 0.5 * target.dx) + map.s));
  if (lost > kTruncationTol) throw Error(ErrorCode::kGridTooNarrow, "push-forward leaves the target grid");
  return GridDensity(target, std::move(out));
}

AtomicLaw push_forward(const AtomicLaw& law, const AffineMap& map) {
  if (!(map.r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "affine scale must be positive");
  std::vector<Atom> atoms;
  for (const Atom& a : law.atoms()) atoms.push_back({map(a.position), a.weight});
  return AtomicLaw(std::move(atoms));
}

LawSpec push_forward(const LawSpec& spec, const AffineMap& map) {
  if (!(map.r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "affine scale must be positive");
  return std::visit(
      [&](const auto& s) -> LawSpec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          return LawSpec::gaussian(map(s.mean), s.variance / (map.r * map.r));
        } else if constexpr (std::is_same_v<T, SemicircleSpec>) {
          return LawSpec::semicircle(map(s.mean), s.variance / (map.r * map.r));
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          return LawSpec::uniform(map(s.a), map(s.b));
        } else if constexpr (std::is_same_v<T, GridSpec>) {
          // Moving the grid itself is exact.
          const Grid& g = s.density.grid();
          std::vector<double> v(s.density.values().begin(), s.density.values().end());
          for (double& x : v) x *= map.r;
          return LawSpec::grid(GridDensity(Grid{map(g.x0), g.dx / map.r, g.count}, std::move(v)));
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          return LawSpec::atoms(push_forward(s.law, map));
        } else {
          std::vector<MixtureComponent> parts;
          for (const auto& c : s.components) parts.push_back({c.weight, push_forward(c.law, map)});
          return LawSpec::mixture(std::move(parts));
        }
      },
      spec.kind);
}

Standardized<GridDensity> standardize(const GridDensity& d) {
  const double m = mean(Law{d});
  const double v = variance(Law{d});
  if (v < 1e-12) throw Error(ErrorCode::kDegenerateLaw, "variance below 1e-12");
  AffineMap map{m, std::sqrt(v)};
  GridDensity out = push_forward(d, map, d.grid());
  // Interpolation perturbs the moments at O(dx^4); refine the map, always
  // resampling the original density so smoothing does not accumulate.
  for (int iter = 0; iter < 50; ++iter) {
    const double mo = mean(Law{out});
    const double vo = variance(Law{out});
    if (std::abs(mo) < 1e-13 && std::abs(vo - 1.0) < 1e-13) break;
    map = AffineMap::compose(AffineMap{mo, std::sqrt(vo)}, map);
    out = push_forward(d, map, d.grid());
  }
  return {std::move(out), map};
}

Standardized<AtomicLaw> standardize(const AtomicLaw& law) {
  const double m = mean(Law{law});
  const double v = variance(Law{law});
  if (v < 1e-12) throw Error(ErrorCode::kDegenerateLaw, "variance below 1e-12");
  const AffineMap map{m, std::sqrt(v)};
  return {push_forward(law, map), map};
}

Standardized<Law> standardize(const Law& law) {
  return std::visit(
      [](const auto& l) -> Standardized<Law> {
        auto s = standardize(l);
        return {Law{std::move(s.law)}, s.map};
      },
      law);
}

Standardized<LawSpec> standardize(const LawSpec& spec) {
  validate(spec);
  const double v = variance(spec);
  if (v < 1e-12) throw Error(ErrorCode::kDegenerateLaw, "variance below 1e-12");
  const AffineMap map{mean(spec), std::sqrt(v)};
  return {push_forward(spec, map), map};
}

namespace {

struct Aligned {
  Grid grid;
  std::vector<double> a, b;
};

Aligned align(const GridDensity& a, const GridDensity& b) {
  const double dx = a.grid().dx;
  if (std::abs(b.grid().dx - dx) > 1e-12 * dx)
    throw Error(ErrorCode::kIncompatibleSupports, "grid steps differ");
  const double offset = (b.grid().x0 - a.grid().x0) / dx;
  const double shift = std::round(offset);
  if (std::abs(offset - shift) > 1e-6) throw Error(ErrorCode::kIncompatibleSupports, "grids are not aligned");
  const auto sh = static_cast<std::ptrdiff_t>(shift);
  const std::ptrdiff_t lo = std::min<std::ptrdiff_t>(0, sh);
  const std::ptrdiff_t hi = std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(a.size()),
                                                     sh + static_cast<std::ptrdiff_t>(b.size()));
  Aligned out{Grid{a.grid().x0 + static_cast<double>(lo) * dx, dx, static_cast<std::size_t>(hi - lo)}, {}, {}};
  out.a.assign(out.grid.count, 0.0);
  out.b.assign(out.grid.count, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out.a[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) - lo)] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i)
    out.b[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + sh - lo)] = b[i];
  return out;
}

double grid_distance(const GridDensity& da, const GridDensity& db, Metric metric) {
  const Aligned al = align(da, db);
  const double dx = al.grid.dx;
  const double ma = std::accumulate(al.a.begin(), al.a.end(), 0.0);
  const double mb = std::accumulate(al.b.begin(), al.b.end(), 0.0);
  double ca = 0.0, cb = 0.0, result = 0.0;
  for (std::size_t i = 0; i < al.grid.count; ++i) {
    const double pa = al.a[i] / (ma * dx), pb = al.b[i] / (mb * dx);
    ca += pa * dx;
    cb += pb * dx;
    switch (metric) {
      case Metric::kL1: result += std::abs(pa - pb) * dx; break;
      case Metric::kKS: result = std::max(result, std::abs(ca - cb)); break;
      case Metric::kW1: result += std::abs(ca - cb) * dx; break;
    }
  }
  return result;
}

double atomic_distance(const AtomicLaw& a, const AtomicLaw& b, Metric metric) {
  if (metric == Metric::kL1) throw Error(ErrorCode::kIncompatibleSupports, "L1 needs densities");
  std::vector<double> pts;
  for (const Atom& x : a.atoms()) pts.push_back(x.position);
  for (const Atom& x : b.atoms()) pts.push_back(x.position);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double result = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double gap = std::abs(a.cdf(pts[i]) - b.cdf(pts[i]));
    if (metric == Metric::kKS) {
      result = std::max(result, gap);
    } else if (i + 1 < pts.size()) {
      result += gap * (pts[i + 1] - pts[i]);
    }
  }
  return result;
}

}  // namespace

double distance(const Law& a, const Law& b, Metric metric) {
  if (const auto* ga = std::get_if<GridDensity>(&a)) {
    if (const auto* gb = std::get_if<GridDensity>(&b)) return grid_distance(*ga, *gb, metric);
  } else if (const auto* aa = std::get_if<AtomicLaw>(&a)) {
    if (const auto* ab = std::get_if<AtomicLaw>(&b)) return atomic_distance(*aa, *ab, metric);
  }
  throw Error(ErrorCode::kIncompatibleSupports, "cannot compare a density with an atomic law");
}

double ks_distance(const GridDensity& d, const std::function<double(double)>& cdf) {
  const std::vector<double> c = d.cell_cdf();
  const Grid& g = d.grid();
  double result = std::abs(cdf(g.x0 - 0.5 * g.dx));
  double prev = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double edge = g.x(i) + 0.5 * g.dx;
    result = std::max(result, std::abs(c[i] - cdf(edge)));
    // Midpoint catches jumps of the reference CDF inside a cell.
    result = std::max(result, std::abs(0.5 * (prev + c[i]) - cdf(g.x(i))));
    prev = c[i];
  }
  return result;
}

double ks_distance(const GridDensity& d, std::span<const double> sorted_samples) {
  const std::vector<double> c = d.cell_cdf();
  const Grid& g = d.grid();
  auto grid_cdf = [&](double t) {
    const double e = (t - (g.x0 - 0.5 * g.dx)) / g.dx;
    if (e <= 0.0) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(e));
    if (k >= c.size()) return 1.0;
    const double below = k > 0 ? c[k - 1] : 0.0;
    return below + (e - static_cast<double>(k)) * (c[k] - below);
  };
  const auto n = static_cast<double>(sorted_samples.size());
  double result = 0.0;
  for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
    const double f = grid_cdf(sorted_samples[i]);
    result = std::max({result, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return result;
}

double ks_distance(const AtomicLaw& law, std::span<const double> sorted_samples) {
  const auto n = static_cast<double>(sorted_samples.size());
  double result = 0.0;
  for (const Atom& a : law.atoms()) {
    // Empirical CDF just below and at each atom.
    const auto below = static_cast<double>(
        std::lower_bound(sorted_samples.begin(), sorted_samples.end(), a.position) - sorted_samples.begin());
    const auto at = static_cast<double>(
        std::upper_bound(sorted_samples.begin(), sorted_samples.end(), a.position) - sorted_samples.begin());
    result = std::max({result, std::abs(below / n - law.cdf(a.position) + a.weight), std::abs(at / n - law.cdf(a.position))});
  }
  return result;
}

double spec_cdf(const LawSpec& spec, double t) {
  return std::visit(
      [t](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          return normal_cdf((t - s.mean) / std::sqrt(s.variance));
        } else if constexpr (std::is_same_v<T, SemicircleSpec>) {
          return semicircle_cdf(t - s.mean, 2.0 * std::sqrt(s.variance));
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          return std::clamp((t - s.a) / (s.b - s.a), 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, GridSpec>) {
          return s.density.cdf(t);
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          return s.law.cdf(t);
        } else {
          double c = 0.0;
          for (const auto& comp : s.components) c += comp.weight * spec_cdf(comp.law, t);
          return c;
        }
      },
      spec.kind);
}

double spec_density(const LawSpec& spec, double t) {
  return std::visit(
      [t](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          const double z = (t - s.mean) / std::sqrt(s.variance);
          return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi * s.variance);
        } else if constexpr (std::is_same_v<T, SemicircleSpec>) {
          const double u = 4.0 * s.variance - (t - s.mean) * (t - s.mean);
          return u > 0.0 ? std::sqrt(u) / (2.0 * kPi * s.variance) : 0.0;
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          return (t >= s.a && t <= s.b) ? 1.0 / (s.b - s.a) : 0.0;
        } else if constexpr (std::is_same_v<T, GridSpec>) {
          const Grid& g = s.density.grid();
          return std::max(0.0, catmull_rom(s.density.values(), (t - g.x0) / g.dx));
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          throw Error(ErrorCode::kAtomicNotRealizable, "atoms have no density");
        } else {
          double p = 0.0;
          for (const auto& comp : s.components) p += comp.weight * spec_density(comp.law, t);
          return p;
        }
      },
      spec.kind);
}

}  // namespace entroflow

#pragma once

// Probability laws on the real line: sampled densities, purely atomic laws,
// parametric specifications, and the affine maps used to standardize them.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "entroflow/error.hpp"

namespace entroflow {

/// Uniform grid x_i = x0 + i*dx, i = 0..count-1.
struct Grid {
  double x0 = -20.0;
  double dx = 40.0 / 8192.0;
  std::size_t count = 8192;

  double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
  double back() const { return x(count - 1); }

  /// [-20, 20] with 2^13 nodes; wide enough for sums of up to 8 unit-variance summands.
  static Grid standard() { return Grid{}; }
  /// Symmetric grid on [-half_width, half_width) with the given node count.
  static Grid symmetric(double half_width, std::size_t count);

  bool operator==(const Grid&) const = default;
};

/// Maps t to (t - s) / r.
struct AffineMap {
  double s = 0.0;
  double r = 1.0;

  double operator()(double t) const { return (t - s) / r; }
  AffineMap inverse() const { return AffineMap{-s / r, 1.0 / r}; }
  /// Returns the map t -> outer(inner(t)).
  static AffineMap compose(const AffineMap& outer, const AffineMap& inner);
};

/// Absolutely continuous law sampled on a uniform grid. Values are nonnegative
/// and integrate to one under the trapezoid rule. Node values are read as cell
/// averages over [x_i - dx/2, x_i + dx/2] when a CDF is needed.
class GridDensity {
 public:
  GridDensity() = default;
  /// Validates and normalizes. Negative round-off below 1e-10 * max is clipped;
  /// anything larger is rejected.
  GridDensity(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  double x(std::size_t i) const { return grid_.x(i); }

  double max_value() const;
  /// First and one-past-last index with a nonzero value.
  std::pair<std::size_t, std::size_t> support_range() const;
  /// Cumulative mass at the right edge of every cell.
  std::vector<double> cell_cdf() const;
  /// Piecewise-linear CDF through the cell edges (the histogram CDF).
  double cdf(double t) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct Atom {
  double position;
  double weight;
};

class AtomicLaw {
 public:
  AtomicLaw() = default;
  /// Sorts by position. Rejects non-positive weights, repeated positions and
  /// weight sums further than 1e-12 from one.
  explicit AtomicLaw(std::vector<Atom> atoms);

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double cdf(double t) const;

  /// Symmetric Bernoulli law on {-1, +1}.
  static AtomicLaw symmetric_bernoulli();

 private:
  std::vector<Atom> atoms_;
};

using Law = std::variant<GridDensity, AtomicLaw>;

struct GaussianSpec {
  double mean = 0.0;
  double variance = 1.0;
};
struct SemicircleSpec {
  double mean = 0.0;
  double variance = 1.0;
};
struct UniformSpec {
  double a = 0.0;
  double b = 1.0;
};
struct GridSpec {
  GridDensity density;
};
struct AtomsSpec {
  AtomicLaw law;
};
struct MixtureComponent;
struct MixtureSpec {
  std::vector<MixtureComponent> components;
};

struct LawSpec {
  std::variant<GaussianSpec, SemicircleSpec, UniformSpec, GridSpec, AtomsSpec, MixtureSpec> kind;

  static LawSpec gaussian(double mean, double variance);
  static LawSpec semicircle(double mean, double variance);
  static LawSpec uniform(double a, double b);
  static LawSpec grid(GridDensity d);
  static LawSpec atoms(AtomicLaw law);
  static LawSpec mixture(std::vector<MixtureComponent> components);

  bool is_atomic() const { return std::holds_alternative<AtomsSpec>(kind); }
};

struct MixtureComponent {
  double weight;
  LawSpec law;
};

/// Throws kInvalidArgument when a parameter invariant fails.
void validate(const LawSpec& spec);

GridDensity realize(const LawSpec& spec, const Grid& grid = Grid::standard());

/// Returns the spec as a Law: atoms stay atomic, everything else is realized.
Law to_law(const LawSpec& spec, const Grid& grid = Grid::standard());

double moment(const GridDensity& d, int k);
double moment(const AtomicLaw& law, int k);
double moment(const Law& law, int k);
double mean(const Law& law);
double variance(const Law& law);
double mean(const LawSpec& spec);
double variance(const LawSpec& spec);

/// Density of (X - map.s) / map.r sampled on `target` by cubic interpolation.
GridDensity push_forward(const GridDensity& d, const AffineMap& map, const Grid& target);
AtomicLaw push_forward(const AtomicLaw& law, const AffineMap& map);
LawSpec push_forward(const LawSpec& spec, const AffineMap& map);

template <class L>
struct Standardized {
  L law;
  AffineMap map;
};

Standardized<GridDensity> standardize(const GridDensity& d);
Standardized<AtomicLaw> standardize(const AtomicLaw& law);
Standardized<Law> standardize(const Law& law);
/// Exact for parametric specs.
Standardized<LawSpec> standardize(const LawSpec& spec);

enum class Metric { kKS, kL1, kW1 };

double distance(const Law& a, const Law& b, Metric metric);
/// Kolmogorov-Smirnov distance between a grid law and a CDF.
double ks_distance(const GridDensity& d, const std::function<double(double)>& cdf);
/// Kolmogorov-Smirnov distance between a grid law and a sorted sample.
double ks_distance(const GridDensity& d, std::span<const double> sorted_samples);
double ks_distance(const AtomicLaw& law, std::span<const double> sorted_samples);

/// Closed-form CDF of a spec (mixtures included).
double spec_cdf(const LawSpec& spec, double t);
/// Pointwise density of a non-atomic spec. Realized grids store cell
/// averages instead, which differ from this near non-smooth points.
double spec_density(const LawSpec& spec, double t);

/// LawSpec from its JSON text, e.g. {"type":"uniform","a":-1,"b":1}. Also
/// accepted: gaussian/semicircle (mean, variance), atoms ([[x, w], ...]),
/// mixture ([[w, spec], ...]) and grid (x0, dx, values). Malformed documents
/// raise kParseError; well-formed but invalid parameters kInvalidArgument.
LawSpec parse_law_spec(std::string_view json);
/// Reads and parses a LawSpec file.
LawSpec load_law_spec(const std::string& path);
/// Inverse of parse_law_spec (grid values are written normalized).
std::string to_json(const LawSpec& spec);

/// Trapezoid rule over the grid.
double trapezoid(const Grid& grid, std::span<const double> f);

}  // namespace entroflow

#include "entroflow/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "entroflow/classical.hpp"
#include "entroflow/error.hpp"
#include "entroflow/extremal.hpp"
#include "entroflow/free.hpp"
#include "entroflow/harness.hpp"
#include "entroflow/kernels.hpp"
#include "entroflow/measures.hpp"
#include "entroflow/projection_lemma.hpp"
#include "json.hpp"
#include "plot.hpp"

namespace entroflow::cli {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kHalfLog2PiE = 1.4189385332046727;

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNonConvergence = 3 };

// Shortest round-trip decimal; non-finite values as inf / -inf / nan.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

ordered_json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

struct Config {
  std::string law_path;
  double x0 = Grid::standard().x0;
  double dx = Grid::standard().dx;
  std::size_t count = Grid::standard().count;
  std::string out;
  std::vector<std::string> formats{"csv", "json", "svg"};
  std::uint64_t seed = 1;
  bool standardize = false;

  Grid grid() const { return Grid{x0, dx, count}; }
};

void check_config(const Config& c) {
  if (c.count < 16 || (c.count & (c.count - 1)) != 0)
    throw Error(ErrorCode::kInvalidArgument, "grid count must be a power of two >= 16");
  if (!(c.dx > 0.0) || !std::isfinite(c.x0)) throw Error(ErrorCode::kInvalidArgument, "grid needs dx > 0 and finite x0");
  for (const auto& f : c.formats)
    if (f != "csv" && f != "json" && f != "svg") throw Error(ErrorCode::kInvalidArgument, "unknown format " + f);
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be positive");
}

// Collects tables, the report and the chart. With --out everything goes to
// files; without it the primary artifact is printed to stdout.
class Outputs {
 public:
  explicit Outputs(const Config& c) : dir_(c.out), formats_(c.formats.begin(), c.formats.end()) {}

  struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
  };

  void table(Table t) { tables_.push_back(std::move(t)); }
  void chart(plot::Chart c) { chart_ = std::move(c); }
  ordered_json& report() { return report_; }
  void primary_is_table(bool v) { table_primary_ = v; }

  void write() const {
    if (dir_.empty()) {
      if (table_primary_ && !tables_.empty()) {
        std::cout << csv(tables_.front());
      } else {
        std::cout << report_.dump(2) << "\n";
      }
      return;
    }
    fs::create_directories(dir_);
    if (formats_.count("csv"))
      for (const auto& t : tables_) put(t.name + ".csv", csv(t));
    if (formats_.count("json")) put("report.json", report_.dump(2) + "\n");
    if (formats_.count("svg") && chart_) put("plot.svg", plot::render(*chart_));
  }

 private:
  static std::string csv(const Table& t) {
    std::string s;
    for (std::size_t i = 0; i < t.header.size(); ++i) s += (i ? "," : "") + t.header[i];
    s += "\n";
    for (const auto& r : t.rows) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
      s += "\n";
    }
    return s;
  }
  void put(const std::string& name, const std::string& text) const {
    std::ofstream f(fs::path(dir_) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::kInvalidArgument, "cannot write " + name);
    f << text;
  }

  std::string dir_;
  std::set<std::string> formats_;
  std::vector<Table> tables_;
  std::optional<plot::Chart> chart_;
  ordered_json report_ = ordered_json::object();
  bool table_primary_ = false;
};

ordered_json grid_json(const Grid& g) { return {{"x0", g.x0}, {"dx", g.dx}, {"count", g.count}}; }

LawSpec load_law(const Config& c) {
  if (c.law_path.empty()) throw Error(ErrorCode::kInvalidArgument, "--law is required");
  LawSpec spec = load_law_spec(c.law_path);
  if (c.standardize) spec = standardize(spec).law;
  return spec;
}

void begin_report(Outputs& out, const std::string& command, const Config& c, bool with_law = true) {
  auto& r = out.report();
  r["command"] = command;
  if (with_law) {
    r["law"] = c.law_path;
    r["standardized"] = c.standardize;
    r["grid"] = grid_json(c.grid());
  }
}

// Density table on the joint support of the given columns.
Outputs::Table density_table(const std::string& name, const Grid& g, const std::vector<std::string>& cols,
                             const std::vector<std::vector<double>>& values) {
  std::size_t lo = g.count, hi = 0;
  for (const auto& v : values)
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] > 0.0) {
        lo = std::min(lo, i);
        hi = std::max(hi, i + 1);
      }
  Outputs::Table t{name, {"x"}, {}};
  for (const auto& c : cols) t.header.push_back(c);
  if (lo > 0) --lo;
  if (hi < g.count) ++hi;
  for (std::size_t i = lo; i < hi; ++i) {
    std::vector<std::string> row{num(g.x(i))};
    for (const auto& v : values) row.push_back(num(v[i]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

plot::Series density_series(const std::string& name, const Outputs::Table& t, std::size_t col) {
  plot::Series s{name, {}, {}};
  for (const auto& r : t.rows) {
    s.x.push_back(std::stod(r[0]));
    s.y.push_back(r[col] == "nan" ? std::nan("") : std::stod(r[col]));
  }
  return s;
}

std::vector<double> values_of(const GridDensity& d) { return {d.values().begin(), d.values().end()}; }

// ---- sequences -----------------------------------------------------------

struct SeqOpts {
  int n = 6;
  double tol = harness::kTolMonotone;
  double bound_tol = 1e-3;
};

int sequence_command(const Config& c, const SeqOpts& o, bool free) {
  require_positive(o.tol, "--tol");
  require_positive(o.bound_tol, "--bound-tol");
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const auto seq = free ? harness::free_sequence(spec, o.n, g) : harness::classical_sequence(spec, o.n, g);
  const bool monotone = seq.monotone(o.tol);
  const bool bounded = seq.bounded(o.bound_tol);
  const std::string col = free ? "chi" : "H";

  Outputs out(c);
  out.primary_is_table(true);
  Outputs::Table t{"sequence", {"n", col, "delta"}, {}};
  plot::Series s{col + "_n", {}, {}, true};
  // Row n carries the backward difference value_n - value_{n-1}.
  for (std::size_t k = 0; k < seq.values.size(); ++k) {
    t.rows.push_back({std::to_string(k + 1), num(seq.values[k]), k ? num(seq.deltas[k - 1]) : ""});
    s.x.push_back(static_cast<double>(k + 1));
    s.y.push_back(seq.values[k]);
  }
  out.table(std::move(t));
  out.chart({free ? "free entropy of normalized free sums" : "entropy of normalized sums", "n", col, {s}, kHalfLog2PiE,
             "1/2 log(2 pi e)", false});

  begin_report(out, free ? "free-seq" : "classical-seq", c);
  auto& r = out.report();
  r["n"] = o.n;
  r["tolerances"] = {{"monotone", o.tol}, {"bound", o.bound_tol}};
  ordered_json vals = ordered_json::array(), dels = ordered_json::array();
  for (double v : seq.values) vals.push_back(jnum(v));
  for (double v : seq.deltas) dels.push_back(jnum(v));
  r["values"] = vals;
  r["deltas"] = dels;
  r["first_is_minus_inf"] = !seq.values.empty() && std::isinf(seq.values.front());
  r["vacuous"] = seq.vacuous;
  r["monotone"] = monotone;
  r["bounded"] = bounded;
  const bool pass = seq.vacuous || (monotone && bounded);
  r["passed"] = pass;
  out.write();
  return pass ? kOk : kCheckFailed;
}

struct EqualityOpts {
  std::string kind = "classical";
  int n = 4;
  double tol = 1e-3;
  double test_tol = 0.0;
};

int equality_command(const Config& c, const EqualityOpts& o) {
  require_positive(o.tol, "--tol");
  if (o.kind != "classical" && o.kind != "free") throw Error(ErrorCode::kInvalidArgument, "--kind is classical or free");
  const bool free = o.kind == "free";
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const auto seq = free ? harness::free_sequence(spec, o.n, g) : harness::classical_sequence(spec, o.n, g);
  std::optional<double> test_tol;
  if (o.test_tol > 0.0) test_tol = o.test_tol;
  const auto rep = harness::equality_detector(seq, o.tol, test_tol, g);
  const double used_test_tol = test_tol.value_or(free ? 1e-2 : 1e-4);

  Outputs out(c);
  Outputs::Table t{"sequence", {"n", free ? "chi" : "H", "delta", "plateau"}, {}};
  plot::Series s{free ? "chi_n" : "H_n", {}, {}, true};
  for (std::size_t k = 0; k < seq.values.size(); ++k) {
    t.rows.push_back({std::to_string(k + 1), num(seq.values[k]), k ? num(seq.deltas[k - 1]) : "",
                      k ? (rep.plateau[k - 1] ? "1" : "0") : ""});
    s.x.push_back(static_cast<double>(k + 1));
    s.y.push_back(seq.values[k]);
  }
  out.table(std::move(t));
  out.chart({"equality detector", "n", free ? "chi" : "H", {s}, kHalfLog2PiE, "1/2 log(2 pi e)", false});

  begin_report(out, "equality", c);
  auto& r = out.report();
  r["kind"] = o.kind;
  r["n"] = o.n;
  r["tolerances"] = {{"plateau", o.tol}, {"test", used_test_tol}};
  ordered_json plateau = ordered_json::array();
  for (bool p : rep.plateau) plateau.push_back(p);
  r["plateau"] = plateau;
  r["test"] = free ? "semicircularity" : "gaussianity";
  r["test_pass"] = rep.test_pass;
  r["test_statistic"] = jnum(rep.test_statistic);
  r["test_ks"] = jnum(rep.test_ks);
  r["vacuous"] = rep.vacuous;
  r["consistent"] = rep.consistent;
  out.write();
  return rep.consistent ? kOk : kCheckFailed;
}

// ---- weighted inequalities -------------------------------------------------

struct WeightOpts {
  int summands = 0;
  std::vector<double> a;
  bool classical = false;
};

std::vector<double> weights_a(const WeightOpts& o) {
  if (!o.a.empty()) return o.a;
  if (o.summands < 2) throw Error(ErrorCode::kInvalidArgument, "give --a or --summands >= 2");
  return harness::WeightVector::equal(o.summands).a;
}

ordered_json array_of(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

int stam_command(const Config& c, const WeightOpts& o) {
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const auto w = harness::WeightVector::from_a(weights_a(o));
  harness::InequalityCheck chk;
  if (o.classical) {
    if (spec.is_atomic()) throw Error(ErrorCode::kHypothesisViolated, "the inequality needs finite Fisher information");
    chk = harness::classical_fisher_superadditivity_check(realize(spec, g), w);
  } else {
    chk = harness::fisher_superadditivity_check(to_law(spec, g), w, g);
  }
  Outputs out(c);
  out.table({"stam", {"lhs", "rhs", "gap"}, {{num(chk.lhs), num(chk.rhs), num(chk.rhs - chk.lhs)}}});
  begin_report(out, "stam", c);
  auto& r = out.report();
  r["setting"] = o.classical ? "classical" : "free";
  r["a"] = array_of(w.a);
  r["b"] = array_of(w.b);
  r["tolerances"] = {{"inequality", harness::kTolWeighted}, {"equality", harness::kTolWeighted}};
  r["lhs"] = jnum(chk.lhs);
  r["rhs"] = jnum(chk.rhs);
  r["holds"] = chk.holds;
  r["equality"] = chk.equality;
  out.write();
  return chk.holds ? kOk : kCheckFailed;
}

int convexity_command(const Config& c, const WeightOpts& o) {
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const auto chk = harness::entropy_convexity_check(to_law(spec, g), weights_a(o), g);
  bool spots = true;
  Outputs out(c);
  Outputs::Table t{"spot", {"t", "lhs", "rhs", "holds"}, {}};
  plot::Series l{"Phi(sum)", {}, {}, true}, rr{"weighted Phi", {}, {}, true};
  for (const auto& s : chk.spot) {
    spots = spots && s.holds;
    t.rows.push_back({num(s.t), num(s.lhs), num(s.rhs), s.holds ? "1" : "0"});
    l.x.push_back(s.t);
    l.y.push_back(s.lhs);
    rr.x.push_back(s.t);
    rr.y.push_back(s.rhs);
  }
  out.table({"convexity", {"lhs", "rhs", "gap"}, {{num(chk.lhs), num(chk.rhs), num(chk.lhs - chk.rhs)}}});
  out.table(std::move(t));
  out.chart({"free Fisher information along the semicircular flow", "t", "Phi", {l, rr}, std::nullopt, "", true});
  begin_report(out, "convexity", c);
  auto& r = out.report();
  r["a"] = array_of(weights_a(o));
  r["tolerances"] = {{"inequality", harness::kTolWeighted}, {"equality", harness::kTolWeighted}};
  r["lhs"] = jnum(chk.lhs);
  r["rhs"] = jnum(chk.rhs);
  r["holds"] = chk.holds;
  r["equality"] = chk.equality;
  r["spot_checks_hold"] = spots;
  out.write();
  return chk.holds && spots ? kOk : kCheckFailed;
}

int stability_command(const Config& c) {
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const Law law = to_law(spec, g);
  const auto rep = harness::stability_check(law, g);
  const GridDensity sq = freeprob::free_power(law, 2, g);

  Outputs out(c);
  std::vector<std::string> cols{"square"};
  std::vector<std::vector<double>> vals{values_of(sq)};
  if (const auto* d = std::get_if<GridDensity>(&law)) {
    cols.push_back("law");
    vals.push_back(values_of(*d));
  }
  auto t = density_table("density", g, cols, vals);
  std::vector<plot::Series> series{density_series("(X1+X2)/sqrt 2", t, 1)};
  if (cols.size() > 1) series.push_back(density_series("X", t, 2));
  out.table(std::move(t));
  out.chart({"free stability", "x", "density", series, std::nullopt, "", false});
  begin_report(out, "stability", c);
  auto& r = out.report();
  r["tolerances"] = {{"ks", 0.01}};
  r["ks"] = jnum(rep.dist);
  r["stable"] = rep.stable;
  r["chi"] = jnum(rep.chi);
  r["chi_finite"] = std::isfinite(rep.chi);
  out.write();
  return kOk;
}

// ---- projection lemma -------------------------------------------------------

struct LemmaOpts {
  std::size_t dim = 64;
  std::size_t m = 5;
  std::size_t trials = 10000;
  std::size_t equality_cases = 1000;
};

int lemma_command(const Config& c, const LemmaOpts& o) {
  const auto rep = projection::run_suite(o.dim, o.m, o.trials, o.equality_cases, c.seed);
  Outputs out(c);
  out.table({"summary",
             {"trials", "min_slack", "violations", "equality_cases", "equality_passed", "perturbed_cases",
              "perturbed_broken", "min_perturbed_gap"},
             {{std::to_string(rep.random_trials), num(rep.min_slack), std::to_string(rep.violations),
               std::to_string(rep.equality_cases), std::to_string(rep.equality_passed),
               std::to_string(rep.perturbed_cases), std::to_string(rep.perturbed_broken), num(rep.min_perturbed_gap)}}});
  begin_report(out, "lemma-proj", c, false);
  auto& r = out.report();
  r["dim"] = o.dim;
  r["m"] = o.m;
  r["seed"] = c.seed;
  r["tolerances"] = {{"slack", 1e-10}, {"equality", 1e-10}, {"perturbation", 1e-6}};
  r["trials"] = rep.random_trials;
  r["min_slack"] = jnum(rep.min_slack);
  r["violations"] = rep.violations;
  r["equality_cases"] = rep.equality_cases;
  r["equality_passed"] = rep.equality_passed;
  r["perturbed_cases"] = rep.perturbed_cases;
  r["perturbed_broken"] = rep.perturbed_broken;
  r["min_perturbed_gap"] = jnum(rep.min_perturbed_gap);
  const bool pass = rep.violations == 0 && rep.equality_passed == rep.equality_cases &&
                    rep.perturbed_broken == rep.perturbed_cases;
  r["passed"] = pass;
  out.write();
  return pass ? kOk : kCheckFailed;
}

// ---- extremal ---------------------------------------------------------------

struct ExtremalOpts {
  std::string objective = "entropy";
  double variance = 1.0;
  int steps = 3000;
  double step_size = 0.0;
};

int extremal_command(const Config& c, const ExtremalOpts& o) {
  using extremal::Objective;
  require_positive(o.variance, "--variance");
  Objective obj;
  if (o.objective == "entropy") {
    obj = Objective::kEntropy;
  } else if (o.objective == "neg-fisher") {
    obj = Objective::kNegFisher;
  } else if (o.objective == "log-energy") {
    obj = Objective::kLogEnergy;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "--objective is entropy, neg-fisher or log-energy");
  }
  const Grid g = c.grid();
  const double half = std::sqrt(3.0 * o.variance);
  const LawSpec init_spec = c.law_path.empty() ? LawSpec::uniform(-half, half) : load_law(c);
  if (init_spec.is_atomic()) throw Error(ErrorCode::kAtomicNotRealizable, "the initial law needs a density");
  const GridDensity init = realize(init_spec, g);
  const double eta = o.step_size > 0.0 ? o.step_size : extremal::default_step_size(obj);
  const extremal::ConstrainedDensityProblem pb{g, obj, o.variance};
  const auto res = extremal::maximize(pb, init, o.steps, eta);
  const double grad_err = extremal::gradient_check(pb, res.density, 16, c.seed);

  const GridDensity ref = realize(obj == Objective::kLogEnergy ? LawSpec::semicircle(0.0, o.variance)
                                                                : LawSpec::gaussian(0.0, o.variance),
                                  g);
  double l1 = 0.0;
  for (std::size_t i = 0; i < g.count; ++i) l1 += std::abs(res.density[i] - ref[i]);
  l1 *= g.dx;
  double optimum = 0.0, value = 0.0;
  switch (obj) {
    case Objective::kEntropy:
      optimum = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * o.variance);
      value = classical::entropy(res.density);
      break;
    case Objective::kNegFisher:
      optimum = -1.0 / o.variance;
      value = -classical::fisher(res.density);
      break;
    case Objective::kLogEnergy:
      optimum = -0.25 + 0.5 * std::log(o.variance);
      value = freeprob::log_energy(res.density);
      break;
  }

  Outputs out(c);
  Outputs::Table trace{"trace", {"step", "objective"}, {}};
  plot::Series ts{"objective", {}, {}};
  for (std::size_t k = 0; k < res.trace.size(); ++k) trace.rows.push_back({std::to_string(k), num(res.trace[k])});
  auto dens = density_table("density", g, {"p", "reference"}, {values_of(res.density), values_of(ref)});
  out.chart({"extremal density (" + o.objective + ")", "x", "density",
             {density_series("optimizer", dens, 1), density_series("reference", dens, 2)}, std::nullopt, "", false});
  out.table(std::move(trace));
  out.table(std::move(dens));

  begin_report(out, "extremal", c, false);
  auto& r = out.report();
  r["objective"] = o.objective;
  r["variance"] = o.variance;
  r["init"] = c.law_path.empty() ? "uniform" : c.law_path;
  r["grid"] = grid_json(g);
  r["step_size"] = eta;
  r["tolerances"] = {{"stationarity", 1e-4}, {"gradient_check", 1e-5}, {"constraint_drift", 1e-10}};
  r["steps"] = res.steps;
  r["final_objective"] = jnum(res.trace.back());
  r["functional_value"] = jnum(value);
  r["closed_form_optimum"] = optimum;
  r["l1_to_reference"] = l1;
  r["stationarity"] = res.stationarity;
  r["gradient_check"] = grad_err;
  r["constraint_drift"] = res.constraint_drift;
  const bool pass = res.stationarity < 1e-4 && grad_err < 1e-5 && res.constraint_drift < 1e-10;
  r["passed"] = pass;
  out.write();
  return pass ? kOk : kCheckFailed;
}

// ---- scalar functionals and flows ------------------------------------------

struct ScalarOpts {
  bool via_flow = false;
  double t_min = 0.0;
};

int scalar_command(const Config& c, const std::string& which, const ScalarOpts& o) {
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const Law law = to_law(spec, g);
  Outputs out(c);
  begin_report(out, which, c);
  auto& r = out.report();
  auto* d = std::get_if<GridDensity>(&law);
  auto need_density = [&] {
    if (!d) throw Error(ErrorCode::kAtomicNotRealizable, which + " needs an absolutely continuous law");
  };
  std::vector<std::string> header;
  std::vector<std::string> row;
  auto add = [&](const std::string& key, double v) {
    r[key] = jnum(v);
    header.push_back(key);
    row.push_back(num(v));
  };
  if (which == "entropy") {
    add("entropy", d ? classical::entropy(*d) : -std::numeric_limits<double>::infinity());
    if (o.via_flow) {
      classical::FlowQuadrature q;
      q.t_min = o.t_min;
      add("entropy_via_flow", classical::entropy_via_flow(law, q));
      r["t_min"] = o.t_min;
    }
  } else if (which == "free-entropy") {
    add("chi", freeprob::free_entropy(law));
    if (d) add("log_energy", freeprob::log_energy(*d));
    if (o.via_flow) {
      freeprob::FreeFlowQuadrature q;
      q.t_min = o.t_min;
      add("chi_via_flow", freeprob::free_entropy_via_flow(law, q));
      r["t_min"] = o.t_min;
    }
  } else if (which == "fisher") {
    need_density();
    const auto j = classical::score(*d);
    add("fisher", classical::fisher(*d));
    add("score_moment", classical::score_moment(j, *d));
  } else {
    need_density();
    const auto f = freeprob::free_fisher(*d);
    add("phi", f.phi_primary);
    add("phi_cubic", f.phi_cubic);
    add("relative_mismatch", std::abs(f.phi_primary - f.phi_cubic) / f.phi_cubic);
  }
  out.table({"value", header, {row}});
  out.write();
  return kOk;
}

struct FlowOpts {
  std::string kind = "classical";
  double t = 1.0;
};

int flow_command(const Config& c, const FlowOpts& o) {
  require_positive(o.t, "--t");
  if (o.kind != "classical" && o.kind != "free") throw Error(ErrorCode::kInvalidArgument, "--kind is classical or free");
  const Grid g = c.grid();
  const LawSpec spec = load_law(c);
  const Law law = to_law(spec, g);
  const bool free = o.kind == "free";
  const GridDensity d = free ? freeprob::semicircular_flow(law, o.t, g) : classical::heat_flow(law, o.t, g);
  Outputs out(c);
  out.primary_is_table(true);
  auto t = density_table("density", g, {"p"}, {values_of(d)});
  out.chart({free ? "semicircular flow" : "heat flow", "x", "density", {density_series("t = " + num(o.t), t, 1)},
             std::nullopt, "", false});
  out.table(std::move(t));
  begin_report(out, "flow", c);
  auto& r = out.report();
  r["kind"] = o.kind;
  r["t"] = o.t;
  r["mean"] = moment(d, 1);
  r["variance"] = moment(d, 2) - moment(d, 1) * moment(d, 1);
  if (free) {
    r["chi"] = jnum(freeprob::free_entropy(d));
  } else {
    r["entropy"] = jnum(classical::entropy(d));
  }
  out.write();
  return kOk;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoConvergence:
    case ErrorCode::kStalledBelowTolerance:
    case ErrorCode::kMassLoss:
    case ErrorCode::kBelowAxis:
      return kNonConvergence;
    default:
      return kUsage;
  }
}

void add_common(CLI::App* sub, Config& c, bool law, bool grid = true) {
  if (law) sub->add_option("--law", c.law_path, "LawSpec JSON file")->check(CLI::ExistingFile);
  if (law) sub->add_flag("--standardize", c.standardize, "shift and scale the law to mean 0, variance 1 first");
  if (grid) {
    sub->add_option("--x0", c.x0, "grid origin");
    sub->add_option("--dx", c.dx, "grid step");
    sub->add_option("--count", c.count, "grid nodes (power of two)");
  }
  sub->add_option("--out", c.out, "output directory (default: primary result to stdout)");
  sub->add_option("--format", c.formats, "output formats among csv, json, svg")->delimiter(',');
  sub->add_option("--seed", c.seed, "random seed");
}

}  // namespace

int run(int argc, char** argv) {
  kernels::apply_thread_cap();
  CLI::App app{"Entropy monotonicity checks for classical and free sums"};
  app.require_subcommand(1);
  Config cfg;
  SeqOpts seq;
  EqualityOpts eq;
  WeightOpts wopt;
  LemmaOpts lemma;
  ExtremalOpts ext;
  ScalarOpts scal;
  FlowOpts flow;

  auto* cseq = app.add_subcommand("classical-seq", "entropy of normalized classical sums, n = 1..N");
  auto* fseq = app.add_subcommand("free-seq", "free entropy of normalized free sums, n = 1..N");
  for (auto* s : {cseq, fseq}) {
    add_common(s, cfg, true);
    s->add_option("--n", seq.n, "sequence length (<= 8)");
    s->add_option("--tol", seq.tol, "monotonicity slack");
    s->add_option("--bound-tol", seq.bound_tol, "slack on the 1/2 log(2 pi e) bound");
  }
  auto* equality = app.add_subcommand("equality", "plateau detection against the Gaussian / semicircle test");
  add_common(equality, cfg, true);
  equality->add_option("--kind", eq.kind, "classical or free");
  equality->add_option("--n", eq.n, "sequence length (<= 8)");
  equality->add_option("--tol", eq.tol, "plateau tolerance");
  equality->add_option("--test-tol", eq.test_tol, "Gaussianity / semicircularity tolerance");

  auto* stam = app.add_subcommand("stam", "weighted free Fisher information inequality");
  auto* conv = app.add_subcommand("convexity", "weighted free entropy inequality with flow spot checks");
  for (auto* s : {stam, conv}) {
    add_common(s, cfg, true);
    s->add_option("--summands", wopt.summands, "equal weights over this many summands");
    s->add_option("--a", wopt.a, "explicit weights a_j (sum of squares 1)")->delimiter(',');
  }
  stam->add_flag("--classical", wopt.classical, "classical convolution and Fisher information instead");

  auto* stab = app.add_subcommand("stability", "KS distance between a law and its normalized free square");
  add_common(stab, cfg, true);

  auto* lp = app.add_subcommand("lemma-proj", "randomized commuting-projection inequality suite");
  add_common(lp, cfg, false, false);
  lp->add_option("--dim", lemma.dim, "largest dimension");
  lp->add_option("--m", lemma.m, "largest number of projections");
  lp->add_option("--trials", lemma.trials, "random trials");
  lp->add_option("--equality-cases", lemma.equality_cases, "constructed equality and perturbed cases");

  auto* ex = app.add_subcommand("extremal", "maximize entropy, -Fisher or log-energy at fixed variance");
  add_common(ex, cfg, true);
  ex->add_option("--objective", ext.objective, "entropy, neg-fisher or log-energy");
  ex->add_option("--variance", ext.variance, "variance constraint");
  ex->add_option("--steps", ext.steps, "step budget");
  ex->add_option("--step-size", ext.step_size, "initial step size");

  std::vector<std::pair<CLI::App*, std::string>> scalars;
  for (const char* name : {"entropy", "free-entropy", "fisher", "free-fisher"}) {
    auto* s = app.add_subcommand(name, std::string(name) + " of a law");
    add_common(s, cfg, true);
    if (std::string(name).find("entropy") != std::string::npos) {
      s->add_flag("--via-flow", scal.via_flow, "also integrate along the flow");
      s->add_option("--t-min", scal.t_min, "lower flow time (atomic laws need > 0)");
    }
    scalars.emplace_back(s, name);
  }
  auto* fl = app.add_subcommand("flow", "heat or semicircular flow of a law");
  add_common(fl, cfg, true);
  fl->add_option("--kind", flow.kind, "classical or free");
  fl->add_option("--t", flow.t, "flow time")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    check_config(cfg);
    if (cseq->parsed()) return sequence_command(cfg, seq, false);
    if (fseq->parsed()) return sequence_command(cfg, seq, true);
    if (equality->parsed()) return equality_command(cfg, eq);
    if (stam->parsed()) return stam_command(cfg, wopt);
    if (conv->parsed()) return convexity_command(cfg, wopt);
    if (stab->parsed()) return stability_command(cfg);
    if (lp->parsed()) return lemma_command(cfg, lemma);
    if (ex->parsed()) return extremal_command(cfg, ext);
    if (fl->parsed()) return flow_command(cfg, flow);
    for (const auto& [s, name] : scalars)
      if (s->parsed()) return scalar_command(cfg, name, scal);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace entroflow::cli

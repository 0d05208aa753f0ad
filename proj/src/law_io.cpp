#include <fstream>
#include <sstream>

#include "entroflow/measures.hpp"
#include "json.hpp"

namespace entroflow {
namespace {

using nlohmann::json;

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw Error(ErrorCode::kParseError, std::string("missing numeric field '") + key + "'");
  return j[key].get<double>();
}

LawSpec from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw Error(ErrorCode::kParseError, "law spec must be an object with a string 'type'");
  const std::string type = j["type"];
  if (type == "gaussian") return LawSpec::gaussian(number(j, "mean"), number(j, "variance"));
  if (type == "semicircle") return LawSpec::semicircle(number(j, "mean"), number(j, "variance"));
  if (type == "uniform") return LawSpec::uniform(number(j, "a"), number(j, "b"));
  if (type == "atoms") {
    if (!j.contains("atoms") || !j["atoms"].is_array()) throw Error(ErrorCode::kParseError, "atoms must be an array");
    std::vector<Atom> atoms;
    for (const auto& a : j["atoms"]) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw Error(ErrorCode::kParseError, "each atom must be [position, weight]");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return LawSpec::atoms(AtomicLaw(std::move(atoms)));
  }
  if (type == "mixture") {
    if (!j.contains("components") || !j["components"].is_array())
      throw Error(ErrorCode::kParseError, "components must be an array");
    std::vector<MixtureComponent> parts;
    for (const auto& c : j["components"]) {
      if (!c.is_array() || c.size() != 2 || !c[0].is_number())
        throw Error(ErrorCode::kParseError, "each component must be [weight, spec]");
      parts.push_back({c[0].get<double>(), from_json(c[1])});
    }
    return LawSpec::mixture(std::move(parts));
  }
  if (type == "grid") {
    if (!j.contains("values") || !j["values"].is_array()) throw Error(ErrorCode::kParseError, "values must be an array");
    std::vector<double> values;
    for (const auto& v : j["values"]) {
      if (!v.is_number()) throw Error(ErrorCode::kParseError, "grid values must be numbers");
      values.push_back(v.get<double>());
    }
    const Grid g{number(j, "x0"), number(j, "dx"), values.size()};
    return LawSpec::grid(GridDensity(g, std::move(values)));
  }
  throw Error(ErrorCode::kParseError, "unknown law type '" + type + "'");
}

json to_json_value(const LawSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          return {{"type", "gaussian"}, {"mean", s.mean}, {"variance", s.variance}};
        } else if constexpr (std::is_same_v<T, SemicircleSpec>) {
          return {{"type", "semicircle"}, {"mean", s.mean}, {"variance", s.variance}};
        } else if constexpr (std::is_same_v<T, UniformSpec>) {
          return {{"type", "uniform"}, {"a", s.a}, {"b", s.b}};
        } else if constexpr (std::is_same_v<T, AtomsSpec>) {
          json atoms = json::array();
          for (const Atom& a : s.law.atoms()) atoms.push_back({a.position, a.weight});
          return {{"type", "atoms"}, {"atoms", atoms}};
        } else if constexpr (std::is_same_v<T, MixtureSpec>) {
          json parts = json::array();
          for (const auto& c : s.components) parts.push_back({c.weight, to_json_value(c.law)});
          return {{"type", "mixture"}, {"components", parts}};
        } else {
          const Grid& g = s.density.grid();
          return {{"type", "grid"},
                  {"x0", g.x0},
                  {"dx", g.dx},
                  {"values", std::vector<double>(s.density.values().begin(), s.density.values().end())}};
        }
      },
      spec.kind);
}

}  // namespace

LawSpec parse_law_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  LawSpec spec = from_json(j);
  validate(spec);
  return spec;
}

LawSpec load_law_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_law_spec(ss.str());
}

std::string to_json(const LawSpec& spec) { return to_json_value(spec).dump(); }

}  // namespace entroflow

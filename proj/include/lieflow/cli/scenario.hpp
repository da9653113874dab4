// Scenario documents for the lieflow command line: parsing with field-path
// diagnostics and construction of the chart and system they describe.
#pragma once

#include "lieflow/analysis.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lieflow::cli {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldSpec {
  Matrix derivation;  // n x n, zero when omitted
  Vector invariant;   // n, zero when omitted
  std::optional<Matrix> two_sided_a, two_sided_c;
};

struct Scenario {
  std::string name;
  std::string group = "Rn";
  int group_param = 0;
  std::optional<AlgebraData> algebra_override;
  Tolerances tol;
  std::uint64_t seed = 0;

  FieldSpec drift;
  std::vector<FieldSpec> controls;
  std::optional<ControlLaw> control_law;
  std::optional<Matrix> initial;  // ambient matrix, identity when omitted

  double t_end = 1.0;
  double dt = kDefaultRk4Step;
  int samples_per_unit = 100;

  ProbeParams probe;
  ObstructionParams obstruction;
  std::optional<SaturationParams> saturation;
  int larc_max_depth = 8;
  int verify_draws = 20;
};

namespace detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key) + ": missing required field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return v;
}

inline double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw ConfigError(path + ": must be positive");
  return v;
}

inline int integer(const json& j, const std::string& path, int lo) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > 100000000) throw ConfigError(path + ": out of range (minimum " + std::to_string(lo) + ")");
  return static_cast<int>(v);
}

inline std::uint64_t seed_value(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw ConfigError(path + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline Vector vector(const json& j, Eigen::Index n, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of " + std::to_string(n) + " numbers");
  if (static_cast<Eigen::Index>(j.size()) != n)
    throw ConfigError(path + ": expected " + std::to_string(n) + " entries, got " + std::to_string(j.size()));
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = number(j[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Matrix matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError(path + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    m.row(r) = vector(j[static_cast<std::size_t>(r)], cols, path + "[" + std::to_string(r) + "]").transpose();
  return m;
}

template <class T, class Fn>
void optional_field(const json& j, const std::string& key, const std::string& path, T& out, Fn&& convert) {
  if (j.contains(key)) out = convert(j.at(key), join(path, key));
}

inline FieldSpec field_spec(const json& j, int n, int d, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected a field object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "derivation" && it.key() != "invariant" && it.key() != "two_sided" &&
        it.key() != "left_invariant")
      throw ConfigError(join(path, it.key()) + ": unknown field");
  FieldSpec f;
  f.derivation = Matrix::Zero(n, n);
  f.invariant = Vector::Zero(n);
  const bool two_sided = j.contains("two_sided");
  const bool left = j.contains("left_invariant");
  if (two_sided || left) {
    if (two_sided && left) throw ConfigError(path + ": give only one of two_sided and left_invariant");
    if (j.contains("derivation") || j.contains("invariant"))
      throw ConfigError(path + ": matrix forms exclude derivation/invariant");
    const std::string key = two_sided ? "two_sided" : "left_invariant";
    const json& m = j.at(key);
    const Matrix a = matrix(need(m, "A", join(path, key)), d, d, join(join(path, key), "A"));
    const std::string other = two_sided ? "C" : "B";
    const Matrix b = matrix(need(m, other, join(path, key)), d, d, join(join(path, key), other));
    f.two_sided_a = a;
    f.two_sided_c = two_sided ? b : Matrix(a - b);
    return f;
  }
  if (j.contains("derivation")) f.derivation = matrix(j.at("derivation"), n, n, join(path, "derivation"));
  if (j.contains("invariant")) f.invariant = vector(j.at("invariant"), n, join(path, "invariant"));
  return f;
}

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(join(path, it.key()) + ": unknown field");
  }
}

inline int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) line += text[i] == '\n' ? 1 : 0;
  return line;
}

}  // namespace detail

/// Dimensions (n, d) of a catalog chart without building it.
inline std::pair<int, int> chart_dims(const std::string& group, int param) {
  if (group == "Rn") return {param, param + 1};
  if (group == "Heisenberg3" || group == "SO3") return {3, 3};
  if (group == "SL2") return {3, 2};
  if (group == "AffPlus") return {2, 2};
  if (group == "GLnPlus") return {param * param, param};
  throw Error(Errc::unknown_group, "'" + group + "' is not in the catalog");
}

inline Scenario parse_scenario(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  reject_unknown(j, "", {"name", "group", "algebra", "tolerances", "seed", "system", "control_law", "initial",
                         "t_end", "dt", "samples_per_unit", "probe", "obstruction", "saturation", "larc", "verify"});
  Scenario s;
  if (j.contains("name")) s.name = j.at("name").get<std::string>();

  const json& g = need(j, "group", "");
  s.group = need(g, "name", "group").get<std::string>();
  if (g.contains("params")) {
    reject_unknown(g.at("params"), "group.params", {"n"});
    if (g.at("params").contains("n")) s.group_param = integer(g.at("params").at("n"), "group.params.n", 1);
  }
  if ((s.group == "Rn" || s.group == "GLnPlus") && s.group_param < 1)
    throw ConfigError("group.params.n: required for " + s.group);
  std::pair<int, int> dims;
  try {
    dims = chart_dims(s.group, s.group_param);
  } catch (const Error& e) {
    throw ConfigError(std::string("group.name: ") + e.what());
  }
  const auto [n, d] = dims;

  if (j.contains("algebra")) {
    try {
      s.algebra_override = algebra_data_from_json(j.at("algebra"));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("algebra: ") + e.what());
    }
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    reject_unknown(t, "tolerances", {"alg", "inner", "rank", "grp", "num", "hull_eps"});
    optional_field(t, "alg", "tolerances", s.tol.alg, positive);
    optional_field(t, "inner", "tolerances", s.tol.inner, positive);
    optional_field(t, "rank", "tolerances", s.tol.rank, positive);
    optional_field(t, "grp", "tolerances", s.tol.grp, positive);
    optional_field(t, "num", "tolerances", s.tol.num, positive);
    optional_field(t, "hull_eps", "tolerances", s.tol.hull_eps, positive);
  }
  if (j.contains("seed")) s.seed = seed_value(j.at("seed"), "seed");

  const json& sys = need(j, "system", "");
  reject_unknown(sys, "system", {"drift", "controls"});
  s.drift = sys.contains("drift") ? field_spec(sys.at("drift"), n, d, "system.drift")
                                  : FieldSpec{Matrix::Zero(n, n), Vector::Zero(n), {}, {}};
  if (sys.contains("controls")) {
    if (!sys.at("controls").is_array()) throw ConfigError("system.controls: expected an array");
    for (std::size_t i = 0; i < sys.at("controls").size(); ++i)
      s.controls.push_back(field_spec(sys.at("controls")[i], n, d, "system.controls[" + std::to_string(i) + "]"));
  }
  const auto m = static_cast<Eigen::Index>(s.controls.size());

  if (j.contains("control_law")) {
    const json& c = j.at("control_law");
    reject_unknown(c, "control_law", {"durations", "values"});
    const json& durs = need(c, "durations", "control_law");
    const json& vals = need(c, "values", "control_law");
    if (!durs.is_array() || !vals.is_array() || durs.size() != vals.size() || durs.empty())
      throw ConfigError("control_law: durations and values must be non-empty arrays of equal length");
    std::vector<double> durations;
    std::vector<Vector> values;
    for (std::size_t i = 0; i < durs.size(); ++i) {
      durations.push_back(positive(durs[i], "control_law.durations[" + std::to_string(i) + "]"));
      values.push_back(vector(vals[i], m, "control_law.values[" + std::to_string(i) + "]"));
    }
    s.control_law = ControlLaw(std::move(durations), std::move(values));
  }
  if (j.contains("initial")) s.initial = matrix(j.at("initial"), d, d, "initial");
  if (j.contains("t_end")) {
    s.t_end = number(j.at("t_end"), "t_end");
    if (s.t_end < 0.0) throw ConfigError("t_end: must be non-negative");
  }
  optional_field(j, "dt", "", s.dt, positive);
  if (j.contains("samples_per_unit")) s.samples_per_unit = integer(j.at("samples_per_unit"), "samples_per_unit", 1);

  if (j.contains("probe")) {
    const json& p = j.at("probe");
    reject_unknown(p, "probe", {"tau", "samples", "control_box", "max_segments", "random_directions"});
    optional_field(p, "tau", "probe", s.probe.tau, positive);
    if (p.contains("samples")) s.probe.samples = integer(p.at("samples"), "probe.samples", 1);
    optional_field(p, "control_box", "probe", s.probe.control_box, positive);
    if (p.contains("max_segments")) s.probe.max_segments = integer(p.at("max_segments"), "probe.max_segments", 1);
    if (p.contains("random_directions"))
      s.probe.random_directions = integer(p.at("random_directions"), "probe.random_directions", 0);
  }
  if (j.contains("obstruction")) {
    const json& o = j.at("obstruction");
    reject_unknown(o, "obstruction", {"samples", "horizon", "max_segments", "control_box"});
    if (o.contains("samples")) s.obstruction.samples = integer(o.at("samples"), "obstruction.samples", 1);
    optional_field(o, "horizon", "obstruction", s.obstruction.horizon, positive);
    if (o.contains("max_segments"))
      s.obstruction.max_segments = integer(o.at("max_segments"), "obstruction.max_segments", 1);
    optional_field(o, "control_box", "obstruction", s.obstruction.control_box, positive);
  }
  if (j.contains("saturation")) {
    const json& c = j.at("saturation");
    reject_unknown(c, "saturation", {"grid_size", "tau", "samples", "delta", "depth_max", "control_box", "max_segments"});
    SaturationParams sp;
    if (c.contains("grid_size")) sp.grid_size = integer(c.at("grid_size"), "saturation.grid_size", 1);
    optional_field(c, "tau", "saturation", sp.tau, positive);
    if (c.contains("samples")) sp.samples = integer(c.at("samples"), "saturation.samples", 1);
    optional_field(c, "delta", "saturation", sp.delta, positive);
    if (c.contains("depth_max")) sp.depth_max = integer(c.at("depth_max"), "saturation.depth_max", 1);
    optional_field(c, "control_box", "saturation", sp.control_box, positive);
    if (c.contains("max_segments")) sp.max_segments = integer(c.at("max_segments"), "saturation.max_segments", 1);
    s.saturation = sp;
  }
  if (j.contains("larc")) {
    reject_unknown(j.at("larc"), "larc", {"max_depth"});
    if (j.at("larc").contains("max_depth")) s.larc_max_depth = integer(j.at("larc").at("max_depth"), "larc.max_depth", 1);
  }
  if (j.contains("verify")) {
    reject_unknown(j.at("verify"), "verify", {"draws"});
    if (j.at("verify").contains("draws")) s.verify_draws = integer(j.at("verify").at("draws"), "verify.draws", 1);
  }
  s.probe.seed = s.seed;
  s.obstruction.seed = s.seed;
  if (s.saturation) s.saturation->seed = s.seed;
  return s;
}

/// Reads and parses a scenario file; syntax errors report the line.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }
  try {
    return parse_scenario(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Scenario with seed and tolerances overridden from the command line.
inline Scenario with_overrides(Scenario s, std::optional<std::uint64_t> seed, double tol_scale) {
  if (!(tol_scale > 0.0) || !std::isfinite(tol_scale)) throw ConfigError("--tol-scale: must be positive");
  if (seed) s.seed = *seed;
  s.tol = s.tol.scaled(tol_scale);
  s.obstruction.tolerance_scale *= tol_scale;
  s.probe.seed = s.seed;
  s.obstruction.seed = s.seed;
  if (s.saturation) s.saturation->seed = s.seed;
  return s;
}

/// Chart, affine system and initial point built from a scenario.
struct Model {
  ChartPtr chart;
  AffineSystem system;
  GroupElement initial;
};

inline AffineField build_field(const ChartPtr& chart, const FieldSpec& f) {
  if (f.two_sided_a) return AffineField::two_sided(chart, *f.two_sided_a, *f.two_sided_c);
  return AffineField(LinearField::make(chart, f.derivation), f.invariant);
}

inline Model build_model(const Scenario& s) {
  ChartPtr chart = make_group(s.group, s.group_param, s.tol);
  std::vector<AffineField> fields{build_field(chart, s.drift)};
  for (const auto& c : s.controls) fields.push_back(build_field(chart, c));
  AffineSystem sys(chart, std::move(fields));
  GroupElement g0 = s.initial ? chart->checked(GroupElement{*s.initial}) : chart->identity();
  return {chart, std::move(sys), std::move(g0)};
}

}  // namespace lieflow::cli

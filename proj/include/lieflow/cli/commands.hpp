// simulate / verify / analyze / reach. Each command writes its artifacts
// into an output directory and returns a RunSummary whose checks decide the
// exit status.
#pragma once

#include "lieflow/cli/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace lieflow::cli {

using ordered_json = nlohmann::ordered_json;

struct Check {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct RunSummary {
  std::string command;
  std::vector<Check> checks;
  std::vector<std::string> artifacts;
  ordered_json details = ordered_json::object();
  double wall_time = 0.0;  // reported on stdout only, so files stay reproducible

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  void check(std::string name, double residual, double tolerance) {
    checks.push_back({std::move(name), residual < tolerance, residual, tolerance});
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline ordered_json json_number(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

inline ordered_json to_json(const RunSummary& s, const Scenario& sc) {
  ordered_json j;
  j["command"] = s.command;
  j["scenario"] = sc.name;
  j["group"] = sc.group;
  j["seed"] = sc.seed;
  j["all_passed"] = s.all_passed();
  j["checks"] = ordered_json::array();
  for (const auto& c : s.checks) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["passed"] = c.passed;
    cj["residual"] = json_number(c.residual);
    cj["tolerance"] = c.tolerance;
    j["checks"].push_back(cj);
  }
  j["artifacts"] = s.artifacts;
  for (auto it = s.details.begin(); it != s.details.end(); ++it) j[it.key()] = it.value();
  return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::invalid_input, "cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  const auto d = traj.points.empty() ? 0 : traj.points.front().matrix.rows();
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) out += ",m" + std::to_string(r) + std::to_string(c);
  out += "\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out += format_double(traj.times[i]);
    const Matrix& m = traj.points[i].matrix;
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) out += "," + format_double(m(r, c));
    out += "\n";
  }
  return out;
}

inline std::string cloud_csv(const ReachCloud& cloud) {
  std::string out = "sample_index,t";
  for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i) out += ",x" + std::to_string(i);
  out += "\n";
  for (std::size_t k = 0; k < cloud.times.size(); ++k) {
    out += std::to_string(cloud.sample_index[k]) + "," + format_double(cloud.times[k]);
    for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i)
      out += "," + format_double(cloud.coords(i, static_cast<Eigen::Index>(k)));
    out += "\n";
  }
  return out;
}

inline ControlLaw control_or_default(const Scenario& s, const AffineSystem& sys) {
  if (s.control_law) return *s.control_law;
  if (sys.controls() != 0) throw ConfigError("control_law: required when the system has controls");
  return ControlLaw::constant(Vector(0), std::max(s.t_end, 1.0));
}

inline double max_deviation(const Trajectory& a, const Trajectory& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i)
    worst = std::max(worst, max_abs(a.points[i].matrix - b.points[i].matrix));
  return worst;
}

/// Structural checks of the algebra the scenario runs on. Returns false
/// when the algebra is unusable.
inline bool structural_checks(const Scenario& s, RunSummary& summary, double scale) {
  const AlgebraData data =
      s.algebra_override ? *s.algebra_override : make_group(s.group, s.group_param, s.tol)->algebra().data();
  StructuralResiduals r;
  try {
    r = structural_residuals(data);
  } catch (const Error& e) {
    summary.checks.push_back({"algebra_shape", false, std::numeric_limits<double>::infinity(), 0.0});
    summary.details["algebra_error"] = e.what();
    return false;
  }
  const double tol = s.tol.alg;
  summary.checks.push_back({"antisymmetry", r.antisymmetry == 0.0, r.antisymmetry, 0.0});
  summary.check("jacobi", r.jacobi, tol);
  summary.check("realization_consistency", r.realization, tol);
  bool ok = summary.all_passed();
  if (ok && s.algebra_override) {
    const LieAlgebra& chart_alg = make_group(s.group, s.group_param, s.tol)->algebra();
    double diff = data.dim == chart_alg.dim() ? 0.0 : std::numeric_limits<double>::infinity();
    if (std::isfinite(diff))
      for (std::size_t i = 0; i < data.constants.size(); ++i)
        diff = std::max(diff, std::abs(data.constants[i] - chart_alg.data().constants[i]));
    summary.check("algebra_matches_chart", diff, tol * scale);
    ok = summary.all_passed();
  }
  return ok;
}

}  // namespace detail

inline std::vector<std::string> method_names() { return {"concatenation", "decomposition", "rk4"}; }

inline RunSummary run_simulate(const Scenario& s, const std::filesystem::path& out_dir, double tol_scale = 1.0) {
  RunSummary summary;
  summary.command = "simulate";
  const Model model = build_model(s);
  const ControlLaw omega = detail::control_or_default(s, model.system);
  std::filesystem::create_directories(out_dir);

  std::vector<Trajectory> trajs;
  trajs.push_back(sampled_solution(model.system, omega, model.initial, s.t_end, SolutionMethod::concatenation,
                                   s.samples_per_unit));
  trajs.push_back(sampled_solution(model.system, omega, model.initial, s.t_end, SolutionMethod::decomposition,
                                   s.samples_per_unit));
  trajs.push_back(rk4_solution(model.system, omega, model.initial, s.t_end, s.dt, s.samples_per_unit));
  for (const auto& t : trajs) {
    const std::string file = std::string("trajectory_") + method_name(t.method) + ".csv";
    detail::write_text(out_dir / file, detail::trajectory_csv(t));
    summary.artifacts.push_back(file);
  }

  ordered_json table = ordered_json::array();
  for (std::size_t a = 0; a < trajs.size(); ++a)
    for (std::size_t b = a + 1; b < trajs.size(); ++b) {
      const double dev = detail::max_deviation(trajs[a], trajs[b]);
      ordered_json row;
      row["a"] = method_name(trajs[a].method);
      row["b"] = method_name(trajs[b].method);
      row["max_deviation"] = dev;
      table.push_back(row);
      summary.check(std::string("deviation_") + method_name(trajs[a].method) + "_" + method_name(trajs[b].method), dev,
                    1e-6 * tol_scale);
    }
  summary.details["deviations"] = table;
  ordered_json terminal = ordered_json::array();
  const Matrix& last = trajs.front().points.back().matrix;
  for (Eigen::Index r = 0; r < last.rows(); ++r)
    for (Eigen::Index c = 0; c < last.cols(); ++c) terminal.push_back(last(r, c));
  summary.details["terminal"] = terminal;
  return summary;
}

/// The property suite on the scenario's system: structural checks, then the
/// solution identities on seeded random draws.
inline RunSummary run_verify(const Scenario& s, const std::filesystem::path& out_dir, double tol_scale = 1.0) {
  RunSummary summary;
  summary.command = "verify";
  std::filesystem::create_directories(out_dir);
  if (!detail::structural_checks(s, summary, tol_scale)) return summary;

  const Model model = build_model(s);
  const GroupChart& chart = *model.chart;
  const AffineSystem& sys = model.system;
  const BilinearSystem bil = induced_bilinear(sys);
  const int n = chart.dim();
  const auto m = static_cast<Eigen::Index>(sys.controls());

  double leibniz = 0.0;
  for (const auto& f : sys.fields()) leibniz = std::max(leibniz, f.linear().derivation().leibniz_residual);
  summary.check("leibniz", leibniz, s.tol.alg);

  bool all_inner = true;
  for (const auto& f : sys.fields()) all_inner = all_inner && f.linear().derivation().is_inner();
  std::optional<RightInvariantSystem> inner_sys;
  if (all_inner) inner_sys = induced_right_invariant(bil);

  struct Draw {
    double cocycle_a = 0, cocycle_b = 0, inverse = 0, automorphism = 0, eq1 = 0, eq3 = 0, eq6 = 0, differential = 0,
           inner = 0, identity_fixed = 0;
  };
  const auto draws = parallel_map(static_cast<std::size_t>(s.verify_draws), [&](std::size_t i) {
    Rng rng = Rng::stream(s.seed, i);
    Draw d;
    const ControlLaw omega = m == 0 ? ControlLaw::constant(Vector(0), 3.0) : random_control_law(rng, m, 3, 1.0, 3.0);
    const double t = rng.uniform(0.0, 1.5);
    const double r = rng.uniform(0.0, 1.5);
    const GroupElement g = chart.exp(rng.in_ball(n, 0.8));
    const GroupElement h = chart.exp(rng.in_ball(n, 0.8));
    const GroupElement e = chart.identity();
    const auto diff = [](const GroupElement& a, const GroupElement& b) { return max_abs(a.matrix - b.matrix); };

    const GroupElement at = affine_solution(sys, omega, t, g);
    d.cocycle_a = diff(affine_solution(sys, omega, t + r, g), affine_solution(sys, shift(omega, t), r, at));
    const GroupElement bt = bilinear_solution(bil, omega, t, g);
    d.cocycle_b = diff(bilinear_solution(bil, omega, t + r, g), bilinear_solution(bil, shift(omega, t), r, bt));
    d.inverse = std::max(diff(affine_solution(sys, shift(omega, t), -t, at), g),
                         diff(bilinear_solution(bil, shift(omega, t), -t, bt), g));
    d.automorphism = diff(bilinear_solution(bil, omega, t, chart.mul(g, h)),
                          chart.mul(bt, bilinear_solution(bil, omega, t, h)));
    d.identity_fixed = diff(bilinear_solution(bil, omega, t, e), e);
    d.eq6 = diff(at, affine_solution(sys, omega, t, g, AffineMethod::decomposition));

    const Vector u = rng.uniform_vector(m, -1.0, 1.0);
    const AffineField field = sys.mixed_field(u);
    d.eq1 = diff(field.flow(t, g), chart.mul(field.flow(t, e), field.linear().flow(t, g)));
    const Vector y = rng.in_ball(n, 0.5);
    d.eq3 = diff(field.linear().flow(t, chart.exp(y)), chart.exp(field.linear().differential_at_identity(t) * y));

    const Vector x = rng.in_ball(n, 0.3);
    d.differential = diff(bilinear_solution(bil, omega, t, chart.exp(x)),
                          chart.exp(bilinear_differential_at_identity(bil, omega, t) * x));
    if (inner_sys) {
      const GroupElement c = inner_sys->solution(omega, t, e);
      d.inner = diff(bt, chart.mul(chart.mul(c, g), chart.inv(c)));
    }
    return d;
  });

  Draw worst;
  for (const auto& d : draws) {
    worst.cocycle_a = std::max(worst.cocycle_a, d.cocycle_a);
    worst.cocycle_b = std::max(worst.cocycle_b, d.cocycle_b);
    worst.inverse = std::max(worst.inverse, d.inverse);
    worst.automorphism = std::max(worst.automorphism, d.automorphism);
    worst.identity_fixed = std::max(worst.identity_fixed, d.identity_fixed);
    worst.eq1 = std::max(worst.eq1, d.eq1);
    worst.eq3 = std::max(worst.eq3, d.eq3);
    worst.eq6 = std::max(worst.eq6, d.eq6);
    worst.differential = std::max(worst.differential, d.differential);
    worst.inner = std::max(worst.inner, d.inner);
  }
  summary.check("cocycle_affine", worst.cocycle_a, 1e-8 * tol_scale);
  summary.check("cocycle_bilinear", worst.cocycle_b, 1e-8 * tol_scale);
  summary.check("inverse_relation", worst.inverse, 1e-8 * tol_scale);
  summary.check("automorphism", worst.automorphism, 1e-8 * tol_scale);
  summary.check("identity_fixed", worst.identity_fixed, 1e-8 * tol_scale);
  summary.check("affine_decomposition_single_field", worst.eq1, 1e-7 * tol_scale);
  summary.check("linear_flow_exp_relation", worst.eq3, 1e-8 * tol_scale);
  summary.check("decomposition_vs_concatenation", worst.eq6, 1e-8 * tol_scale);
  summary.check("differential_at_identity", worst.differential, 1e-7 * tol_scale);
  if (inner_sys) summary.check("inner_conjugation_relation", worst.inner, 1e-7 * tol_scale);

  // One RK4 cross-check over the scenario horizon.
  const ControlLaw omega = detail::control_or_default(s, sys);
  const double horizon = std::min(s.t_end, 3.0);
  const Trajectory rk = rk4_solution(sys, omega, model.initial, horizon, s.dt, 1);
  summary.check("rk4_agreement",
                max_abs(rk.points.back().matrix - affine_solution(sys, omega, horizon, model.initial).matrix),
                1e-6 * tol_scale);
  summary.details["draws"] = s.verify_draws;
  return summary;
}

inline RunSummary run_analyze(const Scenario& s, const std::filesystem::path& out_dir, double tol_scale = 1.0) {
  RunSummary summary;
  summary.command = "analyze";
  const Model model = build_model(s);
  std::filesystem::create_directories(out_dir);
  const AffineSystem& sys = model.system;
  ordered_json report;
  report["group"] = model.chart->name();
  report["semidirect_signs"] = to_json(semidirect_signs());
  summary.check("semidirect_sign_oracle", semidirect_signs().oracle_error, 1e-4 * tol_scale);

  const LarcReport larc = larc_report(sys, s.larc_max_depth);
  report["larc"] = to_json(larc);

  std::optional<ProbeReport> probe;
  try {
    probe = local_controllability_probe(sys, s.probe);
    report["probe"] = to_json(*probe);
  } catch (const Error& e) {
    if (e.code() != Errc::insufficient_samples) throw;
    report["probe"] = {{"error", e.what()}};
    summary.checks.push_back({"probe_samples", false, 0.0, 0.0});
  }

  try {
    const ObstructionReport obs = obstruction_report(induced_bilinear(sys), s.obstruction);
    report["obstruction"] = to_json(obs);
    if (obs.certificate_issued) summary.check("obstruction_certificate", obs.numeric_residual, obs.tolerance);
  } catch (const Error& e) {
    if (e.code() != Errc::certificate_failure) throw;
    report["obstruction"] = {{"error", e.what()}};
    summary.checks.push_back({"obstruction_certificate", false, std::numeric_limits<double>::infinity(), 0.0});
  }

  if (probe) {
    const ControllabilityVerdict verdict = controllability_verdict(sys, *probe);
    report["verdict"] = to_json(verdict);
    bool gate = true;
    if (verdict.controllable)
      for (const auto& h : verdict.hypotheses_checked) gate = gate && h.passed;
    summary.checks.push_back({"verdict_soundness", gate, gate ? 0.0 : 1.0, 0.5});
  }

  detail::write_json(out_dir / "report.json", report);
  summary.artifacts.push_back("report.json");
  return summary;
}

inline RunSummary run_reach(const Scenario& s, const std::filesystem::path& out_dir, double /*tol_scale*/ = 1.0) {
  RunSummary summary;
  summary.command = "reach";
  const Model model = build_model(s);
  std::filesystem::create_directories(out_dir);
  const AffineSystem& sys = model.system;
  ordered_json report;
  report["group"] = model.chart->name();

  const ReachClouds clouds = reachable_clouds(sys, s.probe);
  detail::write_text(out_dir / "cloud_fwd.csv", detail::cloud_csv(clouds.forward));
  detail::write_text(out_dir / "cloud_bwd.csv", detail::cloud_csv(clouds.backward));
  summary.artifacts.push_back("cloud_fwd.csv");
  summary.artifacts.push_back("cloud_bwd.csv");
  report["draws"] = s.probe.samples;
  report["forward_in_domain"] = clouds.forward.coords.cols();
  report["backward_in_domain"] = clouds.backward.coords.cols();
  try {
    report["probe"] = to_json(probe_clouds(clouds, model.chart->dim(), s.probe, model.chart->tol()));
  } catch (const Error& e) {
    if (e.code() != Errc::insufficient_samples) throw;
    report["probe"] = {{"skipped", e.what()}};
  }

  if (s.saturation) {
    const SaturationReport sat = compact_saturation_experiment(sys, *s.saturation);
    report["saturation"] = to_json(sat);
    double worst_drop = 0.0;
    for (std::size_t k = 1; k < sat.coverage.size(); ++k)
      worst_drop = std::max(worst_drop, sat.coverage[k - 1] - sat.coverage[k]);
    summary.checks.push_back({"coverage_monotone", sat.monotone, worst_drop, 0.0});
  }

  detail::write_json(out_dir / "report.json", report);
  summary.artifacts.push_back("report.json");
  return summary;
}

/// Runs a command and writes summary.json. Returns the process exit code.
inline int run_command(const std::string& command, const Scenario& s, const std::filesystem::path& out_dir,
                       double tol_scale, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  RunSummary summary;
  if (command == "simulate") summary = run_simulate(s, out_dir, tol_scale);
  else if (command == "verify") summary = run_verify(s, out_dir, tol_scale);
  else if (command == "analyze") summary = run_analyze(s, out_dir, tol_scale);
  else if (command == "reach") summary = run_reach(s, out_dir, tol_scale);
  else throw ConfigError("unknown command '" + command + "'");
  summary.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  summary.artifacts.push_back("summary.json");
  detail::write_json(out_dir / "summary.json", to_json(summary, s));

  for (const auto& c : summary.checks)
    log << (c.passed ? "ok   " : "FAIL ") << c.name << " residual=" << format_double(c.residual)
        << " tol=" << format_double(c.tolerance) << "\n";
  log << command << ": " << (summary.all_passed() ? "all checks passed" : "checks failed") << " in "
      << format_double(summary.wall_time) << " s\n";
  return summary.all_passed() ? 0 : 1;
}

}  // namespace lieflow::cli

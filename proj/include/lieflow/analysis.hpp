// Controllability analysis: the bracket of affine fields, rank saturation,
// the sampled local-controllability probe, invariant-subgroup certificates
// for bilinear systems, theorem verdicts and the compact saturation
// experiment.
#pragma once

#include "lieflow/lp.hpp"
#include "lieflow/systems.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace lieflow {

// ---- semidirect bracket ------------------------------------------------------

/// Affine field X_D + Y as a pair (D, Y).
struct SemidirectElement {
  Matrix d;
  Vector y;
};

/// Signs in ([D_p, D_q] s_d, s_c (D_p Y_q - D_q Y_p) + s_y [Y_p, Y_q]).
struct SemidirectSigns {
  int d = 1;
  int cross = 1;
  int y = 1;
  double oracle_error = 0.0;
};

inline SemidirectElement semidirect_bracket(const LieAlgebra& alg, const SemidirectElement& p,
                                            const SemidirectElement& q, const SemidirectSigns& s) {
  if (p.d.rows() != alg.dim() || q.d.rows() != alg.dim() || p.y.size() != alg.dim() || q.y.size() != alg.dim())
    throw Error(Errc::invalid_input, "semidirect_bracket: dimension mismatch");
  return {s.d * (p.d * q.d - q.d * p.d), s.cross * (p.d * q.y - q.d * p.y) + s.y * alg.bracket(p.y, q.y)};
}

/// Tangent matrix of the affine field (D, Y) at g.
inline Matrix semidirect_field(const ChartPtr& chart, const SemidirectElement& e, const GroupElement& g) {
  return LinearField::make(chart, e.d).eval(g) + chart->algebra().realize(e.y) * g.matrix;
}

namespace detail {

// Vector-field bracket, negated so that right-invariant fields reproduce
// the matrix commutator: -(DF_q[F_p] - DF_p[F_q]) by central differences.
inline Matrix fd_field_bracket(const ChartPtr& chart, const SemidirectElement& p, const SemidirectElement& q,
                               const GroupElement& g) {
  constexpr double h = 1e-5;
  const Matrix fp = semidirect_field(chart, p, g);
  const Matrix fq = semidirect_field(chart, q, g);
  const Matrix dq = (semidirect_field(chart, q, {g.matrix + h * fp}) - semidirect_field(chart, q, {g.matrix - h * fp})) /
                  (2.0 * h);
  const Matrix dp = (semidirect_field(chart, p, {g.matrix + h * fq}) - semidirect_field(chart, p, {g.matrix - h * fq})) /
                  (2.0 * h);
  return -(dq - dp);
}

inline SemidirectElement random_semidirect(const LieAlgebra& alg, Rng& rng) {
  const Matrix basis = derivation_basis(alg);
  const int n = alg.dim();
  const Vector mix = rng.normal_vector(basis.cols());
  Matrix d = (basis * mix).reshaped(n, n);
  return {d, rng.normal_vector(n)};
}

inline SemidirectSigns calibrate_semidirect_signs() {
  constexpr double kAgreement = 1e-4;
  std::array<double, 8> worst{};
  for (const char* name : {"Heisenberg3", "SO3"}) {
    const ChartPtr chart = make_group(name);
    const LieAlgebra& alg = chart->algebra();
    Rng rng(0x5EED);
    for (int trial = 0; trial < 4; ++trial) {
      const SemidirectElement p = random_semidirect(alg, rng);
      const SemidirectElement q = random_semidirect(alg, rng);
      const GroupElement g = chart->exp(rng.in_ball(alg.dim(), 0.5));
      const Matrix oracle = fd_field_bracket(chart, p, q, g);
      for (int mask = 0; mask < 8; ++mask) {
        const SemidirectSigns s{mask & 1 ? -1 : 1, mask & 2 ? -1 : 1, mask & 4 ? -1 : 1};
        const Matrix candidate = semidirect_field(chart, semidirect_bracket(alg, p, q, s), g);
        worst[static_cast<std::size_t>(mask)] =
            std::max(worst[static_cast<std::size_t>(mask)], max_abs(candidate - oracle));
      }
    }
  }
  int best = -1;
  for (int mask = 0; mask < 8; ++mask)
    if (worst[static_cast<std::size_t>(mask)] < kAgreement &&
        (best < 0 || worst[static_cast<std::size_t>(mask)] < worst[static_cast<std::size_t>(best)]))
      best = mask;
  if (best < 0) throw Error(Errc::convention_error, "no sign assignment matches the vector-field bracket");
  return {best & 1 ? -1 : 1, best & 2 ? -1 : 1, best & 4 ? -1 : 1, worst[static_cast<std::size_t>(best)]};
}

}  // namespace detail

/// Signs validated once against finite-difference brackets on Heisenberg3
/// and SO3, then reused.
inline const SemidirectSigns& semidirect_signs() {
  static const SemidirectSigns signs = detail::calibrate_semidirect_signs();
  return signs;
}

inline SemidirectElement semidirect_bracket(const LieAlgebra& alg, const SemidirectElement& p,
                                            const SemidirectElement& q) {
  return semidirect_bracket(alg, p, q, semidirect_signs());
}

// ---- rank condition ------------------------------------------------------------

struct LarcReport {
  int generated_dim = 0;
  int evaluation_rank_at_e = 0;
  bool full_rank = false;
  int generator_count = 0;
  int bracket_depth_used = 0;
  int algebra_dim = 0;
};

inline std::vector<SemidirectElement> system_generators(const AffineSystem& sys) {
  std::vector<SemidirectElement> out;
  for (const auto& f : sys.fields()) out.push_back({f.linear().matrix(), f.invariant().y});
  return out;
}

inline LarcReport larc_report(const AffineSystem& sys, int max_depth = 8) {
  if (max_depth < 1) throw Error(Errc::invalid_input, "larc_report: max_depth must be >= 1");
  const LieAlgebra& alg = sys.chart()->algebra();
  const int n = alg.dim();
  const double tol = alg.tol().rank;
  const auto flatten = [n](const SemidirectElement& e) {
    Vector v(n * n + n);
    v << e.d.reshaped(), e.y;
    return v;
  };

  std::vector<SemidirectElement> basis;
  Matrix columns(n * n + n, 0);
  const auto try_add = [&](SemidirectElement e) {
    const double norm = flatten(e).norm();
    if (norm < tol) return false;
    e.d /= norm;
    e.y /= norm;
    Matrix grown(columns.rows(), columns.cols() + 1);
    grown << columns, flatten(e);
    if (numerical_rank(grown, tol) <= columns.cols()) return false;
    columns = std::move(grown);
    basis.push_back(std::move(e));
    return true;
  };

  const auto generators = system_generators(sys);
  LarcReport report;
  report.generator_count = static_cast<int>(generators.size());
  report.algebra_dim = n;
  std::vector<SemidirectElement> layer;
  for (const auto& g : generators)
    if (try_add(g)) layer.push_back(basis.back());

  for (int depth = 1; depth <= max_depth && !layer.empty(); ++depth) {
    std::vector<SemidirectElement> next;
    for (const auto& g : generators)
      for (const auto& e : layer)
        if (try_add(semidirect_bracket(alg, g, e))) next.push_back(basis.back());
    if (next.empty()) break;
    report.bracket_depth_used = depth;
    layer = std::move(next);
  }

  report.generated_dim = static_cast<int>(basis.size());
  Matrix at_identity(n, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) at_identity.col(static_cast<Eigen::Index>(i)) = basis[i].y;
  report.evaluation_rank_at_e = basis.empty() ? 0 : static_cast<int>(numerical_rank(at_identity, tol));
  report.full_rank = report.evaluation_rank_at_e == n;
  return report;
}

// ---- reachable clouds and the probe -----------------------------------------

struct ProbeParams {
  double tau = 1.0;
  int samples = 2000;
  std::uint64_t seed = 0;
  double control_box = 1.0;
  int max_segments = 4;
  int random_directions = 32;
};

/// Endpoints in log coordinates. Column k of `coords` belongs to draw
/// `sample_index[k]` reached at signed time `times[k]`.
struct ReachCloud {
  std::vector<int> sample_index;
  std::vector<double> times;
  Matrix coords;
  int draws = 0;
};

struct ReachClouds {
  ReachCloud forward;
  ReachCloud backward;
};

namespace detail {

struct Endpoint {
  double t = 0.0;
  std::optional<Vector> forward;
  std::optional<Vector> backward;
};

inline std::optional<Vector> try_log(const GroupChart& chart, const GroupElement& g) {
  try {
    Vector v = chart.log(g);
    if (!v.allFinite()) return std::nullopt;
    return v;
  } catch (const Error& e) {
    if (e.code() == Errc::log_domain) return std::nullopt;
    throw;
  }
}

inline ReachCloud collect(const std::vector<Endpoint>& ends, bool forward, int n) {
  ReachCloud cloud;
  cloud.draws = static_cast<int>(ends.size());
  std::vector<Vector> cols;
  for (std::size_t i = 0; i < ends.size(); ++i) {
    const auto& v = forward ? ends[i].forward : ends[i].backward;
    if (!v) continue;
    cloud.sample_index.push_back(static_cast<int>(i));
    cloud.times.push_back(forward ? ends[i].t : -ends[i].t);
    cols.push_back(*v);
  }
  cloud.coords.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) cloud.coords.col(static_cast<Eigen::Index>(k)) = cols[k];
  return cloud;
}

}  // namespace detail

/// Forward endpoints phi^A(T, e, omega) and backward endpoints
/// phi^A(-T, e, theta_T omega), i.e. points steered into e in time T, for
/// random laws with T uniform in (0, tau].
inline ReachClouds reachable_clouds(const AffineSystem& sys, const ProbeParams& params) {
  if (!(params.tau > 0.0)) throw Error(Errc::invalid_input, "probe: tau must be positive");
  if (params.samples < 1) throw Error(Errc::invalid_input, "probe: samples must be positive");
  const GroupChart& chart = *sys.chart();
  const auto m = static_cast<Eigen::Index>(sys.controls());
  const GroupElement e = chart.identity();
  const auto ends = parallel_map(static_cast<std::size_t>(params.samples), [&](std::size_t i) {
    Rng rng = Rng::stream(params.seed, i);
    detail::Endpoint out;
    out.t = params.tau * (1.0 - rng.uniform());
    const ControlLaw omega = m == 0 ? ControlLaw::constant(Vector(0), out.t)
                                    : random_control_law(rng, m, params.max_segments, params.control_box, out.t);
    out.forward = detail::try_log(chart, affine_solution(sys, omega, out.t, e));
    out.backward = detail::try_log(chart, affine_solution(sys, shift(omega, out.t), -out.t, e));
    return out;
  });
  return {detail::collect(ends, true, chart.dim()), detail::collect(ends, false, chart.dim())};
}

struct CloudTest {
  int points = 0;
  int rank = 0;
  double hull_weight = 0.0;  // largest uniform lower bound on convex weights
  double margin = 0.0;       // min support value over the probe directions
  bool interior = false;
};

struct ProbeReport {
  double tau = 0.0;
  int samples = 0;
  CloudTest forward;
  CloudTest backward;
  bool forward_interior = false;
  bool backward_interior = false;
  bool locally_controllable = false;
  double margin = 0.0;
};

/// 2n axis directions plus `random_count` seeded unit vectors.
inline std::vector<Vector> probe_directions(int n, int random_count, std::uint64_t seed) {
  std::vector<Vector> dirs;
  for (int i = 0; i < n; ++i) {
    Vector v = Vector::Zero(n);
    v(i) = 1.0;
    dirs.push_back(v);
    dirs.push_back(-v);
  }
  Rng rng = Rng::stream(seed ^ 0xD1EC7104ULL, 0);
  for (int k = 0; k < random_count && n > 0; ++k) dirs.push_back(rng.unit_vector(n));
  return dirs;
}

inline CloudTest test_cloud(const Matrix& coords, const std::vector<Vector>& dirs, const Tolerances& tol) {
  CloudTest out;
  const auto n = coords.rows();
  out.points = static_cast<int>(coords.cols());
  if (coords.cols() == 0) {
    out.hull_weight = -std::numeric_limits<double>::infinity();
    out.margin = -std::numeric_limits<double>::infinity();
    return out;
  }
  const double scale = std::max(1.0, max_abs(coords));
  out.rank = static_cast<int>(numerical_rank(coords, tol.rank * scale));
  out.hull_weight = hull_weight_margin(coords);
  out.margin = std::numeric_limits<double>::infinity();
  for (const auto& u : dirs) out.margin = std::min(out.margin, (u.transpose() * coords).maxCoeff());
  out.interior = out.rank == n && out.hull_weight >= tol.hull_eps;
  return out;
}

inline ProbeReport probe_clouds(const ReachClouds& clouds, int n, const ProbeParams& params, const Tolerances& tol) {
  const int needed = n + 1;
  if (clouds.forward.coords.cols() < needed || clouds.backward.coords.cols() < needed)
    throw Error(Errc::insufficient_samples, "fewer than n+1 endpoints landed in the log domain (forward " +
                                                std::to_string(clouds.forward.coords.cols()) + ", backward " +
                                                std::to_string(clouds.backward.coords.cols()) + ")");
  const auto dirs = probe_directions(n, params.random_directions, params.seed);
  ProbeReport r;
  r.tau = params.tau;
  r.samples = params.samples;
  r.forward = test_cloud(clouds.forward.coords, dirs, tol);
  r.backward = test_cloud(clouds.backward.coords, dirs, tol);
  r.forward_interior = r.forward.interior;
  r.backward_interior = r.backward.interior;
  r.locally_controllable = r.forward_interior && r.backward_interior;
  r.margin = std::min(r.forward.margin, r.backward.margin);
  return r;
}

inline ProbeReport local_controllability_probe(const AffineSystem& sys, const ProbeParams& params,
                                               ReachClouds* clouds_out = nullptr) {
  ReachClouds clouds = reachable_clouds(sys, params);
  ProbeReport r = probe_clouds(clouds, sys.chart()->dim(), params, sys.chart()->tol());
  if (clouds_out) *clouds_out = std::move(clouds);
  return r;
}

// ---- obstruction certificates --------------------------------------------------

enum class ObstructionCase {
  abelian_compact_trivial_flows,
  solvable_derived_invariant,
  compact_semisimple_sphere_invariant,
  semisimple_conjugation_invariant,
  mixed_radical_invariant,
  euclidean_no_obstruction,
};

inline const char* case_name(ObstructionCase c) {
  switch (c) {
    case ObstructionCase::abelian_compact_trivial_flows: return "abelian_compact_trivial_flows";
    case ObstructionCase::solvable_derived_invariant: return "solvable_derived_invariant";
    case ObstructionCase::compact_semisimple_sphere_invariant: return "compact_semisimple_sphere_invariant";
    case ObstructionCase::semisimple_conjugation_invariant: return "semisimple_conjugation_invariant";
    case ObstructionCase::mixed_radical_invariant: return "mixed_radical_invariant";
    case ObstructionCase::euclidean_no_obstruction: return "euclidean_no_obstruction";
  }
  return "?";
}

struct ObstructionParams {
  int samples = 200;
  std::uint64_t seed = 0;
  double horizon = 3.0;
  int max_segments = 3;
  double control_box = 1.0;
  double tolerance_scale = 1.0;
};

struct ObstructionReport {
  ObstructionCase case_tag = ObstructionCase::euclidean_no_obstruction;
  std::string invariant_set_description;
  double numeric_residual = 0.0;
  double tolerance = 0.0;
  int samples = 0;
  bool certificate_issued = false;
  std::string verdict;
};

inline ObstructionCase select_obstruction_case(const GroupChart& chart) {
  const ClassFlags& f = chart.flags();
  if (chart.kind() == GroupKind::Rn || (f.abelian && !f.compact && f.simply_connected))
    return ObstructionCase::euclidean_no_obstruction;
  if (f.abelian && f.compact) return ObstructionCase::abelian_compact_trivial_flows;
  if (f.solvable) return ObstructionCase::solvable_derived_invariant;
  if (f.semisimple && f.compact) return ObstructionCase::compact_semisimple_sphere_invariant;
  if (f.semisimple) return ObstructionCase::semisimple_conjugation_invariant;
  return ObstructionCase::mixed_radical_invariant;
}

/// Samples solutions of Sigma_B and measures how far they move points off the
/// invariant set of the applicable case. Throws CertificateFailure when the
/// worst residual reaches the case tolerance.
inline ObstructionReport obstruction_report(const BilinearSystem& sys, const ObstructionParams& params = {}) {
  const GroupChart& chart = *sys.chart();
  const LieAlgebra& alg = chart.algebra();
  const int n = chart.dim();
  const auto m = static_cast<Eigen::Index>(sys.controls());
  ObstructionReport r;
  r.case_tag = select_obstruction_case(chart);
  r.samples = params.samples;
  const std::string not_controllable = "not controllable on G\\{e}: every solution map preserves this proper set";

  if (r.case_tag == ObstructionCase::euclidean_no_obstruction) {
    r.invariant_set_description = "none: Euclidean chart, the classical bilinear system";
    r.verdict = "no obstruction; controllability is decided by the probe";
    r.samples = 0;
    return r;
  }
  const auto& radical = chart.subgroups().radical_algebra;
  if (r.case_tag == ObstructionCase::mixed_radical_invariant && !radical) {
    r.invariant_set_description = "no catalog radical data";
    r.verdict = "abstain";
    r.samples = 0;
    return r;
  }

  double base_tol = 1e-9;
  switch (r.case_tag) {
    case ObstructionCase::abelian_compact_trivial_flows:
      r.invariant_set_description = "every point: solution maps are the identity";
      break;
    case ObstructionCase::solvable_derived_invariant:
      r.invariant_set_description = "derived subgroup exp([g,g]) of dimension " +
                                    std::to_string(chart.subgroups().derived_algebra.dim());
      break;
    case ObstructionCase::compact_semisimple_sphere_invariant:
      r.invariant_set_description = "bi-invariant spheres centered at e";
      base_tol = 1e-8;
      break;
    case ObstructionCase::semisimple_conjugation_invariant:
      r.invariant_set_description = "trace level sets (conjugation invariant)";
      base_tol = 1e-10;
      break;
    case ObstructionCase::mixed_radical_invariant:
      r.invariant_set_description = "radical subgroup of dimension " + std::to_string(radical->dim());
      break;
    case ObstructionCase::euclidean_no_obstruction: break;
  }
  r.tolerance = base_tol * params.tolerance_scale;

  const auto residuals = parallel_map(static_cast<std::size_t>(params.samples), [&](std::size_t i) {
    Rng rng = Rng::stream(params.seed, i);
    const double t = rng.uniform(0.0, params.horizon);
    const ControlLaw omega = m == 0 ? ControlLaw::constant(Vector(0), std::max(t, 1e-3))
                                    : random_control_law(rng, m, params.max_segments, params.control_box,
                                                         std::max(t, 1e-3));
    switch (r.case_tag) {
      case ObstructionCase::abelian_compact_trivial_flows: {
        const GroupElement g = chart.exp(rng.in_ball(n, 1.0));
        return max_abs(bilinear_solution(sys, omega, t, g).matrix - g.matrix);
      }
      case ObstructionCase::solvable_derived_invariant: {
        const Subspace& derived = chart.subgroups().derived_algebra;
        const Vector z = derived.basis() * rng.uniform_vector(derived.dim(), -1.0, 1.0);
        const GroupElement image = bilinear_solution(sys, omega, t, chart.exp(z));
        return derived.residual(chart.log(image));
      }
      case ObstructionCase::compact_semisimple_sphere_invariant: {
        const GroupElement g = chart.exp(rng.in_ball(n, 2.5));
        const Distance before = chart.distance(chart.identity(), g);
        const Distance after = chart.distance(chart.identity(), bilinear_solution(sys, omega, t, g));
        if (before.frobenius_fallback || after.frobenius_fallback) return std::numeric_limits<double>::infinity();
        return std::abs(after.value - before.value);
      }
      case ObstructionCase::semisimple_conjugation_invariant: {
        const GroupElement g = chart.exp(rng.in_ball(n, 1.0));
        return std::abs(bilinear_solution(sys, omega, t, g).matrix.trace() - g.matrix.trace());
      }
      case ObstructionCase::mixed_radical_invariant: {
        const Vector z = radical->basis() * rng.uniform_vector(radical->dim(), -0.5, 0.5);
        const Vector coords = alg.coords_of(
            matrix_log(bilinear_solution(sys, omega, t, chart.exp(z)).matrix, LogMode::principal));
        return radical->residual(coords);
      }
      case ObstructionCase::euclidean_no_obstruction: break;
    }
    return 0.0;
  });

  for (double v : residuals) r.numeric_residual = std::max(r.numeric_residual, v);
  if (!(r.numeric_residual < r.tolerance))
    throw Error(Errc::certificate_failure, std::string(case_name(r.case_tag)) + " residual " +
                                               std::to_string(r.numeric_residual) + " exceeds " +
                                               std::to_string(r.tolerance));
  r.certificate_issued = true;
  r.verdict = not_controllable;
  return r;
}

// ---- verdicts ------------------------------------------------------------------

enum class TheoremTag { compact_thm, solvable_thm, nilpotent_cor, none_applicable };

inline const char* theorem_name(TheoremTag t) {
  switch (t) {
    case TheoremTag::compact_thm: return "compact_thm";
    case TheoremTag::solvable_thm: return "solvable_thm";
    case TheoremTag::nilpotent_cor: return "nilpotent_cor";
    case TheoremTag::none_applicable: return "none_applicable";
  }
  return "?";
}

struct Hypothesis {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct ControllabilityVerdict {
  TheoremTag theorem_tag = TheoremTag::none_applicable;
  std::vector<Hypothesis> hypotheses_checked;
  std::vector<Hypothesis> chain;  // D^j(n_i) in n_{i+1}, informational
  bool controllable = false;
  std::string conclusion;
};

namespace detail {

inline Hypothesis probe_hypothesis(const ProbeReport& probe) {
  return {"locally_controllable_probe", probe.locally_controllable, probe.margin, 0.0};
}

}  // namespace detail

inline ControllabilityVerdict compact_verdict(const AffineSystem& sys, const ProbeReport& probe) {
  if (!sys.chart()->flags().compact) throw Error(Errc::wrong_class, sys.chart()->name() + " is not compact");
  ControllabilityVerdict v;
  v.theorem_tag = TheoremTag::compact_thm;
  v.hypotheses_checked.push_back({"compact", true, 0.0, 0.0});
  v.hypotheses_checked.push_back(detail::probe_hypothesis(probe));
  v.controllable = probe.locally_controllable;
  v.conclusion = v.controllable ? "controllable: compact group and locally controllable at e"
                                : "not certified: the probe did not confirm local controllability at e";
  return v;
}

inline ControllabilityVerdict solvable_verdict(const AffineSystem& sys, const ProbeReport& probe) {
  const GroupChart& chart = *sys.chart();
  if (!chart.flags().solvable) throw Error(Errc::wrong_class, chart.name() + " is not solvable");
  const LieAlgebra& alg = chart.algebra();
  const Tolerances& tol = chart.tol();
  ControllabilityVerdict v;
  bool structural = true;
  for (std::size_t j = 0; j < sys.fields().size(); ++j) {
    const Derivation& der = sys.fields()[j].linear().derivation();
    const std::string tag = "D" + std::to_string(j);
    const bool inner = der.is_inner();
    v.hypotheses_checked.push_back({tag + "_inner", inner, der.witness_residual, tol.inner});
    const auto index = is_nilpotent_operator(der.matrix, tol.alg);
    double power_norm = 0.0;
    if (!index) {
      Matrix power = Matrix::Identity(alg.dim(), alg.dim());
      for (int k = 0; k < alg.dim(); ++k) power *= der.matrix;
      power_norm = max_abs(power);
    }
    v.hypotheses_checked.push_back({tag + "_nilpotent", index.has_value(), power_norm, tol.alg});
    structural = structural && inner && index.has_value();
  }

  const Subspace& nil = chart.subgroups().nilradical_algebra;
  const auto series = subspace_series(alg, nil, SeriesKind::lower_central);
  for (std::size_t j = 0; j < sys.fields().size(); ++j) {
    const Matrix& d = sys.fields()[j].linear().matrix();
    for (std::size_t i = 0; i < series.size(); ++i) {
      const Subspace next = i + 1 < series.size() ? series[i + 1] : Subspace::zero(alg.dim());
      double worst = 0.0;
      for (int k = 0; k < series[i].dim(); ++k) worst = std::max(worst, next.residual(d * series[i].basis().col(k)));
      v.chain.push_back({"D" + std::to_string(j) + "(n_" + std::to_string(i + 1) + ")_in_n_" + std::to_string(i + 2),
                         worst < tol.rank, worst, tol.rank});
    }
  }

  v.hypotheses_checked.push_back(detail::probe_hypothesis(probe));
  if (!structural) {
    v.theorem_tag = TheoremTag::none_applicable;
    v.conclusion = "no theorem applies: some derivation of the induced bilinear system is not inner and nilpotent";
    return v;
  }
  v.theorem_tag = chart.flags().nilpotent ? TheoremTag::nilpotent_cor : TheoremTag::solvable_thm;
  v.controllable = probe.locally_controllable;
  v.conclusion = v.controllable
                     ? "controllable: inner nilpotent derivations and locally controllable at e"
                     : "not certified: the probe did not confirm local controllability at e";
  return v;
}

inline ControllabilityVerdict controllability_verdict(const AffineSystem& sys, const ProbeReport& probe) {
  const ClassFlags& f = sys.chart()->flags();
  if (f.compact) return compact_verdict(sys, probe);
  if (f.solvable) return solvable_verdict(sys, probe);
  ControllabilityVerdict v;
  v.hypotheses_checked.push_back(detail::probe_hypothesis(probe));
  v.conclusion = "no theorem applies: the chart is neither compact nor solvable";
  return v;
}

// ---- compact saturation ----------------------------------------------------------

struct SaturationParams {
  int grid_size = 10;
  double tau = 1.0;
  int samples = 500;
  std::uint64_t seed = 0;
  double delta = 0.25;
  int depth_max = 8;
  double control_box = 1.0;
  int max_segments = 4;
};

struct SaturationReport {
  int grid_points = 0;
  double delta = 0.0;
  std::vector<double> coverage;  // coverage[k-1] after product depth k
  bool monotone = true;
  std::optional<int> full_depth;  // first depth with coverage >= 0.99
};

/// Quasi-uniform SO(3) grid: Shoemake's map applied to the midpoint
/// lattice of the unit cube.
inline std::vector<GroupElement> so3_grid(int grid_size) {
  std::vector<GroupElement> out;
  for (int i = 0; i < grid_size; ++i)
    for (int j = 0; j < grid_size; ++j)
      for (int k = 0; k < grid_size; ++k) {
        const double u1 = (i + 0.5) / grid_size, u2 = (j + 0.5) / grid_size, u3 = (k + 0.5) / grid_size;
        const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
        const Eigen::Quaterniond q(b * std::cos(2.0 * M_PI * u3), a * std::sin(2.0 * M_PI * u2),
                                   a * std::cos(2.0 * M_PI * u2), b * std::sin(2.0 * M_PI * u3));
        out.push_back({Matrix(q.normalized().toRotationMatrix())});
      }
  return out;
}

/// Coverage of a grid by products of reachable increments. W is e plus
/// `samples` forward endpoints with horizon tau; C_0 = {e}; a grid point is
/// covered at depth k if it lies within delta of some w c with w in W and c
/// in C_{k-1}; C_k is e plus `samples` random such products. Coverage is
/// cumulative in k.
inline SaturationReport compact_saturation_experiment(const AffineSystem& sys, const SaturationParams& params) {
  const GroupChart& chart = *sys.chart();
  if (!chart.flags().compact) throw Error(Errc::wrong_class, chart.name() + " is not compact");
  if (params.grid_size < 1 || params.samples < 1 || params.depth_max < 1 || !(params.delta > 0.0))
    throw Error(Errc::invalid_input, "saturation: bad parameters");
  const auto m = static_cast<Eigen::Index>(sys.controls());
  const GroupElement e = chart.identity();

  std::vector<GroupElement> increments{e};
  const auto drawn = parallel_map(static_cast<std::size_t>(params.samples), [&](std::size_t i) {
    Rng rng = Rng::stream(params.seed, i);
    const double t = params.tau * (1.0 - rng.uniform());
    const ControlLaw omega = m == 0 ? ControlLaw::constant(Vector(0), t)
                                    : random_control_law(rng, m, params.max_segments, params.control_box, t);
    return affine_solution(sys, omega, t, e);
  });
  increments.insert(increments.end(), drawn.begin(), drawn.end());

  const bool so3 = chart.kind() == GroupKind::SO3;
  const std::vector<GroupElement> grid =
      so3 ? so3_grid(params.grid_size)
          : [&] {
              std::vector<GroupElement> g;
              for (int i = 0; i < params.grid_size * params.grid_size * params.grid_size; ++i)
                g.push_back(chart.random_near_identity(M_PI, params.seed ^ (0x6121DULL + static_cast<unsigned>(i))));
              return g;
            }();
  // For rotations, angle(P^T W C) < delta iff tr(W^T P C^T) > 1 + 2 cos(delta).
  const double trace_bound = 1.0 + 2.0 * std::cos(params.delta);

  SaturationReport report;
  report.grid_points = static_cast<int>(grid.size());
  report.delta = params.delta;
  std::vector<char> covered(grid.size(), 0);
  std::vector<GroupElement> cloud{e};
  Rng mixer = Rng::stream(params.seed ^ 0xC0FFEEULL, 0);

  for (int depth = 1; depth <= params.depth_max; ++depth) {
    const auto hits = parallel_map(grid.size(), [&](std::size_t p) -> char {
      if (covered[p]) return 1;
      for (const auto& c : cloud) {
        if (so3) {
          const Eigen::Matrix3d target = grid[p].matrix * c.matrix.transpose();
          for (const auto& w : increments)
            if ((w.matrix.array() * target.array()).sum() > trace_bound) return 1;
        } else {
          for (const auto& w : increments)
            if (chart.distance(chart.mul(w, c), grid[p]).value < params.delta) return 1;
        }
      }
      return 0;
    });
    covered = hits;
    std::size_t count = 0;
    for (char h : covered) count += h ? 1 : 0;
    report.coverage.push_back(static_cast<double>(count) / static_cast<double>(grid.size()));
    if (!report.full_depth && report.coverage.back() >= 0.99) report.full_depth = depth;

    std::vector<GroupElement> next{e};
    for (int s = 0; s < params.samples; ++s) {
      const auto& w = increments[static_cast<std::size_t>(mixer.uniform_int(0, static_cast<int>(increments.size()) - 1))];
      const auto& c = cloud[static_cast<std::size_t>(mixer.uniform_int(0, static_cast<int>(cloud.size()) - 1))];
      next.push_back(chart.project(chart.mul(w, c)));
    }
    cloud = std::move(next);
  }
  for (std::size_t k = 1; k < report.coverage.size(); ++k)
    if (report.coverage[k] < report.coverage[k - 1]) report.monotone = false;
  return report;
}

// ---- JSON --------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const SemidirectSigns& s) {
  nlohmann::ordered_json j;
  j["derivation_commutator"] = s.d;
  j["cross_term"] = s.cross;
  j["invariant_bracket"] = s.y;
  j["oracle_error"] = s.oracle_error;
  return j;
}

inline nlohmann::ordered_json to_json(const LarcReport& r) {
  nlohmann::ordered_json j;
  j["generated_dim"] = r.generated_dim;
  j["evaluation_rank_at_e"] = r.evaluation_rank_at_e;
  j["full_rank"] = r.full_rank;
  j["generator_count"] = r.generator_count;
  j["bracket_depth_used"] = r.bracket_depth_used;
  j["algebra_dim"] = r.algebra_dim;
  return j;
}

namespace detail {

// JSON has no infinities; non-finite values are written as null.
inline nlohmann::ordered_json number(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const CloudTest& c) {
  nlohmann::ordered_json j;
  j["points"] = c.points;
  j["rank"] = c.rank;
  j["hull_weight"] = detail::number(c.hull_weight);
  j["margin"] = detail::number(c.margin);
  j["interior"] = c.interior;
  return j;
}

inline nlohmann::ordered_json to_json(const ProbeReport& r) {
  nlohmann::ordered_json j;
  j["tau"] = r.tau;
  j["samples"] = r.samples;
  j["forward_interior"] = r.forward_interior;
  j["backward_interior"] = r.backward_interior;
  j["locally_controllable"] = r.locally_controllable;
  j["margin"] = detail::number(r.margin);
  j["forward"] = to_json(r.forward);
  j["backward"] = to_json(r.backward);
  return j;
}

inline nlohmann::ordered_json to_json(const ObstructionReport& r) {
  nlohmann::ordered_json j;
  j["case_tag"] = case_name(r.case_tag);
  j["invariant_set_description"] = r.invariant_set_description;
  j["numeric_residual"] = detail::number(r.numeric_residual);
  j["tolerance"] = r.tolerance;
  j["samples"] = r.samples;
  j["certificate_issued"] = r.certificate_issued;
  j["verdict"] = r.verdict;
  return j;
}

inline nlohmann::ordered_json to_json(const Hypothesis& h) {
  nlohmann::ordered_json j;
  j["name"] = h.name;
  j["passed"] = h.passed;
  j["residual"] = detail::number(h.residual);
  j["tolerance"] = h.tolerance;
  return j;
}

inline nlohmann::ordered_json to_json(const ControllabilityVerdict& v) {
  nlohmann::ordered_json j;
  j["theorem_tag"] = theorem_name(v.theorem_tag);
  j["hypotheses_checked"] = nlohmann::ordered_json::array();
  for (const auto& h : v.hypotheses_checked) j["hypotheses_checked"].push_back(to_json(h));
  j["nilradical_chain"] = nlohmann::ordered_json::array();
  for (const auto& h : v.chain) j["nilradical_chain"].push_back(to_json(h));
  j["controllable"] = v.controllable;
  j["conclusion"] = v.conclusion;
  return j;
}

inline nlohmann::ordered_json to_json(const SaturationReport& r) {
  nlohmann::ordered_json j;
  j["grid_points"] = r.grid_points;
  j["delta"] = r.delta;
  j["coverage"] = r.coverage;
  j["monotone"] = r.monotone;
  j["full_depth"] = r.full_depth ? nlohmann::ordered_json(*r.full_depth) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace lieflow

// Bilinear, affine and right-invariant control systems on a catalog chart.
// Solutions are concatenations of single-field flows over the constant
// pieces of the control; rk4_solution integrates the same ODE directly and
// serves as the independent oracle.
#pragma once

#include "lieflow/control.hpp"
#include "lieflow/fields.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lieflow {

namespace detail {

inline void check_control(const ControlLaw& omega, std::size_t m) {
  if (omega.size() == 0) throw Error(Errc::invalid_input, "empty control law");
  if (static_cast<std::size_t>(omega.dim()) != m)
    throw Error(Errc::invalid_input, "control dimension " + std::to_string(omega.dim()) + " does not match " +
                                         std::to_string(m) + " control fields");
}

}  // namespace detail

/// g' = X^0(g) + sum_j u_j X^j(g) with linear fields X^j.
class BilinearSystem {
 public:
  BilinearSystem(ChartPtr chart, std::vector<LinearField> fields) : chart_(std::move(chart)), fields_(std::move(fields)) {
    if (fields_.empty()) throw Error(Errc::invalid_input, "bilinear system needs a drift field");
    for (const auto& f : fields_)
      if (f.chart() != chart_) throw Error(Errc::invalid_input, "all fields must live on the system chart");
  }

  const ChartPtr& chart() const { return chart_; }
  const std::vector<LinearField>& fields() const { return fields_; }
  std::size_t controls() const { return fields_.size() - 1; }

  /// D_u = D^0 + sum_j u_j D^j.
  Matrix mixed_derivation(const Vector& u) const {
    check_u(u);
    Matrix d = fields_[0].matrix();
    for (std::size_t j = 1; j < fields_.size(); ++j) d += u(static_cast<Eigen::Index>(j - 1)) * fields_[j].matrix();
    return d;
  }

  /// X_u with its witness recomputed for D_u.
  LinearField mixed_field(const Vector& u) const {
    return LinearField::make(chart_, mixed_derivation(u)).with_step(fields_[0].step());
  }

 private:
  void check_u(const Vector& u) const {
    if (static_cast<std::size_t>(u.size()) != controls())
      throw Error(Errc::invalid_input, "control vector has wrong dimension");
    if (!u.allFinite()) throw Error(Errc::invalid_input, "control vector must be finite");
  }

  ChartPtr chart_;
  std::vector<LinearField> fields_;
};

/// g' = F^0(g) + sum_j u_j F^j(g) with affine fields F^j = X^j + Y^j.
class AffineSystem {
 public:
  AffineSystem(ChartPtr chart, std::vector<AffineField> fields) : chart_(std::move(chart)), fields_(std::move(fields)) {
    if (fields_.empty()) throw Error(Errc::invalid_input, "affine system needs a drift field");
    for (const auto& f : fields_)
      if (f.chart() != chart_) throw Error(Errc::invalid_input, "all fields must live on the system chart");
  }

  const ChartPtr& chart() const { return chart_; }
  const std::vector<AffineField>& fields() const { return fields_; }
  std::size_t controls() const { return fields_.size() - 1; }

  Matrix mixed_derivation(const Vector& u) const {
    check_u(u);
    Matrix d = fields_[0].linear().matrix();
    for (std::size_t j = 1; j < fields_.size(); ++j)
      d += u(static_cast<Eigen::Index>(j - 1)) * fields_[j].linear().matrix();
    return d;
  }

  Vector mixed_invariant(const Vector& u) const {
    check_u(u);
    Vector y = fields_[0].invariant().y;
    for (std::size_t j = 1; j < fields_.size(); ++j)
      y += u(static_cast<Eigen::Index>(j - 1)) * fields_[j].invariant().y;
    return y;
  }

  /// F_u = X_u + Y_u.
  AffineField mixed_field(const Vector& u) const {
    return AffineField(LinearField::make(chart_, mixed_derivation(u)).with_step(fields_[0].linear().step()),
                       mixed_invariant(u));
  }

 private:
  void check_u(const Vector& u) const {
    if (static_cast<std::size_t>(u.size()) != controls())
      throw Error(Errc::invalid_input, "control vector has wrong dimension");
    if (!u.allFinite()) throw Error(Errc::invalid_input, "control vector must be finite");
  }

  ChartPtr chart_;
  std::vector<AffineField> fields_;
};

/// g' = (Y^0 + sum_j u_j Y^j) g.
class RightInvariantSystem {
 public:
  RightInvariantSystem(ChartPtr chart, std::vector<Vector> fields) : chart_(std::move(chart)), fields_(std::move(fields)) {
    if (fields_.empty()) throw Error(Errc::invalid_input, "right-invariant system needs a drift field");
    for (const auto& y : fields_) chart_->algebra().check_element(y);
  }

  const ChartPtr& chart() const { return chart_; }
  const std::vector<Vector>& fields() const { return fields_; }
  std::size_t controls() const { return fields_.size() - 1; }

  Vector mixed(const Vector& u) const {
    if (static_cast<std::size_t>(u.size()) != controls())
      throw Error(Errc::invalid_input, "control vector has wrong dimension");
    Vector y = fields_[0];
    for (std::size_t j = 1; j < fields_.size(); ++j) y += u(static_cast<Eigen::Index>(j - 1)) * fields_[j];
    return y;
  }

  GroupElement solution(const ControlLaw& omega, double t, const GroupElement& g) const {
    detail::check_control(omega, controls());
    GroupElement x = g;
    for (const auto& p : solution_pieces(omega, t)) x = right_invariant_flow(*chart_, mixed(p.value), p.duration, x);
    return x;
  }

 private:
  ChartPtr chart_;
  std::vector<Vector> fields_;
};

/// phi^B(t, g, omega) as the ordered composition of the mixed linear flows.
inline GroupElement bilinear_solution(const BilinearSystem& sys, const ControlLaw& omega, double t,
                                      const GroupElement& g) {
  detail::check_control(omega, sys.controls());
  GroupElement x = g;
  for (const auto& p : solution_pieces(omega, t)) x = sys.mixed_field(p.value).flow(p.duration, x);
  return x;
}

/// (d phi^B_{t,omega})_e = e^{tau_k D_{omega_k}} ... e^{tau_1 D_{omega_1}}.
inline Matrix bilinear_differential_at_identity(const BilinearSystem& sys, const ControlLaw& omega, double t) {
  detail::check_control(omega, sys.controls());
  const int n = sys.chart()->dim();
  Matrix product = Matrix::Identity(n, n);
  for (const auto& p : solution_pieces(omega, t))
    product = matrix_exp(p.duration * sys.mixed_derivation(p.value)) * product;
  return product;
}

enum class AffineMethod { concatenation, decomposition };

inline BilinearSystem induced_bilinear(const AffineSystem& sys) {
  std::vector<LinearField> fields;
  fields.reserve(sys.fields().size());
  for (const auto& f : sys.fields()) fields.push_back(f.linear());
  return BilinearSystem(sys.chart(), std::move(fields));
}

/// phi^A(t, g, omega). concatenation composes the affine flows of the
/// pieces; decomposition left-translates phi^B(t, g, omega) by phi^A(t, e,
/// omega).
inline GroupElement affine_solution(const AffineSystem& sys, const ControlLaw& omega, double t, const GroupElement& g,
                                    AffineMethod method = AffineMethod::concatenation) {
  detail::check_control(omega, sys.controls());
  if (method == AffineMethod::concatenation) {
    GroupElement x = g;
    for (const auto& p : solution_pieces(omega, t)) x = sys.mixed_field(p.value).flow(p.duration, x);
    return x;
  }
  const GroupChart& chart = *sys.chart();
  const GroupElement at_identity = affine_solution(sys, omega, t, chart.identity(), AffineMethod::concatenation);
  return chart.mul(at_identity, bilinear_solution(induced_bilinear(sys), omega, t, g));
}

/// Sigma_I whose fields are the inner witnesses of Sigma_B. Throws NotInner
/// when some derivation has no witness.
inline RightInvariantSystem induced_right_invariant(const BilinearSystem& sys) {
  std::vector<Vector> witnesses;
  for (std::size_t j = 0; j < sys.fields().size(); ++j) {
    const auto& der = sys.fields()[j].derivation();
    if (!der.is_inner())
      throw Error(Errc::not_inner, "derivation " + std::to_string(j) + " is not inner (residual " +
                                       std::to_string(der.witness_residual) + ")");
    witnesses.push_back(*der.inner_witness);
  }
  return RightInvariantSystem(sys.chart(), std::move(witnesses));
}

enum class SolutionMethod { concatenation, decomposition, rk4 };

inline const char* method_name(SolutionMethod m) {
  switch (m) {
    case SolutionMethod::concatenation: return "concatenation";
    case SolutionMethod::decomposition: return "decomposition";
    case SolutionMethod::rk4: return "rk4";
  }
  return "?";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<GroupElement> points;
  ControlLaw control;
  SolutionMethod method = SolutionMethod::rk4;
};

/// Uniform sample times 0, 1/density, ... up to t_end (always included).
inline std::vector<double> sample_times(double t_end, int samples_per_unit) {
  if (!(t_end >= 0.0)) throw Error(Errc::invalid_input, "t_end must be non-negative");
  if (samples_per_unit < 1) throw Error(Errc::invalid_input, "samples_per_unit must be >= 1");
  const auto count = static_cast<long>(std::ceil(t_end * samples_per_unit - 1e-9));
  std::vector<double> times;
  for (long i = 0; i < count; ++i) times.push_back(static_cast<double>(i) / samples_per_unit);
  times.push_back(t_end);
  return times;
}

namespace detail {

inline AffineSystem as_affine(const AffineSystem& sys) { return sys; }

inline AffineSystem as_affine(const BilinearSystem& sys) {
  std::vector<AffineField> fields;
  for (const auto& f : sys.fields()) fields.emplace_back(f, Vector::Zero(sys.chart()->dim()));
  return AffineSystem(sys.chart(), std::move(fields));
}

}  // namespace detail

/// Fixed-step RK4 of g' = F_{omega(tau)}(g). Segment boundaries and sample
/// times are step boundaries; every interval between them is split into
/// ceil(length / dt) equal steps.
template <class System>
Trajectory rk4_solution(const System& system, const ControlLaw& omega, const GroupElement& g0, double t_end, double dt,
                        int samples_per_unit = 100) {
  if (!(dt > 0.0)) throw Error(Errc::invalid_input, "rk4_solution: dt must be positive");
  const AffineSystem sys = detail::as_affine(system);
  detail::check_control(omega, sys.controls());
  const GroupChart& chart = *sys.chart();
  Trajectory traj;
  traj.control = omega;
  traj.method = SolutionMethod::rk4;
  const std::vector<double> samples = sample_times(t_end, samples_per_unit);

  GroupElement x = chart.checked(g0);
  traj.times.push_back(0.0);
  traj.points.push_back(x);
  double now = 0.0;
  for (std::size_t s = 1; s < samples.size(); ++s) {
    for (const auto& p : omega.pieces(now, samples[s])) {
      const AffineField field = sys.mixed_field(p.value);
      x = rk4_integrate(
          chart, [&field](const GroupElement& y) { return field.eval(y); }, x, p.duration, dt);
    }
    now = samples[s];
    traj.times.push_back(now);
    traj.points.push_back(x);
  }
  return traj;
}

/// Closed-form solution sampled on the same grid as rk4_solution. Samples
/// advance through the cocycle identity phi(t_k+1) = phi(t_k+1 - t_k,
/// phi(t_k), theta_{t_k} omega); decomposition advances phi^A(., e) and
/// phi^B(., g0) separately and multiplies them at every sample.
inline Trajectory sampled_solution(const AffineSystem& sys, const ControlLaw& omega, const GroupElement& g0,
                                   double t_end, SolutionMethod method, int samples_per_unit = 100) {
  if (method == SolutionMethod::rk4) return rk4_solution(sys, omega, g0, t_end, kDefaultRk4Step, samples_per_unit);
  const GroupChart& chart = *sys.chart();
  const BilinearSystem bil = induced_bilinear(sys);
  Trajectory traj;
  traj.control = omega;
  traj.method = method;
  GroupElement x = chart.checked(g0);
  GroupElement at_identity = chart.identity();
  GroupElement linear = x;
  double now = 0.0;
  for (double t : sample_times(t_end, samples_per_unit)) {
    if (t > now) {
      const ControlLaw shifted = shift(omega, now);
      if (method == SolutionMethod::concatenation) {
        x = affine_solution(sys, shifted, t - now, x);
      } else {
        at_identity = affine_solution(sys, shifted, t - now, at_identity);
        linear = bilinear_solution(bil, shifted, t - now, linear);
        x = chart.mul(at_identity, linear);
      }
      now = t;
    }
    traj.times.push_back(t);
    traj.points.push_back(x);
  }
  return traj;
}

struct SolutionQuery {
  ControlLaw omega;
  double t = 0.0;
  GroupElement g;
};

/// Evaluates many (omega, t, g) queries concurrently; results follow input order.
inline std::vector<GroupElement> affine_solution_batch(const AffineSystem& sys, const std::vector<SolutionQuery>& queries,
                                                       AffineMethod method = AffineMethod::concatenation) {
  return parallel_map(queries.size(), [&](std::size_t i) {
    return affine_solution(sys, queries[i].omega, queries[i].t, queries[i].g, method);
  });
}

inline std::vector<GroupElement> bilinear_solution_batch(const BilinearSystem& sys,
                                                         const std::vector<SolutionQuery>& queries) {
  return parallel_map(queries.size(), [&](std::size_t i) {
    return bilinear_solution(sys, queries[i].omega, queries[i].t, queries[i].g);
  });
}

}  // namespace lieflow

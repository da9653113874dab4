// Catalog of concrete matrix Lie groups: Rn, Heisenberg3, SO3, SL2, AffPlus
// and GLnPlus, with exp/log charts, membership checks, metrics and the
// subgroup data (derived algebra, center, nilradical, series) consumed by
// the controllability certificates.
#pragma once

#include "lieflow/algebra.hpp"

#include <memory>
#include <optional>
#include <string>

namespace lieflow {

enum class GroupKind { Rn, Heisenberg3, SO3, SL2, AffPlus, GLnPlus };
enum class MetricKind { bi_invariant, chart_frobenius };

inline const char* group_kind_name(GroupKind k) {
  switch (k) {
    case GroupKind::Rn: return "Rn";
    case GroupKind::Heisenberg3: return "Heisenberg3";
    case GroupKind::SO3: return "SO3";
    case GroupKind::SL2: return "SL2";
    case GroupKind::AffPlus: return "AffPlus";
    case GroupKind::GLnPlus: return "GLnPlus";
  }
  return "?";
}

struct ClassFlags {
  bool abelian = false;
  bool nilpotent = false;
  bool solvable = false;
  bool semisimple = false;
  bool compact = false;
  bool simply_connected = false;
};

struct SubgroupData {
  Subspace derived_algebra;
  Subspace center_algebra;
  Subspace nilradical_algebra;
  std::optional<Subspace> radical_algebra;
  std::vector<Subspace> lower_central_series;
  std::vector<Subspace> derived_series;
};

struct GroupElement {
  Matrix matrix;
};

struct Distance {
  double value = 0.0;
  bool frobenius_fallback = false;
};

class GroupChart;
using ChartPtr = std::shared_ptr<const GroupChart>;

class GroupChart {
 public:
  GroupChart(GroupKind kind, int param, LieAlgebra algebra, ClassFlags catalog_flags, Subspace nilradical,
             std::optional<Subspace> radical)
      : kind_(kind), param_(param), algebra_(std::move(algebra)) {
    const int n = algebra_.dim();
    subgroups_.derived_series = subspace_series(algebra_, Subspace::full(n), SeriesKind::derived);
    subgroups_.lower_central_series = subspace_series(algebra_, Subspace::full(n), SeriesKind::lower_central);
    subgroups_.derived_algebra = subgroups_.derived_series.size() > 1 ? subgroups_.derived_series[1]
                                                                      : subgroups_.derived_series[0];
    subgroups_.center_algebra = center(algebra_);
    subgroups_.nilradical_algebra = std::move(nilradical);
    subgroups_.radical_algebra = std::move(radical);

    flags_ = catalog_flags;
    flags_.abelian = subgroups_.derived_algebra.dim() == 0;
    flags_.solvable = subgroups_.derived_series.back().dim() == 0;
    flags_.nilpotent = subgroups_.lower_central_series.back().dim() == 0;
    metric_ = flags_.compact ? MetricKind::bi_invariant : MetricKind::chart_frobenius;
  }

  GroupKind kind() const { return kind_; }
  std::string name() const { return group_kind_name(kind_); }
  int param() const { return param_; }
  const LieAlgebra& algebra() const { return algebra_; }
  const Tolerances& tol() const { return algebra_.tol(); }
  int dim() const { return algebra_.dim(); }
  int ambient_dim() const { return algebra_.ambient_dim(); }
  const ClassFlags& flags() const { return flags_; }
  MetricKind metric() const { return metric_; }
  const SubgroupData& subgroups() const { return subgroups_; }

  GroupElement identity() const { return {Matrix::Identity(ambient_dim(), ambient_dim())}; }

  GroupElement mul(const GroupElement& g, const GroupElement& h) const {
    check_shape(g);
    check_shape(h);
    return {g.matrix * h.matrix};
  }

  GroupElement inv(const GroupElement& g) const {
    check_shape(g);
    const Matrix& m = g.matrix;
    switch (kind_) {
      case GroupKind::SO3: return {m.transpose()};
      case GroupKind::SL2: {
        Matrix out(2, 2);
        out << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
        return {out};
      }
      case GroupKind::Heisenberg3: {
        const double a = m(0, 1), b = m(1, 2), c = m(0, 2);
        return heisenberg(-a, -b, -c + a * b);
      }
      case GroupKind::Rn: {
        Matrix out = m;
        out.topRightCorner(param_, 1) = -m.topRightCorner(param_, 1);
        return {out};
      }
      case GroupKind::AffPlus: {
        if (m(0, 0) == 0.0) throw Error(Errc::numerical_overflow, "inv: singular AffPlus element");
        Matrix out(2, 2);
        out << 1.0 / m(0, 0), -m(0, 1) / m(0, 0), 0.0, 1.0;
        return {out};
      }
      case GroupKind::GLnPlus: {
        Eigen::FullPivLU<Matrix> lu(m);
        if (!lu.isInvertible()) throw Error(Errc::numerical_overflow, "inv: singular matrix");
        return {lu.inverse()};
      }
    }
    throw Error(Errc::unknown_group, "inv");
  }

  GroupElement exp(const Vector& a) const {
    Matrix x = algebra_.realize(a);
    if (kind_ == GroupKind::Rn || kind_ == GroupKind::Heisenberg3)
      return {matrix_exp_nilpotent(x, ambient_dim())};
    return {matrix_exp(x)};
  }

  /// Chart logarithm. Global on Rn, Heisenberg3 and AffPlus; Rodrigues on
  /// SO3 away from half-turns; principal branch (||g - I|| < 1) otherwise.
  Vector log(const GroupElement& g) const {
    check_shape(g);
    const Matrix& m = g.matrix;
    switch (kind_) {
      case GroupKind::Rn:
      case GroupKind::Heisenberg3:
        return algebra_.coords_of(matrix_log(m, LogMode::nilpotent));
      case GroupKind::SO3: {
        const double cos_angle = std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
        const double angle = std::acos(cos_angle);
        if (angle > M_PI - 1e-6) throw Error(Errc::log_domain, "SO3 log: rotation angle at or near pi");
        const double s = std::sin(angle);
        const double factor = angle < 1e-6 ? 0.5 + angle * angle / 12.0 : angle / (2.0 * s);
        const Matrix skew = factor * (m - m.transpose());
        Vector v(3);
        v << skew(2, 1), skew(0, 2), skew(1, 0);
        return v;
      }
      case GroupKind::AffPlus: {
        const double a = m(0, 0), b = m(0, 1);
        if (!(a > 0.0)) throw Error(Errc::log_domain, "AffPlus log: non-positive diagonal");
        const double alpha = std::log(a);
        const double x = a - 1.0;
        double ratio;  // log(a) / (a - 1)
        if (std::abs(x) < 1e-5) {
          ratio = 1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0;
        } else {
          ratio = alpha / x;
        }
        Vector v(2);
        v << alpha, b * ratio;
        return v;
      }
      case GroupKind::SL2:
      case GroupKind::GLnPlus:
        return algebra_.coords_of(matrix_log(m, LogMode::principal));
    }
    throw Error(Errc::unknown_group, "log");
  }

  double membership_residual(const GroupElement& g) const {
    if (g.matrix.rows() != ambient_dim() || g.matrix.cols() != ambient_dim() || !all_finite(g.matrix))
      return std::numeric_limits<double>::infinity();
    const Matrix& m = g.matrix;
    const auto d = ambient_dim();
    switch (kind_) {
      case GroupKind::Rn: {
        Matrix pattern = m;
        pattern.topRightCorner(param_, 1).setZero();
        return max_abs(pattern - Matrix::Identity(d, d));
      }
      case GroupKind::Heisenberg3: {
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j <= i; ++j) worst = std::max(worst, std::abs(m(i, j) - (i == j ? 1.0 : 0.0)));
        return worst;
      }
      case GroupKind::SO3:
        return std::max(max_abs(m.transpose() * m - Matrix::Identity(3, 3)), std::abs(m.determinant() - 1.0));
      case GroupKind::SL2:
        return std::abs(m.determinant() - 1.0);
      case GroupKind::AffPlus:
        if (!(m(0, 0) > 0.0)) return std::numeric_limits<double>::infinity();
        return std::max(std::abs(m(1, 0)), std::abs(m(1, 1) - 1.0));
      case GroupKind::GLnPlus:
        return m.determinant() > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Nearest point of the chart's defining pattern (used after every RK4
  /// step). SO3: polar factor; SL2: determinant rescaling; unipotent and
  /// affine patterns: exact entries restored.
  GroupElement project(const GroupElement& g) const {
    Matrix m = g.matrix;
    const auto d = ambient_dim();
    switch (kind_) {
      case GroupKind::SO3: {
        // Orthogonal to working precision already: the SVD would only add noise.
        if (max_abs(m.transpose() * m - Matrix::Identity(d, d)) <= 8 * std::numeric_limits<double>::epsilon()) break;
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        m = svd.matrixU() * svd.matrixV().transpose();
        break;
      }
      case GroupKind::SL2: {
        const double det = m.determinant();
        if (det > 0.0) m /= std::sqrt(det);
        break;
      }
      case GroupKind::Heisenberg3:
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j <= i; ++j) m(i, j) = (i == j) ? 1.0 : 0.0;
        break;
      case GroupKind::Rn: {
        const Vector translation = m.topRightCorner(param_, 1);
        m = Matrix::Identity(d, d);
        m.topRightCorner(param_, 1) = translation;
        break;
      }
      case GroupKind::AffPlus:
        m(1, 0) = 0.0;
        m(1, 1) = 1.0;
        break;
      case GroupKind::GLnPlus:
        break;
    }
    return {m};
  }

  /// Accepts elements within tol.grp of the chart. SO3 elements with residual
  /// in (tol.grp, 1e-6) are re-orthonormalized; anything else is rejected.
  GroupElement checked(const GroupElement& g) const {
    const double r = membership_residual(g);
    if (r <= tol().grp) return g;
    if (kind_ == GroupKind::SO3 && r < 1e-6) return project(g);
    throw Error(Errc::invalid_input, name() + ": element violates membership (residual " + std::to_string(r) + ")");
  }

  Distance distance(const GroupElement& g, const GroupElement& h) const {
    if (metric_ == MetricKind::bi_invariant) {
      try {
        return {log(mul(inv(g), h)).norm(), false};
      } catch (const Error& e) {
        if (e.code() != Errc::log_domain) throw;
        return {(g.matrix - h.matrix).norm(), true};
      }
    }
    return {(g.matrix - h.matrix).norm(), false};
  }

  GroupElement random_near_identity(double radius, std::uint64_t seed) const {
    if (!(radius > 0.0)) throw Error(Errc::invalid_input, "radius must be positive");
    Rng rng(seed);
    return exp(rng.in_ball(dim(), radius));
  }

  /// Heisenberg3 element with matrix coordinates (a, b, c) on (X, Y, Z):
  /// [[1, a, c], [0, 1, b], [0, 0, 1]].
  static GroupElement heisenberg(double a, double b, double c) {
    Matrix m = Matrix::Identity(3, 3);
    m(0, 1) = a;
    m(1, 2) = b;
    m(0, 2) = c;
    return {m};
  }

  static Vector heisenberg_coords(const GroupElement& g) {
    Vector v(3);
    v << g.matrix(0, 1), g.matrix(1, 2), g.matrix(0, 2);
    return v;
  }

 private:
  void check_shape(const GroupElement& g) const {
    if (g.matrix.rows() != ambient_dim() || g.matrix.cols() != ambient_dim())
      throw Error(Errc::invalid_input, name() + ": element has wrong ambient size");
  }

  GroupKind kind_;
  int param_;
  LieAlgebra algebra_;
  ClassFlags flags_;
  MetricKind metric_;
  SubgroupData subgroups_;
};

namespace detail {

inline Matrix unit(int d, int r, int c) {
  Matrix m = Matrix::Zero(d, d);
  m(r, c) = 1.0;
  return m;
}

// Structure constants read back from realization commutators. Catalog
// brackets have integer constants, so rounding makes antisymmetry exact.
inline AlgebraData algebra_from_realization(std::string name, std::vector<Matrix> realization) {
  AlgebraData data;
  data.name = std::move(name);
  data.dim = static_cast<int>(realization.size());
  data.ambient_dim = static_cast<int>(realization.front().rows());
  const int n = data.dim;
  const int d = data.ambient_dim;
  Matrix map(d * d, n);
  for (int i = 0; i < n; ++i) map.col(i) = realization[i].reshaped();
  Eigen::CompleteOrthogonalDecomposition<Matrix> solver(map);
  data.constants.assign(static_cast<std::size_t>(n) * n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Matrix comm = realization[i] * realization[j] - realization[j] * realization[i];
      const Vector coords = solver.solve(comm.reshaped().eval());
      for (int k = 0; k < n; ++k) data.c(i, j, k) = std::round(coords(k));
    }
  }
  data.realization = std::move(realization);
  return data;
}

inline Subspace coordinate_span(int n, std::initializer_list<int> indices) {
  Matrix basis = Matrix::Zero(n, static_cast<Eigen::Index>(indices.size()));
  int c = 0;
  for (int i : indices) basis(i, c++) = 1.0;
  return Subspace(basis);
}

}  // namespace detail

/// Builds a catalog chart. `param` is n for Rn and GLnPlus and ignored
/// otherwise. Throws UnknownGroup for names outside the catalog.
inline ChartPtr make_group(const std::string& name, int param = 0, Tolerances tol = {}) {
  using detail::unit;
  if (name == "Rn") {
    if (param < 1) throw Error(Errc::invalid_input, "Rn requires n >= 1");
    std::vector<Matrix> re;
    for (int i = 0; i < param; ++i) re.push_back(unit(param + 1, i, param));
    ClassFlags f;
    f.simply_connected = true;
    return std::make_shared<const GroupChart>(GroupKind::Rn, param,
                                              LieAlgebra(detail::algebra_from_realization("Rn", re), tol), f,
                                              Subspace::full(param), Subspace::full(param));
  }
  if (name == "Heisenberg3") {
    // Basis order (X, Y, Z) with [X, Y] = Z.
    std::vector<Matrix> re{unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)};
    ClassFlags f;
    f.simply_connected = true;
    return std::make_shared<const GroupChart>(GroupKind::Heisenberg3, 3,
                                              LieAlgebra(detail::algebra_from_realization("Heisenberg3", re), tol),
                                              f, Subspace::full(3), Subspace::full(3));
  }
  if (name == "SO3") {
    Matrix l1 = unit(3, 2, 1) - unit(3, 1, 2);
    Matrix l2 = unit(3, 0, 2) - unit(3, 2, 0);
    Matrix l3 = unit(3, 1, 0) - unit(3, 0, 1);
    ClassFlags f;
    f.semisimple = true;
    f.compact = true;
    return std::make_shared<const GroupChart>(GroupKind::SO3, 3,
                                              LieAlgebra(detail::algebra_from_realization("SO3", {l1, l2, l3}), tol),
                                              f, Subspace::zero(3), Subspace::zero(3));
  }
  if (name == "SL2") {
    Matrix h = unit(2, 0, 0) - unit(2, 1, 1);
    ClassFlags f;
    f.semisimple = true;
    return std::make_shared<const GroupChart>(
        GroupKind::SL2, 2, LieAlgebra(detail::algebra_from_realization("SL2", {h, unit(2, 0, 1), unit(2, 1, 0)}), tol),
        f, Subspace::zero(3), Subspace::zero(3));
  }
  if (name == "AffPlus") {
    // Basis (A, B) with [A, B] = B; the nilradical is the line of B.
    ClassFlags f;
    f.simply_connected = true;
    return std::make_shared<const GroupChart>(
        GroupKind::AffPlus, 2, LieAlgebra(detail::algebra_from_realization("AffPlus", {unit(2, 0, 0), unit(2, 0, 1)}), tol),
        f, detail::coordinate_span(2, {1}), Subspace::full(2));
  }
  if (name == "GLnPlus") {
    if (param < 1) throw Error(Errc::invalid_input, "GLnPlus requires n >= 1");
    std::vector<Matrix> re;
    for (int i = 0; i < param; ++i)
      for (int j = 0; j < param; ++j) re.push_back(unit(param, i, j));
    ClassFlags f;
    f.simply_connected = param == 1;
    // gl(n) is reductive: radical and nilradical are both the scalar line.
    Matrix scalar = Matrix::Zero(param * param, 1);
    for (int i = 0; i < param; ++i) scalar(i * param + i, 0) = 1.0;
    Subspace scalars(scalar / scalar.norm());
    return std::make_shared<const GroupChart>(GroupKind::GLnPlus, param,
                                              LieAlgebra(detail::algebra_from_realization("GLnPlus", re), tol), f,
                                              scalars, scalars);
  }
  throw Error(Errc::unknown_group, "'" + name + "' is not in the catalog");
}

}  // namespace lieflow

// Lie-algebra kernel: structure constants, brackets, adjoint operators,
// derivations (Leibniz check, inner witnesses, nilpotency) and subalgebra
// series. Everything acts on coordinate vectors in the descriptor basis.
#pragma once

#include "lieflow/core.hpp"
#include "lieflow/matrix_functions.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lieflow {

/// Raw descriptor contents as loaded from JSON, before any validation.
struct AlgebraData {
  std::string name;
  int dim = 0;
  std::vector<double> constants;  // c[i][j][k] at (i * dim + j) * dim + k
  std::vector<Matrix> realization;
  int ambient_dim = 0;

  double c(int i, int j, int k) const { return constants[(static_cast<std::size_t>(i) * dim + j) * dim + k]; }
  double& c(int i, int j, int k) { return constants[(static_cast<std::size_t>(i) * dim + j) * dim + k]; }
};

struct StructuralResiduals {
  double antisymmetry = 0.0;  // must be exactly zero
  double jacobi = 0.0;
  double realization = 0.0;
};

namespace detail {

inline Vector data_bracket(const AlgebraData& d, const Vector& a, const Vector& b) {
  Vector out = Vector::Zero(d.dim);
  for (int i = 0; i < d.dim; ++i) {
    if (a(i) == 0.0) continue;
    for (int j = 0; j < d.dim; ++j) {
      const double w = a(i) * b(j);
      if (w == 0.0) continue;
      for (int k = 0; k < d.dim; ++k) out(k) += w * d.c(i, j, k);
    }
  }
  return out;
}

inline void check_shape(const AlgebraData& d) {
  if (d.dim <= 0) throw Error(Errc::invalid_input, "algebra dim must be positive");
  if (d.ambient_dim <= 0) throw Error(Errc::invalid_input, "ambient_dim must be positive");
  if (d.constants.size() != static_cast<std::size_t>(d.dim) * d.dim * d.dim)
    throw Error(Errc::invalid_input, "structure_constants must be dim x dim x dim");
  if (d.realization.size() != static_cast<std::size_t>(d.dim))
    throw Error(Errc::invalid_input, "realization must hold dim matrices");
  for (const auto& m : d.realization)
    if (m.rows() != d.ambient_dim || m.cols() != d.ambient_dim)
      throw Error(Errc::invalid_input, "realization matrices must be ambient_dim x ambient_dim");
  for (double v : d.constants)
    if (!std::isfinite(v)) throw Error(Errc::invalid_input, "non-finite structure constant");
}

}  // namespace detail

inline StructuralResiduals structural_residuals(const AlgebraData& d) {
  detail::check_shape(d);
  StructuralResiduals r;
  const int n = d.dim;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) r.antisymmetry = std::max(r.antisymmetry, std::abs(d.c(i, j, k) + d.c(j, i, k)));

  auto basis = [n](int i) {
    Vector e = Vector::Zero(n);
    e(i) = 1.0;
    return e;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Vector ei = basis(i), ej = basis(j), ek = basis(k);
        const Vector cyc = detail::data_bracket(d, ei, detail::data_bracket(d, ej, ek)) +
                           detail::data_bracket(d, ej, detail::data_bracket(d, ek, ei)) +
                           detail::data_bracket(d, ek, detail::data_bracket(d, ei, ej));
        r.jacobi = std::max(r.jacobi, cyc.norm());
      }
      Matrix expected = Matrix::Zero(d.ambient_dim, d.ambient_dim);
      for (int k = 0; k < n; ++k) expected += d.c(i, j, k) * d.realization[k];
      const Matrix commutator = d.realization[i] * d.realization[j] - d.realization[j] * d.realization[i];
      r.realization = std::max(r.realization, (commutator - expected).norm());
    }
  }
  return r;
}

/// A validated finite-dimensional real Lie algebra with a faithful matrix
/// realization. Immutable once constructed.
class LieAlgebra {
 public:
  explicit LieAlgebra(AlgebraData data, Tolerances tol = {}) : data_(std::move(data)), tol_(tol) {
    const StructuralResiduals r = structural_residuals(data_);
    if (r.antisymmetry != 0.0)
      throw Error(Errc::invalid_input, "structure constants of '" + data_.name + "' are not antisymmetric");
    if (r.jacobi >= tol_.alg)
      throw Error(Errc::invalid_input, "Jacobi identity fails for '" + data_.name + "' (residual " +
                                           std::to_string(r.jacobi) + ")");
    if (r.realization >= tol_.alg)
      throw Error(Errc::invalid_input, "realization of '" + data_.name + "' does not match its brackets");

    const int n = data_.dim;
    const int d = data_.ambient_dim;
    ad_basis_.reserve(n);
    for (int i = 0; i < n; ++i) {
      Matrix ad = Matrix::Zero(n, n);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) ad(k, j) = data_.c(i, j, k);
      ad_basis_.push_back(std::move(ad));
    }
    ad_map_ = Matrix(n * n, n);
    for (int i = 0; i < n; ++i) ad_map_.col(i) = ad_basis_[i].reshaped();
    ad_solver_.compute(ad_map_);

    realization_map_ = Matrix(d * d, n);
    for (int i = 0; i < n; ++i) realization_map_.col(i) = data_.realization[i].reshaped();
    realization_solver_.compute(realization_map_);
  }

  const std::string& name() const { return data_.name; }
  int dim() const { return data_.dim; }
  int ambient_dim() const { return data_.ambient_dim; }
  const Tolerances& tol() const { return tol_; }
  const AlgebraData& data() const { return data_; }
  double c(int i, int j, int k) const { return data_.c(i, j, k); }
  const Matrix& realization(int i) const { return data_.realization[i]; }

  Vector basis(int i) const {
    Vector e = Vector::Zero(dim());
    e(i) = 1.0;
    return e;
  }

  Vector bracket(const Vector& a, const Vector& b) const {
    check_element(a);
    check_element(b);
    return detail::data_bracket(data_, a, b);
  }

  /// Matrix of b -> [a, b] in the descriptor basis.
  Matrix ad(const Vector& a) const {
    check_element(a);
    Matrix out = Matrix::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i)
      if (a(i) != 0.0) out += a(i) * ad_basis_[i];
    return out;
  }

  /// Linear map W -> vec(ad W), column-major vec.
  const Matrix& ad_map() const { return ad_map_; }

  /// Minimum-norm least-squares solution of ad(W) = target.
  Vector ad_preimage(const Matrix& target) const { return ad_solver_.solve(target.reshaped().eval()); }

  /// Realization sum_i a_i E_i.
  Matrix realize(const Vector& a) const {
    check_element(a);
    Matrix out = Matrix::Zero(ambient_dim(), ambient_dim());
    for (int i = 0; i < dim(); ++i)
      if (a(i) != 0.0) out += a(i) * data_.realization[i];
    return out;
  }

  /// Coordinates of a tangent matrix at the identity (least squares).
  Vector coords_of(const Matrix& tangent) const {
    if (tangent.rows() != ambient_dim() || tangent.cols() != ambient_dim())
      throw Error(Errc::invalid_input, "coords_of: wrong ambient size");
    return realization_solver_.solve(tangent.reshaped().eval());
  }

  void check_element(const Vector& a) const {
    if (a.size() != dim()) throw Error(Errc::invalid_input, "element has wrong dimension for '" + name() + "'");
    if (!a.allFinite()) throw Error(Errc::invalid_input, "element has non-finite coordinates");
  }

 private:
  AlgebraData data_;
  Tolerances tol_;
  std::vector<Matrix> ad_basis_;
  Matrix ad_map_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> ad_solver_;
  Matrix realization_map_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> realization_solver_;
};

inline Vector bracket(const LieAlgebra& alg, const Vector& a, const Vector& b) { return alg.bracket(a, b); }

/// max over basis pairs of ||D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]||.
inline double leibniz_residual(const LieAlgebra& alg, const Matrix& d) {
  const int n = alg.dim();
  if (d.rows() != n || d.cols() != n) throw Error(Errc::invalid_input, "derivation has wrong size");
  if (!all_finite(d)) throw Error(Errc::invalid_input, "derivation has non-finite entries");
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vector ei = alg.basis(i), ej = alg.basis(j);
      const Vector lhs = d * alg.bracket(ei, ej);
      const Vector rhs = alg.bracket(d.col(i), ej) + alg.bracket(ei, d.col(j));
      worst = std::max(worst, (lhs - rhs).norm());
    }
  }
  return worst;
}

/// Smallest k <= n with max|D^k| < tol; empty when D is not nilpotent.
inline std::optional<int> is_nilpotent_operator(const Matrix& d, double tol) {
  const auto n = d.rows();
  Matrix power = d;
  for (Eigen::Index k = 1; k <= std::max<Eigen::Index>(n, 1); ++k) {
    if (max_abs(power) < tol) return static_cast<int>(k);
    power = power * d;
  }
  return std::nullopt;
}

struct InnerSolve {
  std::optional<Vector> witness;
  double residual = 0.0;
};

/// Operator on the algebra together with the certificates that classify it.
struct Derivation {
  Matrix matrix;
  double leibniz_residual = 0.0;
  std::optional<Vector> inner_witness;
  double witness_residual = std::numeric_limits<double>::infinity();
  std::optional<int> nilpotency_index;

  bool is_inner() const { return inner_witness.has_value(); }
};

/// Least-squares inner witness: W minimizing ||ad(W) - D||_F (minimum-norm
/// representative, so center directions are dropped). The witness is
/// returned only when the residual is below tol.inner.
inline InnerSolve solve_inner_witness(const Matrix& d, const LieAlgebra& alg) {
  if (leibniz_residual(alg, d) >= alg.tol().alg) throw Error(Errc::not_a_derivation, "Leibniz rule fails");
  InnerSolve out;
  Vector w = alg.ad_preimage(d);
  out.residual = (alg.ad(w) - d).norm();
  if (out.residual < alg.tol().inner) out.witness = std::move(w);
  return out;
}

inline InnerSolve solve_inner_witness(const Derivation& d, const LieAlgebra& alg) {
  return solve_inner_witness(d.matrix, alg);
}

/// Validates and classifies an operator. Throws NotADerivation when the
/// Leibniz residual is not below tol.alg.
inline Derivation make_derivation(const LieAlgebra& alg, const Matrix& d) {
  Derivation out;
  out.matrix = d;
  out.leibniz_residual = leibniz_residual(alg, d);
  if (out.leibniz_residual >= alg.tol().alg)
    throw Error(Errc::not_a_derivation, "Leibniz residual " + std::to_string(out.leibniz_residual));
  InnerSolve inner = solve_inner_witness(d, alg);
  out.inner_witness = std::move(inner.witness);
  out.witness_residual = inner.residual;
  out.nilpotency_index = is_nilpotent_operator(d, alg.tol().alg);
  return out;
}

inline Derivation ad_matrix(const LieAlgebra& alg, const Vector& a) {
  Derivation out;
  out.matrix = alg.ad(a);
  out.leibniz_residual = leibniz_residual(alg, out.matrix);
  out.inner_witness = a;
  out.witness_residual = 0.0;
  out.nilpotency_index = is_nilpotent_operator(out.matrix, alg.tol().alg);
  return out;
}

/// Basis of Der(g) as column-major vec(D) columns (n^2 x k).
inline Matrix derivation_basis(const LieAlgebra& alg) {
  const int n = alg.dim();
  // Each Leibniz equation is linear in the n^2 entries of D.
  Matrix system = Matrix::Zero(n * n * n, n * n);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      Matrix unit = Matrix::Zero(n, n);
      unit(p, q) = 1.0;
      const int col = q * n + p;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const Vector ei = alg.basis(i), ej = alg.basis(j);
          const Vector r = unit * alg.bracket(ei, ej) - alg.bracket(unit.col(i), ej) - alg.bracket(ei, unit.col(j));
          system.block((i * n + j) * n, col, n, 1) = r;
        }
      }
    }
  }
  return null_space(system, 1e-10);
}

/// Sign s with (d/dg)(e^{tW} g e^{-tW})|_e = e^{t s ad(W)}, checked by central
/// differences on the realization. Returns +1 when both signs are consistent.
inline int fix_inner_sign(const LieAlgebra& alg, const Vector& w, double t) {
  const int n = alg.dim();
  const Matrix left = matrix_exp(t * alg.realize(w));
  const Matrix right = matrix_exp(-t * alg.realize(w));
  const double h = 1e-5;
  Matrix jacobian(n, n);
  for (int j = 0; j < n; ++j) {
    const Matrix ej = alg.realize(alg.basis(j));
    const Matrix plus = left * matrix_exp(h * ej) * right;
    const Matrix minus = left * matrix_exp(-h * ej) * right;
    jacobian.col(j) = alg.coords_of((plus - minus) / (2.0 * h));
  }
  const Matrix ad = alg.ad(w);
  const double scale = std::max(1.0, max_abs(jacobian));
  const double fd_tol = std::max(alg.tol().num, 1e-7) * scale;
  const bool plus_ok = max_abs(jacobian - matrix_exp(t * ad)) < fd_tol;
  const bool minus_ok = max_abs(jacobian - matrix_exp(-t * ad)) < fd_tol;
  if (plus_ok) return +1;
  if (minus_ok) return -1;
  throw Error(Errc::convention_error, "conjugation differential matches neither e^{t ad W} nor e^{-t ad W}");
}

/// Convention check with a fixed generic witness and t = 1.
inline int fix_inner_sign(const LieAlgebra& alg) {
  Vector w(alg.dim());
  for (int i = 0; i < alg.dim(); ++i) w(i) = 0.3 + 0.4 * static_cast<double>(i + 1) / alg.dim();
  return fix_inner_sign(alg, w / std::max(1.0, w.norm()), 1.0);
}

/// Subspace of the algebra, stored as an orthonormal column basis.
class Subspace {
 public:
  Subspace() = default;
  explicit Subspace(Matrix orthonormal_basis) : basis_(std::move(orthonormal_basis)) {}

  static Subspace span(const Matrix& columns, double tol_rank) { return Subspace(orthonormal_span(columns, tol_rank)); }
  static Subspace full(int n) { return Subspace(Matrix::Identity(n, n)); }
  static Subspace zero(int n) { return Subspace(Matrix(n, 0)); }

  const Matrix& basis() const { return basis_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  int ambient() const { return static_cast<int>(basis_.rows()); }

  Vector project(const Vector& v) const { return basis_ * (basis_.transpose() * v); }

  /// Distance of v from the subspace.
  double residual(const Vector& v) const { return (v - project(v)).norm(); }

  /// Largest residual of any basis vector of `other`.
  double containment_residual(const Subspace& other) const {
    double worst = 0.0;
    for (int i = 0; i < other.dim(); ++i) worst = std::max(worst, residual(other.basis_.col(i)));
    return worst;
  }

 private:
  Matrix basis_;
};

/// Span of [a, b] for a in `left`, b in `right`.
inline Subspace bracket_span(const LieAlgebra& alg, const Subspace& left, const Subspace& right) {
  Matrix cols(alg.dim(), left.dim() * right.dim());
  int c = 0;
  for (int i = 0; i < left.dim(); ++i)
    for (int j = 0; j < right.dim(); ++j) cols.col(c++) = alg.bracket(left.basis().col(i), right.basis().col(j));
  return Subspace::span(cols, alg.tol().rank);
}

inline double closure_residual(const LieAlgebra& alg, const Subspace& s) {
  double worst = 0.0;
  for (int i = 0; i < s.dim(); ++i)
    for (int j = 0; j < s.dim(); ++j)
      worst = std::max(worst, s.residual(alg.bracket(s.basis().col(i), s.basis().col(j))));
  return worst;
}

enum class SeriesKind { derived, lower_central };

/// Derived (h_{i+1} = [h_i, h_i]) or lower central (n_{i+1} = [n, n_i])
/// series, stopping at the zero subspace or the first repeated dimension.
inline std::vector<Subspace> subspace_series(const LieAlgebra& alg, const Subspace& start, SeriesKind kind) {
  if (start.ambient() != alg.dim()) throw Error(Errc::invalid_input, "subspace ambient dimension mismatch");
  if (closure_residual(alg, start) >= alg.tol().alg)
    throw Error(Errc::not_a_subalgebra, "start subspace is not closed under the bracket");
  std::vector<Subspace> series{start};
  while (series.back().dim() > 0) {
    const Subspace& current = series.back();
    Subspace next = kind == SeriesKind::derived ? bracket_span(alg, current, current)
                                                : bracket_span(alg, start, current);
    if (next.dim() == current.dim()) break;
    series.push_back(std::move(next));
  }
  return series;
}

/// Center {W : ad(W) = 0}.
inline Subspace center(const LieAlgebra& alg) { return Subspace(null_space(alg.ad_map(), 1e-10)); }

// ---- JSON ------------------------------------------------------------------

inline AlgebraData algebra_data_from_json(const nlohmann::json& j) {
  AlgebraData d;
  try {
    d.name = j.at("name").get<std::string>();
    d.dim = j.at("dim").get<int>();
    d.ambient_dim = j.at("ambient_dim").get<int>();
    const auto& sc = j.at("structure_constants");
    if (d.dim <= 0 || d.ambient_dim <= 0) throw Error(Errc::invalid_input, "dim and ambient_dim must be positive");
    if (!sc.is_array() || sc.size() != static_cast<std::size_t>(d.dim))
      throw Error(Errc::invalid_input, "structure_constants: expected dim x dim x dim nested arrays");
    d.constants.assign(static_cast<std::size_t>(d.dim) * d.dim * d.dim, 0.0);
    for (int i = 0; i < d.dim; ++i) {
      if (sc[i].size() != static_cast<std::size_t>(d.dim))
        throw Error(Errc::invalid_input, "structure_constants[" + std::to_string(i) + "] has wrong length");
      for (int jj = 0; jj < d.dim; ++jj) {
        if (sc[i][jj].size() != static_cast<std::size_t>(d.dim))
          throw Error(Errc::invalid_input, "structure_constants[" + std::to_string(i) + "][" + std::to_string(jj) +
                                               "] has wrong length");
        for (int k = 0; k < d.dim; ++k) d.c(i, jj, k) = sc[i][jj][k].get<double>();
      }
    }
    const auto& re = j.at("realization");
    if (!re.is_array() || re.size() != static_cast<std::size_t>(d.dim))
      throw Error(Errc::invalid_input, "realization: expected dim matrices");
    for (int i = 0; i < d.dim; ++i) {
      Matrix m(d.ambient_dim, d.ambient_dim);
      if (re[i].size() != static_cast<std::size_t>(d.ambient_dim))
        throw Error(Errc::invalid_input, "realization[" + std::to_string(i) + "] has wrong row count");
      for (int r = 0; r < d.ambient_dim; ++r) {
        if (re[i][r].size() != static_cast<std::size_t>(d.ambient_dim))
          throw Error(Errc::invalid_input, "realization[" + std::to_string(i) + "][" + std::to_string(r) +
                                               "] has wrong column count");
        for (int c = 0; c < d.ambient_dim; ++c) m(r, c) = re[i][r][c].get<double>();
      }
      d.realization.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_input, std::string("algebra descriptor: ") + e.what());
  }
  return d;
}

inline nlohmann::ordered_json algebra_data_to_json(const AlgebraData& d) {
  nlohmann::ordered_json j;
  j["name"] = d.name;
  j["dim"] = d.dim;
  nlohmann::ordered_json sc = nlohmann::ordered_json::array();
  for (int i = 0; i < d.dim; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int jj = 0; jj < d.dim; ++jj) {
      nlohmann::ordered_json col = nlohmann::ordered_json::array();
      for (int k = 0; k < d.dim; ++k) col.push_back(d.c(i, jj, k));
      row.push_back(std::move(col));
    }
    sc.push_back(std::move(row));
  }
  j["structure_constants"] = std::move(sc);
  nlohmann::ordered_json re = nlohmann::ordered_json::array();
  for (const auto& m : d.realization) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < m.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    re.push_back(std::move(rows));
  }
  j["realization"] = std::move(re);
  j["ambient_dim"] = d.ambient_dim;
  return j;
}

}  // namespace lieflow

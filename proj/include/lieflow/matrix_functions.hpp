// Dense matrix functions used to realize group exponentials, logarithms and
// flow differentials, plus the rank-revealing span helpers shared by the
// algebra and analysis layers.
#pragma once

#include "lieflow/core.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <optional>

namespace lieflow {

enum class LogMode { principal, nilpotent };

inline double norm_1(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff();
}

inline double norm_2(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

namespace detail {

inline bool strictly_triangular(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  bool upper = true;
  bool lower = true;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) == 0.0) continue;
      if (j <= i) upper = false;
      if (j >= i) lower = false;
    }
  }
  return upper || lower;
}

// Taylor polynomial of degree `order`, Horner form.
inline Matrix taylor_exp(const Matrix& m, int order) {
  const auto n = m.rows();
  Matrix acc = Matrix::Identity(n, n);
  for (int k = order; k >= 1; --k) {
    acc = Matrix::Identity(n, n) + (m * acc) / static_cast<double>(k);
  }
  return acc;
}

}  // namespace detail

/// exp(M) for M nilpotent with M^index = 0: the series is summed exactly.
inline Matrix matrix_exp_nilpotent(const Matrix& m, int index) {
  const auto n = m.rows();
  Matrix result = Matrix::Identity(n, n);
  Matrix power = Matrix::Identity(n, n);
  double factorial = 1.0;
  for (int k = 1; k < index; ++k) {
    power = power * m;
    factorial *= k;
    result += power / factorial;
  }
  return result;
}

/// Matrix exponential by scaling and squaring around a degree-18 Taylor core
/// (scaled so that ||M / 2^s||_1 <= 0.5). Strictly triangular input takes the
/// terminating series.
inline Matrix matrix_exp(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(Errc::invalid_input, "matrix_exp: non-square input");
  if (!all_finite(m)) throw Error(Errc::numerical_overflow, "matrix_exp: non-finite input");
  const auto n = m.rows();
  if (n == 0) return m;
  if (detail::strictly_triangular(m)) return matrix_exp_nilpotent(m, static_cast<int>(n));

  const double norm = norm_1(m);
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  if (squarings > 1000) throw Error(Errc::numerical_overflow, "matrix_exp: norm too large");
  Matrix result = detail::taylor_exp(m / std::ldexp(1.0, squarings), 18);
  for (int i = 0; i < squarings; ++i) result = result * result;
  if (!all_finite(result)) throw Error(Errc::numerical_overflow, "matrix_exp: result overflowed");
  return result;
}

/// Principal square root by the Denman-Beavers iteration. Throws LogDomainError
/// when the iteration does not settle (eigenvalues on the closed negative axis).
inline Matrix matrix_sqrt(const Matrix& a) {
  const auto n = a.rows();
  Matrix y = a;
  Matrix z = Matrix::Identity(n, n);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::PartialPivLU<Matrix> lu_y(y);
    Eigen::PartialPivLU<Matrix> lu_z(z);
    Matrix y_next = 0.5 * (y + lu_z.inverse());
    Matrix z_next = 0.5 * (z + lu_y.inverse());
    if (!all_finite(y_next) || !all_finite(z_next)) break;
    const double change = norm_1(y_next - y);
    y = std::move(y_next);
    z = std::move(z_next);
    if (change <= 1e-15 * std::max(1.0, norm_1(y))) return y;
  }
  throw Error(Errc::log_domain, "matrix_sqrt: iteration did not converge");
}

/// Matrix logarithm.
///
/// principal: requires ||g - I||_2 < 1. Square roots are taken until
/// ||g^(1/2^k) - I||_1 <= 0.25, the Mercator series is summed there and the
/// result is scaled back by 2^k.
/// nilpotent: requires g - I nilpotent; the Mercator series terminates.
inline Matrix matrix_log(const Matrix& g, LogMode mode = LogMode::principal) {
  if (g.rows() != g.cols()) throw Error(Errc::invalid_input, "matrix_log: non-square input");
  if (!all_finite(g)) throw Error(Errc::log_domain, "matrix_log: non-finite input");
  const auto n = g.rows();
  const Matrix identity = Matrix::Identity(n, n);
  Matrix x = g - identity;

  if (mode == LogMode::nilpotent) {
    Matrix power = x;
    for (Eigen::Index k = 1; k < n; ++k) power = power * x;
    const double scale = std::pow(std::max(1.0, max_abs(x)), static_cast<double>(n));
    if (max_abs(power) > 1e-12 * scale)
      throw Error(Errc::log_domain, "matrix_log: g - I is not nilpotent");
    Matrix result = Matrix::Zero(n, n);
    power = identity;
    for (Eigen::Index k = 1; k < n; ++k) {
      power = power * x;
      result += ((k % 2 == 1) ? 1.0 : -1.0) / static_cast<double>(k) * power;
    }
    return result;
  }

  if (norm_2(x) >= 1.0) throw Error(Errc::log_domain, "matrix_log: ||g - I|| >= 1");
  Matrix a = g;
  int roots = 0;
  while (norm_1(a - identity) > 0.25 && roots < 64) {
    a = matrix_sqrt(a);
    ++roots;
  }
  x = a - identity;
  Matrix result = Matrix::Zero(n, n);
  Matrix power = identity;
  for (int k = 1; k <= 200; ++k) {
    power = power * x;
    const Matrix term = (((k % 2) == 1) ? 1.0 : -1.0) / static_cast<double>(k) * power;
    result += term;
    if (max_abs(term) < 1e-18) break;
  }
  return std::ldexp(1.0, roots) * result;
}

/// d/ds exp(X + sV) at s = 0, read off the upper-right block of the
/// exponential of [[X, V], [0, X]].
inline Matrix dexp(const Matrix& x, const Matrix& v) {
  const auto n = x.rows();
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = x;
  block.topRightCorner(n, n) = v;
  block.bottomRightCorner(n, n) = x;
  return matrix_exp(block).topRightCorner(n, n);
}

/// Orthonormal basis of the column span, decided by column-pivoted QR with
/// an absolute threshold on |R_ii|.
inline Matrix orthonormal_span(const Matrix& columns, double tol) {
  const auto rows = columns.rows();
  if (columns.cols() == 0 || rows == 0) return Matrix(rows, 0);
  Eigen::ColPivHouseholderQR<Matrix> qr(columns);
  const Matrix& r = qr.matrixQR();
  const auto diag = std::min(rows, columns.cols());
  Eigen::Index rank = 0;
  while (rank < diag && std::abs(r(rank, rank)) > tol) ++rank;
  Matrix q = qr.householderQ();
  return q.leftCols(rank);
}

/// Orthonormal basis of the null space of `a`: right singular vectors whose
/// singular value is below tol * max(1, sigma_max).
inline Matrix null_space(const Matrix& a, double tol) {
  const auto cols = a.cols();
  if (a.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cutoff = tol * std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return svd.matrixV().rightCols(cols - rank);
}

inline Eigen::Index numerical_rank(const Matrix& columns, double tol) {
  return orthonormal_span(columns, tol).cols();
}

}  // namespace lieflow

// Dense two-phase simplex for small equality-form linear programs:
//   maximize c^T x  subject to  A x = b,  x >= 0.
// Bland's rule prevents cycling. Sizes here are a handful of rows by a few
// thousand columns, well within a dense tableau.
#pragma once

#include "lieflow/core.hpp"

#include <limits>
#include <vector>

namespace lieflow {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = -std::numeric_limits<double>::infinity();
  Vector x;
};

namespace detail {

class Tableau {
 public:
  Tableau(Matrix t, std::vector<int> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

  // Objective row is the last row and stores reduced costs of a
  // maximization written as z - c^T x = 0: a negative entry can improve.
  bool optimize(int usable_cols, double eps) {
    const auto rows = t_.rows() - 1;
    const auto rhs = t_.cols() - 1;
    for (int iter = 0; iter < 100000; ++iter) {
      int enter = -1;
      for (int j = 0; j < usable_cols; ++j)
        if (t_(rows, j) < -eps) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (t_(i, enter) > eps) {
          const double ratio = t_(i, rhs) / t_(i, enter);
          if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis_[i] < basis_[leave])) {
            best = ratio;
            leave = static_cast<int>(i);
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw Error(Errc::numerical_overflow, "simplex: iteration limit reached");
  }

  void pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i < t_.rows(); ++i)
      if (i != row && t_(i, col) != 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
    basis_[row] = col;
  }

  Matrix& table() { return t_; }
  std::vector<int>& basis() { return basis_; }

 private:
  Matrix t_;
  std::vector<int> basis_;
};

}  // namespace detail

inline LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c, double eps = 1e-11) {
  const auto m = a.rows();
  const auto n = a.cols();
  if (b.size() != m || c.size() != n) throw Error(Errc::invalid_input, "solve_lp: dimension mismatch");
  const double scale = std::max(1.0, max_abs(a));

  // Phase 1: minimize the sum of artificials, i.e. maximize their negation.
  Matrix t = Matrix::Zero(m + 1, n + m + 1);
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    t.row(i).head(n) = sign * a.row(i);
    t(i, n + i) = 1.0;
    t(i, n + m) = sign * b(i);
    basis[static_cast<std::size_t>(i)] = static_cast<int>(n + i);
  }
  for (Eigen::Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
  t.row(m).segment(n, m).setZero();

  detail::Tableau phase1(std::move(t), std::move(basis));
  phase1.optimize(static_cast<int>(n), eps * scale);
  Matrix& t1 = phase1.table();
  if (-t1(m, n + m) > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) return {};

  // Drive artificials out of the basis; drop rows that are redundant.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m; ++i) {
    auto& bi = phase1.basis()[static_cast<std::size_t>(i)];
    if (bi >= n) {
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(t1(i, j)) > eps * scale) {
          col = j;
          break;
        }
      if (col < 0) continue;
      phase1.pivot(static_cast<int>(i), static_cast<int>(col));
    }
    keep.push_back(i);
  }

  const auto rows = static_cast<Eigen::Index>(keep.size());
  Matrix t2 = Matrix::Zero(rows + 1, n + 1);
  std::vector<int> basis2;
  for (Eigen::Index r = 0; r < rows; ++r) {
    t2.row(r).head(n) = t1.row(keep[r]).head(n);
    t2(r, n) = t1(keep[r], n + m);
    basis2.push_back(phase1.basis()[static_cast<std::size_t>(keep[r])]);
  }
  t2.row(rows).head(n) = -c.transpose();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int bc = basis2[static_cast<std::size_t>(r)];
    if (t2(rows, bc) != 0.0) t2.row(rows) -= t2(rows, bc) * t2.row(r);
  }

  detail::Tableau phase2(std::move(t2), std::move(basis2));
  LpResult out;
  if (!phase2.optimize(static_cast<int>(n), eps * scale)) {
    out.status = LpStatus::unbounded;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const Matrix& tf = phase2.table();
  out.status = LpStatus::optimal;
  out.x = Vector::Zero(n);
  for (Eigen::Index r = 0; r < rows; ++r) out.x(phase2.basis()[static_cast<std::size_t>(r)]) = tf(r, n);
  out.value = c.dot(out.x);
  return out;
}

/// Largest mu such that the origin is a convex combination of the columns
/// of `points` with every weight >= mu. Returns -inf when the origin is
/// outside the hull.
inline double hull_weight_margin(const Matrix& points) {
  const auto dim = points.rows();
  const auto count = points.cols();
  if (count == 0) return -std::numeric_limits<double>::infinity();
  // Variables (mu, s_1..s_N) >= 0 with lambda_i = mu + s_i.
  Matrix a = Matrix::Zero(dim + 1, count + 1);
  a.block(0, 0, dim, 1) = points.rowwise().sum();
  a.block(0, 1, dim, count) = points;
  a(dim, 0) = static_cast<double>(count);
  a.block(dim, 1, 1, count).setOnes();
  Vector b = Vector::Zero(dim + 1);
  b(dim) = 1.0;
  Vector c = Vector::Zero(count + 1);
  c(0) = 1.0;
  const LpResult r = solve_lp(a, b, c);
  if (r.status != LpStatus::optimal) return -std::numeric_limits<double>::infinity();
  return r.value;
}

}  // namespace lieflow

// Shared generators and independent oracles for the test suites.
#pragma once

#include "lieflow/analysis.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace lieflow::testing {

inline const std::vector<std::pair<std::string, int>>& catalog() {
  static const std::vector<std::pair<std::string, int>> c{{"Rn", 2},  {"Heisenberg3", 0}, {"SO3", 0},
                                                          {"SL2", 0}, {"AffPlus", 0},     {"GLnPlus", 2}};
  return c;
}

/// Catalog charts are cached so references into them outlive the call.
inline ChartPtr chart(const std::string& name, int param = 0) {
  static std::map<std::pair<std::string, int>, ChartPtr> cache;
  auto& slot = cache[{name, param}];
  if (!slot) slot = make_group(name, param);
  return slot;
}

/// Random element of Der(g) from the null-space basis.
inline Matrix random_derivation(const LieAlgebra& alg, Rng& rng, double scale = 1.0) {
  const Matrix basis = derivation_basis(alg);
  const int n = alg.dim();
  Vector mix = rng.normal_vector(basis.cols());
  Matrix d = (basis * mix).reshaped(n, n);
  const double norm = d.norm();
  return norm > 0 ? Matrix(d * (scale / norm)) : d;
}

inline GroupElement random_element(const GroupChart& chart, Rng& rng, double radius = 0.8) {
  return chart.exp(rng.in_ball(chart.dim(), radius));
}

inline double diff(const GroupElement& a, const GroupElement& b) { return max_abs(a.matrix - b.matrix); }

/// Central-difference Jacobian at e of a map fixing e, through exponential
/// coordinates on both sides.
inline Matrix fd_jacobian_at_identity(const GroupChart& chart, const std::function<GroupElement(const GroupElement&)>& f,
                                      double h = 1e-5) {
  const int n = chart.dim();
  Matrix j(n, n);
  for (int k = 0; k < n; ++k) {
    Vector e = Vector::Zero(n);
    e(k) = h;
    j.col(k) = (chart.log(f(chart.exp(e))) - chart.log(f(chart.exp(-e)))) / (2.0 * h);
  }
  return j;
}

/// Classical RK4 written independently of the library integrator: fixed
/// step, no projection, on g' = field(g).
inline Matrix plain_rk4(const std::function<Matrix(const Matrix&)>& field, Matrix y, double t, int steps) {
  const double h = t / steps;
  for (int s = 0; s < steps; ++s) {
    const Matrix k1 = field(y);
    const Matrix k2 = field(y + 0.5 * h * k1);
    const Matrix k3 = field(y + 0.5 * h * k2);
    const Matrix k4 = field(y + h * k3);
    y += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

/// Heisenberg algebra element in (X, Y, Z) coordinates.
inline Vector xyz(double x, double y, double z) {
  Vector v(3);
  v << x, y, z;
  return v;
}

/// Heisenberg derivation diag(1, 1, 2).
inline Matrix heisenberg_diagonal() {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1, 1, 2;
  return d;
}

/// Affine system with zero drift whose controls are right-invariant basis
/// fields listed in `directions`.
inline AffineSystem invariant_controls(const ChartPtr& chart, const std::vector<int>& directions) {
  const LinearField zero = LinearField::zero(chart);
  std::vector<AffineField> fields{AffineField(zero, Vector::Zero(chart->dim()))};
  for (int k : directions) fields.emplace_back(zero, chart->algebra().basis(k));
  return AffineSystem(chart, std::move(fields));
}

/// Random bilinear or affine system with m controls built from random
/// derivations and invariant parts.
inline AffineSystem random_affine_system(const ChartPtr& chart, Rng& rng, int m, double invariant_scale = 1.0,
                                         double derivation_scale = 1.0) {
  std::vector<AffineField> fields;
  for (int j = 0; j <= m; ++j) {
    const Matrix d = random_derivation(chart->algebra(), rng, derivation_scale);
    fields.emplace_back(LinearField::make(chart, d), invariant_scale * rng.normal_vector(chart->dim()));
  }
  return AffineSystem(chart, std::move(fields));
}

inline BilinearSystem random_bilinear_system(const ChartPtr& chart, Rng& rng, int m, double scale = 1.0) {
  std::vector<LinearField> fields;
  for (int j = 0; j <= m; ++j) fields.push_back(LinearField::make(chart, random_derivation(chart->algebra(), rng, scale)));
  return BilinearSystem(chart, std::move(fields));
}

#define EXPECT_ERRC(stmt, errc)                                              \
  do {                                                                       \
    try {                                                                    \
      stmt;                                                                  \
      ADD_FAILURE() << "expected " << ::lieflow::errc_name(errc);            \
    } catch (const ::lieflow::Error& e) {                                    \
      EXPECT_EQ(e.code(), errc) << e.what();                                 \
    }                                                                        \
  } while (0)

}  // namespace lieflow::testing

// Right-invariant, linear and affine vector fields on a catalog chart, with
// evaluation and single-field flows.
//
// Conventions: a tangent vector at g is a d x d matrix; the right-invariant
// field of Y is g -> Y g; a linear field is identified by its derivation D
// through (d psi_t)_e = e^{tD}, so an inner derivation D = ad(W) has flow
// psi_t(g) = e^{tW} g e^{-tW} and value W g - g W.
#pragma once

#include "lieflow/groups.hpp"

#include <cmath>
#include <utility>

namespace lieflow {

enum class FlowStrategy { conjugation, exp_coordinates, numeric };

inline const char* strategy_name(FlowStrategy s) {
  switch (s) {
    case FlowStrategy::conjugation: return "conjugation";
    case FlowStrategy::exp_coordinates: return "exp_coordinates";
    case FlowStrategy::numeric: return "numeric";
  }
  return "?";
}

inline constexpr double kDefaultRk4Step = 1e-3;

/// Classical fixed-step RK4 for g' = field(g) over [0, t] in ambient
/// matrices, projecting back onto the chart after every step. Negative t
/// integrates backwards.
template <class Field>
GroupElement rk4_integrate(const GroupChart& chart, const Field& field, GroupElement g, double t, double dt) {
  if (!(dt > 0.0)) throw Error(Errc::invalid_input, "rk4: dt must be positive");
  if (t == 0.0) return g;
  const auto steps = static_cast<long>(std::ceil(std::abs(t) / dt - 1e-9));
  const double h = t / static_cast<double>(std::max(steps, 1L));
  Matrix y = std::move(g.matrix);
  for (long s = 0; s < std::max(steps, 1L); ++s) {
    const Matrix k1 = field(GroupElement{y});
    const Matrix k2 = field(GroupElement{y + 0.5 * h * k1});
    const Matrix k3 = field(GroupElement{y + 0.5 * h * k2});
    const Matrix k4 = field(GroupElement{y + h * k3});
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(y)) throw Error(Errc::numerical_overflow, "rk4: state overflowed");
    y = chart.project(GroupElement{y}).matrix;
  }
  return {y};
}

struct RightInvariantField {
  Vector y;
};

inline Matrix eval(const GroupChart& chart, const RightInvariantField& field, const GroupElement& g) {
  return chart.algebra().realize(field.y) * g.matrix;
}

/// g -> e^{tY} g.
inline GroupElement right_invariant_flow(const GroupChart& chart, const Vector& y, double t, const GroupElement& g) {
  return chart.mul(chart.exp(t * y), g);
}

class LinearField {
 public:
  /// Validates D and selects the strategy: conjugation when an inner witness
  /// exists, exp_coordinates on simply connected nilpotent charts, numeric
  /// otherwise.
  static LinearField make(ChartPtr chart, const Matrix& d) {
    Derivation der = make_derivation(chart->algebra(), d);
    FlowStrategy s = FlowStrategy::numeric;
    if (der.is_inner()) {
      s = FlowStrategy::conjugation;
    } else if (chart->flags().simply_connected && chart->flags().nilpotent) {
      s = FlowStrategy::exp_coordinates;
    }
    return LinearField(std::move(chart), std::move(der), s);
  }

  static LinearField inner(ChartPtr chart, const Vector& w) {
    Derivation der = ad_matrix(chart->algebra(), w);
    return LinearField(std::move(chart), std::move(der), FlowStrategy::conjugation);
  }

  static LinearField zero(ChartPtr chart) {
    const int n = chart->dim();
    return inner(std::move(chart), Vector::Zero(n));
  }

  bool supports(FlowStrategy s) const {
    switch (s) {
      case FlowStrategy::conjugation: return derivation_.is_inner();
      case FlowStrategy::exp_coordinates: return chart_->flags().simply_connected && chart_->flags().nilpotent;
      case FlowStrategy::numeric: return true;
    }
    return false;
  }

  /// Same field, forced onto another applicable strategy.
  LinearField with_strategy(FlowStrategy s) const {
    if (!supports(s))
      throw Error(Errc::strategy_error, std::string("strategy '") + strategy_name(s) + "' is not applicable");
    LinearField copy = *this;
    copy.strategy_ = s;
    return copy;
  }

  LinearField with_step(double dt) const {
    if (!(dt > 0.0)) throw Error(Errc::invalid_input, "dt must be positive");
    LinearField copy = *this;
    copy.dt_ = dt;
    return copy;
  }

  const ChartPtr& chart() const { return chart_; }
  const Derivation& derivation() const { return derivation_; }
  const Matrix& matrix() const { return derivation_.matrix; }
  FlowStrategy strategy() const { return strategy_; }
  double step() const { return dt_; }

  const Vector& witness() const {
    if (!derivation_.inner_witness) throw Error(Errc::strategy_error, "linear field has no inner witness");
    return *derivation_.inner_witness;
  }

  Matrix eval(const GroupElement& g) const {
    const LieAlgebra& alg = chart_->algebra();
    switch (strategy_) {
      case FlowStrategy::conjugation: {
        const Matrix w = alg.realize(witness());
        return w * g.matrix - g.matrix * w;
      }
      case FlowStrategy::exp_coordinates: {
        const Vector x = chart_->log(g);
        return dexp(alg.realize(x), alg.realize(matrix() * x));
      }
      case FlowStrategy::numeric:
        return numeric_eval(g);
    }
    throw Error(Errc::strategy_error, "unknown strategy");
  }

  GroupElement flow(double t, const GroupElement& g) const {
    if (t == 0.0) return g;
    const LieAlgebra& alg = chart_->algebra();
    switch (strategy_) {
      case FlowStrategy::conjugation: {
        const Matrix w = alg.realize(witness());
        return {matrix_exp(t * w) * g.matrix * matrix_exp(-t * w)};
      }
      case FlowStrategy::exp_coordinates:
        return chart_->exp(matrix_exp(t * matrix()) * chart_->log(g));
      case FlowStrategy::numeric: {
        // psi_t(h^(2^k)) = exp(e^{tD} log h)^(2^k).
        const RootChain chain = root_chain(g);
        Matrix power = matrix_exp(alg.realize(matrix_exp(t * matrix()) * chain.x));
        for (int i = 0; i < chain.halvings; ++i) power = power * power;
        if (!all_finite(power)) throw Error(Errc::numerical_overflow, "numeric linear flow overflowed");
        return chart_->project(GroupElement{power});
      }
    }
    throw Error(Errc::strategy_error, "unknown strategy");
  }

  Matrix differential_at_identity(double t) const { return matrix_exp(t * matrix()); }

 private:
  LinearField(ChartPtr chart, Derivation der, FlowStrategy s)
      : chart_(std::move(chart)), derivation_(std::move(der)), strategy_(s) {}

  struct RootChain {
    Vector x;  // log of g^(1/2^halvings)
    int halvings = 0;
  };

  // Square roots until g^(1/2^k) is near e, then its principal logarithm.
  RootChain root_chain(const GroupElement& g) const {
    const auto d = chart_->ambient_dim();
    const Matrix identity = Matrix::Identity(d, d);
    RootChain out;
    Matrix root = g.matrix;
    try {
      while (norm_1(root - identity) > 0.25 && out.halvings < 60) {
        root = matrix_sqrt(root);
        ++out.halvings;
      }
    } catch (const Error&) {
      throw Error(Errc::strategy_error, "numeric linear field: element has no principal root chain");
    }
    out.x = chart_->algebra().coords_of(matrix_log(root, LogMode::principal));
    return out;
  }

  // Value of a general linear field through its right-logarithmic cocycle
  // xi(g) = F(g) g^{-1}, which obeys xi(gh) = xi(g) + g xi(h) g^{-1}. Evaluate
  // at h = g^{1/2^k} through psi_t(exp X) = exp(e^{tD} X), then double back up.
  Matrix numeric_eval(const GroupElement& g) const {
    const LieAlgebra& alg = chart_->algebra();
    const RootChain chain = root_chain(g);
    const Matrix h_inv = matrix_exp(-alg.realize(chain.x));
    Matrix xi = dexp(alg.realize(chain.x), alg.realize(matrix() * chain.x)) * h_inv;
    Matrix power = matrix_exp(alg.realize(chain.x));
    for (int i = 0; i < chain.halvings; ++i) {
      xi = xi + power * xi * power.inverse();
      power = power * power;
    }
    return xi * g.matrix;
  }

  ChartPtr chart_;
  Derivation derivation_;
  FlowStrategy strategy_;
  double dt_ = kDefaultRk4Step;
};

inline Matrix eval(const LinearField& field, const GroupElement& g) { return field.eval(g); }

inline GroupElement linear_flow(const LinearField& field, double t, const GroupElement& g) {
  return field.flow(t, g);
}

inline Matrix flow_differential_at_identity(const LinearField& field, double t) {
  return field.differential_at_identity(t);
}

/// F = X + Y with X linear and Y right-invariant.
class AffineField {
 public:
  AffineField(LinearField linear, Vector invariant) : linear_(std::move(linear)), invariant_{std::move(invariant)} {
    linear_.chart()->algebra().check_element(invariant_.y);
  }

  /// Field g -> A g - g C. Its linear part is the inner derivation ad(C) and
  /// its right-invariant part is A - C.
  static AffineField two_sided(ChartPtr chart, const Matrix& a, const Matrix& c) {
    const LieAlgebra& alg = chart->algebra();
    const Vector cw = alg.coords_of(c);
    const Vector aw = alg.coords_of(a);
    if (max_abs(alg.realize(cw) - c) > alg.tol().alg || max_abs(alg.realize(aw) - a) > alg.tol().alg)
      throw Error(Errc::invalid_input, "two_sided: matrices are not in the algebra");
    return AffineField(LinearField::inner(std::move(chart), cw), aw - cw);
  }

  /// The left-invariant form X_A + (g -> g B) = A g - g (A - B).
  static AffineField from_left_invariant(ChartPtr chart, const Matrix& a, const Matrix& b) {
    return two_sided(std::move(chart), a, a - b);
  }

  const LinearField& linear() const { return linear_; }
  const RightInvariantField& invariant() const { return invariant_; }
  const ChartPtr& chart() const { return linear_.chart(); }

  Matrix eval(const GroupElement& g) const {
    return linear_.eval(g) + chart()->algebra().realize(invariant_.y) * g.matrix;
  }

  /// Conjugation strategy: alpha_t(g) = e^{t(W + Y)} g e^{-tW}. Otherwise
  /// alpha_t(g) = alpha_t(e) psi_t(g).
  GroupElement flow(double t, const GroupElement& g) const {
    if (t == 0.0) return g;
    const GroupChart& chart = *this->chart();
    const LieAlgebra& alg = chart.algebra();
    if (linear_.strategy() == FlowStrategy::conjugation) {
      const Matrix w = alg.realize(linear_.witness());
      const Matrix y = alg.realize(invariant_.y);
      return {matrix_exp(t * (w + y)) * g.matrix * matrix_exp(-t * w)};
    }
    return chart.mul(identity_orbit(t), linear_.flow(t, g));
  }

  /// alpha_t(e).
  GroupElement identity_orbit(double t) const {
    const GroupChart& chart = *this->chart();
    if (linear_.strategy() == FlowStrategy::conjugation) return flow(t, chart.identity());
    if (invariant_.y.isZero(0.0)) return chart.identity();
    // c(t) = alpha_t(e) obeys c(2s) = c(s) psi_s(c(s)): one short RK4 step,
    // then doubling with the linear flow.
    const int doublings = std::max(0, static_cast<int>(std::ceil(std::log2(std::abs(t) * 4096.0))));
    double s = std::ldexp(t, -doublings);
    GroupElement c = rk4_integrate(
        chart, [this](const GroupElement& x) { return eval(x); }, chart.identity(), s, std::abs(s));
    for (int i = 0; i < doublings; ++i) {
      c = chart.mul(c, linear_.flow(s, c));
      s *= 2.0;
    }
    return c;
  }

 private:
  LinearField linear_;
  RightInvariantField invariant_;
};

inline Matrix eval(const AffineField& field, const GroupElement& g) { return field.eval(g); }

inline GroupElement affine_flow(const AffineField& field, double t, const GroupElement& g) {
  return field.flow(t, g);
}

}  // namespace lieflow

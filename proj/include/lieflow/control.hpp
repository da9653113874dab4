// Piecewise-constant control laws, the shift flow and concatenation.
#pragma once

#include "lieflow/core.hpp"

#include <utility>
#include <vector>

namespace lieflow {

struct ControlPiece {
  double duration = 0.0;  // signed when produced for backward evaluation
  Vector value;
};

/// omega: R -> R^m given by consecutive segments starting at `start`.
/// Segment i carries value omega_i on (T_{i-1}, T_i] with T_0 = start;
/// before T_0 the first value holds and after the last breakpoint the last
/// value holds. Adjacent equal values are merged on construction.
class ControlLaw {
 public:
  ControlLaw() = default;

  ControlLaw(std::vector<double> durations, std::vector<Vector> values, double start = 0.0) : start_(start) {
    if (durations.size() != values.size() || durations.empty())
      throw Error(Errc::invalid_input, "control law needs matching, non-empty durations and values");
    if (!std::isfinite(start)) throw Error(Errc::invalid_input, "control law start must be finite");
    const auto m = values.front().size();
    for (std::size_t i = 0; i < durations.size(); ++i) {
      if (!(durations[i] > 0.0) || !std::isfinite(durations[i]))
        throw Error(Errc::invalid_input, "control durations must be positive and finite");
      if (values[i].size() != m) throw Error(Errc::invalid_input, "control values must share one dimension");
      if (!values[i].allFinite()) throw Error(Errc::invalid_input, "control values must be finite");
      if (!values_.empty() && values_.back() == values[i]) {
        durations_.back() += durations[i];
      } else {
        durations_.push_back(durations[i]);
        values_.push_back(std::move(values[i]));
      }
    }
  }

  static ControlLaw constant(const Vector& u, double duration = 1.0) { return ControlLaw({duration}, {u}); }

  Eigen::Index dim() const { return values_.empty() ? 0 : values_.front().size(); }
  std::size_t size() const { return durations_.size(); }
  double start() const { return start_; }
  double end() const {
    double t = start_;
    for (double d : durations_) t += d;
    return t;
  }
  double span() const { return end() - start_; }
  const std::vector<double>& durations() const { return durations_; }
  const std::vector<Vector>& values() const { return values_; }

  Vector value_at(double t) const {
    double upper = start_;
    if (t <= start_) return values_.front();
    for (std::size_t i = 0; i < durations_.size(); ++i) {
      upper += durations_[i];
      if (t <= upper) return values_[i];
    }
    return values_.back();
  }

  /// Constant pieces covering [a, b] (a < b) in time order.
  std::vector<ControlPiece> pieces(double a, double b) const {
    std::vector<ControlPiece> out;
    if (!(b > a)) return out;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = start_;
    for (std::size_t i = 0; i < durations_.size(); ++i) {
      hi += durations_[i];
      const bool last = i + 1 == durations_.size();
      const double seg_hi = last ? std::numeric_limits<double>::infinity() : hi;
      const double from = std::max(a, lo);
      const double to = std::min(b, seg_hi);
      if (to > from) out.push_back({to - from, values_[i]});
      lo = hi;
      if (hi >= b) break;
    }
    return out;
  }

  friend bool operator==(const ControlLaw& x, const ControlLaw& y) {
    return x.start_ == y.start_ && x.durations_ == y.durations_ && x.values_ == y.values_;
  }

 private:
  double start_ = 0.0;
  std::vector<double> durations_;
  std::vector<Vector> values_;
};

/// theta_s omega = omega(. + s).
inline ControlLaw shift(const ControlLaw& omega, double s) {
  return ControlLaw(omega.durations(), omega.values(), omega.start() - s);
}

/// omega(tau) = omega1(tau) on [0, s], omega2(tau - s) afterwards.
inline ControlLaw concatenate(const ControlLaw& first, double s, const ControlLaw& second) {
  if (s < 0.0) throw Error(Errc::invalid_input, "concatenate: s must be non-negative");
  if (first.dim() != second.dim()) throw Error(Errc::invalid_input, "concatenate: control dimensions differ");
  std::vector<double> durations;
  std::vector<Vector> values;
  for (auto& p : first.pieces(0.0, s)) {
    durations.push_back(p.duration);
    values.push_back(std::move(p.value));
  }
  const double tail = std::max(second.end(), 0.0) > 0.0 ? std::max(second.end(), 0.0) : 1.0;
  for (auto& p : second.pieces(0.0, tail)) {
    durations.push_back(p.duration);
    values.push_back(std::move(p.value));
  }
  return ControlLaw(std::move(durations), std::move(values), 0.0);
}

/// Pieces driving a solution from time 0 to time t. For t < 0 the pieces of
/// [t, 0] are returned in reverse with negated durations, which composes the
/// inverse flow: phi(-t, ., omega) = (phi(t, ., theta_{-t} omega))^{-1}.
inline std::vector<ControlPiece> solution_pieces(const ControlLaw& omega, double t) {
  if (t >= 0.0) return omega.pieces(0.0, t);
  auto forward = omega.pieces(t, 0.0);
  std::vector<ControlPiece> out;
  out.reserve(forward.size());
  for (auto it = forward.rbegin(); it != forward.rend(); ++it) out.push_back({-it->duration, it->value});
  return out;
}

/// Random law with 1..max_segments pieces, values uniform in [-box, box]^m and
/// durations summing to `total`.
inline ControlLaw random_control_law(Rng& rng, Eigen::Index m, int max_segments, double box, double total) {
  if (max_segments < 1 || !(total > 0.0)) throw Error(Errc::invalid_input, "random_control_law: bad parameters");
  const int k = rng.uniform_int(1, max_segments);
  std::vector<double> weights(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (auto& w : weights) {
    w = 0.05 + rng.uniform();
    sum += w;
  }
  std::vector<double> durations;
  std::vector<Vector> values;
  for (int i = 0; i < k; ++i) {
    durations.push_back(total * weights[static_cast<std::size_t>(i)] / sum);
    values.push_back(rng.uniform_vector(m, -box, box));
  }
  return ControlLaw(std::move(durations), std::move(values));
}

}  // namespace lieflow

// Shared vocabulary for lieflow: matrix aliases, error codes, tolerances,
// the portable seeded generator, and an ordered parallel map.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lieflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Errc {
  invalid_input,
  not_a_derivation,
  convention_error,
  numerical_overflow,
  log_domain,
  not_a_subalgebra,
  unknown_group,
  strategy_error,
  not_inner,
  insufficient_samples,
  certificate_failure,
  wrong_class,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_input: return "InvalidInput";
    case Errc::not_a_derivation: return "NotADerivation";
    case Errc::convention_error: return "ConventionError";
    case Errc::numerical_overflow: return "NumericalOverflow";
    case Errc::log_domain: return "LogDomainError";
    case Errc::not_a_subalgebra: return "NotASubalgebra";
    case Errc::unknown_group: return "UnknownGroup";
    case Errc::strategy_error: return "StrategyError";
    case Errc::not_inner: return "NotInner";
    case Errc::insufficient_samples: return "InsufficientSamples";
    case Errc::certificate_failure: return "CertificateFailure";
    case Errc::wrong_class: return "WrongClass";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Numerical thresholds. Every pass/fail decision in the library reads one
/// of these; `scaled` multiplies all of them uniformly.
struct Tolerances {
  double alg = 1e-9;       // Jacobi, Leibniz, bracket consistency
  double inner = 1e-7;     // inner-witness residual
  double rank = 1e-8;      // rank-revealing orthogonalization
  double grp = 1e-9;       // group membership
  double num = 1e-7;       // flow cross-checks
  double hull_eps = 1e-6;  // convex-combination margin

  Tolerances scaled(double factor) const {
    return {alg * factor, inner * factor, rank * factor,
            grp * factor, num * factor, hull_eps * factor};
  }
};

/// SplitMix64. Chosen because its output sequence is fully specified by the
/// 64-bit state update, so streams reproduce bit-for-bit on any platform.
/// Normals come from Box-Muller on two consecutive uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  /// Independent stream for item `index` of a batch seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    Rng mixer(seed ^ (0xD1B54A32D192ED03ULL * (index + 1)));
    return Rng(mixer.next_u64());
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  Rng split() { return Rng(next_u64()); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next_u64() % span);
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Vector uniform_vector(Eigen::Index n, double lo, double hi) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  /// Uniform sample from the closed ball of the given radius in R^n.
  Vector in_ball(Eigen::Index n, double radius) {
    if (n == 0) return Vector(0);
    Vector dir = normal_vector(n);
    double norm = dir.norm();
    while (norm == 0.0) {
      dir = normal_vector(n);
      norm = dir.norm();
    }
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
    return dir * (r / norm);
  }

  Vector unit_vector(Eigen::Index n) {
    Vector v = in_ball(n, 1.0);
    return v / v.norm();
  }

 private:
  std::uint64_t state_;
};

/// Evaluates fn(i) for i in [0, count) on worker threads; results are
/// returned in index order, so output is independent of scheduling.
template <class Fn>
auto parallel_map(std::size_t count, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> out(count);
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace lieflow

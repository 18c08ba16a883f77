// Shared basics: angle wrapping, solver report types, deterministic RNG.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace tomt {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Wrap x into (-pi, pi]. The upper endpoint is closed: wrap_to_T(-pi) == +pi.
inline double wrap_to_T(double x) {
  double y = std::fmod(x + pi, two_pi);  // y in (-2pi, 2pi)
  if (y <= 0.0) y += two_pi;             // y in (0, 2pi]
  return y - pi;
}

enum class SolveStatus {
  optimal,
  near_optimal,  // converged objective, residuals within 100x the target
  iteration_limit,
  infeasible,
  unbounded,
  numerical_failure,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct SolveReport {
  SolveStatus status = SolveStatus::numerical_failure;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double seconds = 0.0;
};

// Deterministic random source. mt19937_64 has a bit-exact stream mandated by
// the standard; the distributions below are written out explicitly because
// std::*_distribution output is implementation-defined and would break
// cross-platform reproducibility of seeded demos and tests.
struct Rng {
  std::mt19937_64 gen;

  explicit Rng(std::uint64_t seed) : gen(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer in [lo, hi], unbiased (Lemire's multiply-reject).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_int: empty range");
    const std::uint64_t range =
        static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(gen());  // full 64-bit span
    unsigned __int128 m = static_cast<unsigned __int128>(gen()) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
      const std::uint64_t threshold = (0 - range) % range;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(gen()) * range;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return lo + static_cast<std::int64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Complex normal with unit variance: E|z|^2 = 1.
  cplx cnormal() {
    const double re = normal();
    const double im = normal();
    return cplx(re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0);
  }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tomt

// Data generation for the experiments: AR(1) simulation with a swept pole,
// uniform-linear-array covariances, windowed sample-covariance estimates, and
// lag-wise noise corruption.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <iostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "tomt/spectral.hpp"

namespace tomt {

// y(t) = p(t) y(t-1) + e(t) with p(t) = pole_radius * e^{i w(t)} and w swept
// linearly freq_start -> freq_end over the run.
struct ArSpec {
  double pole_radius = 0.0;
  double freq_start = 0.0;
  double freq_end = 0.0;
  int total_samples = 0;
  std::uint64_t seed = 0;
};

struct UlaSource {
  double angle_deg = 0.0;
  double power = 0.0;
};

// Half-wavelength array: a source at angle a (degrees off broadside) lands at
// spatial frequency pi * sin(a * pi / 180).
struct UlaScene {
  int n_sensors = 0;
  std::vector<UlaSource> sources;
  double noise_power = 0.0;
};

namespace detail {

inline void validate(const ArSpec& spec) {
  if (!(spec.pole_radius > 0.0) || !(spec.pole_radius < 1.0))
    throw std::invalid_argument("ArSpec: pole_radius must be in (0, 1)");
  for (double w : {spec.freq_start, spec.freq_end})
    if (!(w > -pi) || !(w <= pi))
      throw std::invalid_argument("ArSpec: frequencies must be in (-pi, pi]");
  if (spec.total_samples < 1)
    throw std::invalid_argument("ArSpec: total_samples must be >= 1");
}

inline void validate(const UlaScene& scene) {
  if (scene.n_sensors < 1)
    throw std::invalid_argument("UlaScene: n_sensors must be >= 1");
  for (const auto& s : scene.sources) {
    if (!(s.power > 0.0))
      throw std::invalid_argument("UlaScene: source powers must be positive");
    if (!(s.angle_deg >= -90.0) || !(s.angle_deg <= 90.0))
      throw std::invalid_argument(
          "UlaScene: angles must be in [-90, 90] degrees");
  }
  if (!(scene.noise_power >= 0.0))
    throw std::invalid_argument("UlaScene: noise_power must be >= 0");
}

// Circularly symmetric unit-variance complex normal by the polar method on
// raw mt19937_64 output. std:: distributions are not bit-portable across
// standard libraries; the engine's word stream is, so draws reproduce
// bitwise for a given seed.
struct ComplexNormal {
  std::mt19937_64 eng;

  explicit ComplexNormal(std::uint64_t seed) : eng(seed) {}

  double unit() { return static_cast<double>((eng() >> 11) + 1) * 0x1p-53; }

  cplx operator()() {
    const double r = std::sqrt(-std::log(unit()));
    const double a = two_pi * unit();
    return cplx(r * std::cos(a), r * std::sin(a));
  }
};

}  // namespace detail

inline std::vector<cplx> simulate_ar(const ArSpec& spec) {
  detail::validate(spec);
  const int T = spec.total_samples;
  detail::ComplexNormal noise(spec.seed);
  std::vector<cplx> y(T);
  cplx prev(0.0, 0.0);
  for (int t = 0; t < T; ++t) {
    const double frac = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
    const double w = spec.freq_start + (spec.freq_end - spec.freq_start) * frac;
    prev = std::polar(spec.pole_radius, w) * prev + noise();
    y[t] = prev;
  }
  return y;
}

// R = sum_l p_l a(w_l) a(w_l)^H + sigma^2 I as lags: r_d = sum p_l e^{i d w_l}
// plus the noise floor on r_0. Exactly Toeplitz and PSD for any scene.
inline ToeplitzCov ula_covariance(const UlaScene& scene) {
  detail::validate(scene);
  const int n = scene.n_sensors;
  std::vector<cplx> lags(n, cplx(0.0, 0.0));
  for (const auto& s : scene.sources) {
    const double w = pi * std::sin(s.angle_deg * pi / 180.0);
    for (int d = 0; d < n; ++d) lags[d] += s.power * std::polar(1.0, d * w);
  }
  lags[0] = cplx(lags[0].real() + scene.noise_power, 0.0);
  return ToeplitzCov(n, std::move(lags));
}

// Windowed covariance estimators. snapshot averages outer products of length-n
// snapshot vectors sliding inside each window; lag_averaged uses the biased
// per-lag sums (divide by window length), whose Toeplitz matrix is a principal
// submatrix of the full data Gram and hence PSD.
enum class CovEstimator { snapshot, lag_averaged };

inline std::vector<Eigen::MatrixXcd> sample_covariance(
    const std::vector<cplx>& y, int n, int window_len, int overlap,
    CovEstimator kind = CovEstimator::snapshot) {
  if (n < 1) throw std::invalid_argument("sample_covariance: n must be >= 1");
  if (window_len < n)
    throw std::invalid_argument("sample_covariance: window shorter than n");
  if (overlap < 0 || overlap >= window_len)
    throw std::invalid_argument(
        "sample_covariance: overlap must be in [0, window_len)");
  const int T = static_cast<int>(y.size());
  if (T < window_len)
    throw std::invalid_argument(
        "sample_covariance: signal shorter than one window");
  const int step = window_len - overlap;
  std::vector<Eigen::MatrixXcd> out;
  for (int s = 0; s + window_len <= T; s += step) {
    if (kind == CovEstimator::snapshot) {
      Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(n, n);
      const int m = window_len - n + 1;
      for (int t = s; t < s + m; ++t) {
        Eigen::Map<const Eigen::VectorXcd> v(y.data() + t, n);
        R.noalias() += v * v.adjoint();
      }
      out.push_back(R / m);
    } else {
      std::vector<cplx> lags(n, cplx(0.0, 0.0));
      for (int d = 0; d < n; ++d) {
        for (int t = s; t < s + window_len - d; ++t)
          lags[d] += y[t + d] * std::conj(y[t]);
        lags[d] /= window_len;
      }
      out.push_back(ToeplitzCov(n, std::move(lags)).dense());
    }
  }
  return out;
}

inline ToeplitzCov corrupt_additive(const ToeplitzCov& R,
                                    const ToeplitzCov& Rw) {
  if (R.n != Rw.n)
    throw std::invalid_argument("corrupt_additive: dimension mismatch");
  std::vector<cplx> lags(R.n);
  for (int d = 0; d < R.n; ++d) lags[d] = R.lags[d] + Rw.lags[d];
  return ToeplitzCov(R.n, std::move(lags));
}

// Entrywise (Schur) product; for Toeplitz factors that is the lag-wise
// product, PSD by the Schur product theorem. The contraction bound needs
// diag(Rw) <= 1, so a larger diagonal is flagged but still computed.
inline ToeplitzCov corrupt_multiplicative(const ToeplitzCov& R,
                                          const ToeplitzCov& Rw) {
  if (R.n != Rw.n)
    throw std::invalid_argument("corrupt_multiplicative: dimension mismatch");
  if (Rw.r0() > 1.0 + 1e-12)
    std::cerr << "corrupt_multiplicative: warning: diag(Rw) = " << Rw.r0()
              << " exceeds unity; contraction bound does not apply\n";
  std::vector<cplx> lags(R.n);
  for (int d = 0; d < R.n; ++d) lags[d] = R.lags[d] * Rw.lags[d];
  return ToeplitzCov(R.n, std::move(lags));
}

}  // namespace tomt

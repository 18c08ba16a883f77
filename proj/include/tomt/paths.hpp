// Covariance paths from transport plans: displacement interpolation and
// extrapolation, the regularized tracking fit over a plan variable, and the
// straight-line fits (Euclidean and log-Euclidean) used for comparison.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tomt/distance.hpp"
#include "tomt/hermitian.hpp"
#include "tomt/qp.hpp"

namespace tomt {

// Timed covariance estimates: (tau, dense Hermitian matrix).
using EstimateSequence = std::vector<std::pair<double, Eigen::MatrixXcd>>;

struct CovariancePath {
  TransportPlan plan;
  std::optional<DiscreteSpectrum> psi0, psi1;  // set by the mass-term variant
  std::vector<double> tau_grid;
  std::vector<ToeplitzCov> matrices;
};

struct PathEndpoints {
  Eigen::MatrixXcd R0, R1;
};

struct TrackResult {
  CovariancePath path;
  SolveReport report;
};

// Mass travelling from node k to node l sits at theta_k + tau * delta, where
// delta is the displacement wrapped to (-pi, pi]; tau outside [0, 1]
// extrapolates along the same arcs. The result is Toeplitz and PSD for any
// tau (a nonnegative combination of Fourier outer products) and its diagonal
// equals the total plan mass over 2 pi.
inline ToeplitzCov interpolate(const TransportPlan& plan, int n, double tau) {
  if (n < 1) throw std::invalid_argument("interpolate: n must be >= 1");
  const FrequencyGrid& grid = plan.grid;
  std::vector<cplx> lags(n, cplx(0.0, 0.0));
  for (int l = 0; l < grid.N; ++l) {
    for (int k = 0; k < grid.N; ++k) {
      const double w = plan.M(k, l);
      if (w == 0.0) continue;
      const double psi =
          grid.node(k) + tau * wrap_to_T(grid.node(l) - grid.node(k));
      const cplx z = std::polar(1.0, psi);
      cplx zp = w;
      for (int d = 0; d < n; ++d) {
        lags[d] += zp;
        zp *= z;
      }
    }
  }
  for (auto& v : lags) v /= two_pi;
  lags[0] = cplx(lags[0].real(), 0.0);  // rounding only; mass is real
  return {n, std::move(lags)};
}

namespace detail {

// Lags of Gamma applied to a signed node-mass vector.
inline void add_node_masses(std::vector<cplx>& lags, const FrequencyGrid& grid,
                            const Eigen::VectorXd& mass, double scale) {
  const int n = static_cast<int>(lags.size());
  for (int k = 0; k < grid.N; ++k) {
    const double w = scale * mass[k];
    if (w == 0.0) continue;
    const cplx z = std::polar(1.0, grid.node(k));
    cplx zp = w / two_pi;
    for (int d = 0; d < n; ++d) {
      lags[d] += zp;
      zp *= z;
    }
  }
}

}  // namespace detail

// Adds the untransported mass linearly: the interpolant plus
// (1-tau) Gamma(psi0 - row marginal) + tau Gamma(psi1 - column marginal).
// Always Toeplitz; PSD is guaranteed for tau in [0, 1] only, and a negative
// diagonal under extrapolation is surfaced by the ToeplitzCov constructor.
inline ToeplitzCov interpolate_with_mass_terms(const TransportPlan& plan,
                                               const DiscreteSpectrum& psi0,
                                               const DiscreteSpectrum& psi1,
                                               int n, double tau) {
  if (psi0.grid.N != plan.grid.N || psi1.grid.N != plan.grid.N)
    throw std::invalid_argument("interpolate_with_mass_terms: grid mismatch");
  ToeplitzCov base = interpolate(plan, n, tau);
  std::vector<cplx> lags = std::move(base.lags);
  detail::add_node_masses(lags, plan.grid,
                          (psi0.mass - plan.row_marginal()).eval(), 1.0 - tau);
  detail::add_node_masses(lags, plan.grid,
                          (psi1.mass - plan.col_marginal()).eval(), tau);
  lags[0] = cplx(lags[0].real(), 0.0);
  return {n, std::move(lags)};
}

inline CovariancePath evaluate_path(TransportPlan plan, int n,
                                    std::vector<double> taus) {
  CovariancePath p{std::move(plan), std::nullopt, std::nullopt,
                   std::move(taus), {}};
  p.matrices.reserve(p.tau_grid.size());
  for (double t : p.tau_grid) p.matrices.push_back(interpolate(p.plan, n, t));
  return p;
}

inline CovariancePath evaluate_path(TransportPlan plan,
                                    const DiscreteSpectrum& psi0,
                                    const DiscreteSpectrum& psi1, int n,
                                    std::vector<double> taus) {
  CovariancePath p{std::move(plan), psi0, psi1, std::move(taus), {}};
  p.matrices.reserve(p.tau_grid.size());
  for (double t : p.tau_grid)
    p.matrices.push_back(
        interpolate_with_mass_terms(p.plan, psi0, psi1, n, t));
  return p;
}

namespace detail {

// Frobenius weights of the Toeplitz subspace in realified lag coordinates:
// |T|_F^2 = n r_0^2 + sum_d 2(n-d)|r_d|^2.
inline Eigen::VectorXd toeplitz_weights(int n) {
  Eigen::VectorXd w(2 * n - 1);
  w[0] = n;
  for (int d = 1; d < n; ++d)
    w[2 * d - 1] = w[2 * d] = 2.0 * (n - d);
  return w;
}

// Realified lags of the Frobenius projection of a Hermitian matrix onto the
// Toeplitz subspace: each lag is the mean of its diagonal.
inline Eigen::VectorXd projected_lags(const Eigen::MatrixXcd& R) {
  const int n = static_cast<int>(R.rows());
  Eigen::VectorXd r(2 * n - 1);
  r[0] = R.diagonal().sum().real() / n;
  for (int d = 1; d < n; ++d) {
    const cplx lag = std::conj(superdiagonal_sum(R, d)) / double(n - d);
    r[2 * d - 1] = lag.real();
    r[2 * d] = lag.imag();
  }
  return r;
}

}  // namespace detail

// Fits a transport plan to a sequence of timed covariance estimates:
//   min_{M >= 0}  <C, M> + lambda sum_j |I_{tau_j}(M) - Rhat_j|_F^2.
// Each cell of M contributes a fixed Fourier outer product to I_tau(M), so
// the data term is a weighted least-squares functional in vec(M); the
// non-Toeplitz part of each estimate is an additive constant, folded back
// into the reported objective.
inline TrackResult track(const EstimateSequence& estimates,
                         const FrequencyGrid& grid, const CostSpec& cost,
                         double lambda, double tol = 1e-8,
                         int max_iter = 20000) {
  if (estimates.empty())
    throw std::invalid_argument("track: empty estimate list");
  if (!(lambda > 0.0))
    throw std::invalid_argument("track: lambda must be positive");
  const int n = static_cast<int>(estimates[0].second.rows());
  const int N = grid.N;
  const int J = static_cast<int>(estimates.size());
  for (const auto& [t, R] : estimates) {
    if (R.rows() != n || R.cols() != n)
      throw std::invalid_argument("track: estimate dimensions differ");
    for (const auto& [t2, R2] : estimates)
      if (&R != &R2 && t == t2)
        throw std::invalid_argument("track: tau values must be distinct");
  }

  const Eigen::VectorXd w = detail::toeplitz_weights(n);
  const int q = 2 * n - 1;

  // Per-estimate forward maps vec(M) -> realified lags of I_tau(M),
  // stored as (2n-1) x N^2 so applications are single matvecs.
  std::vector<Eigen::MatrixXd> B(J);
  std::vector<Eigen::VectorXd> target(J);
  for (int j = 0; j < J; ++j) {
    const double tau = estimates[j].first;
    Eigen::MatrixXd Bj(q, N * N);
    for (int l = 0; l < N; ++l) {
      for (int k = 0; k < N; ++k) {
        const int col = k + N * l;
        const double psi =
            grid.node(k) + tau * wrap_to_T(grid.node(l) - grid.node(k));
        const cplx z = std::polar(1.0, psi);
        Bj(0, col) = 1.0 / two_pi;
        cplx zp = z / two_pi;
        for (int d = 1; d < n; ++d) {
          Bj(2 * d - 1, col) = zp.real();
          Bj(2 * d, col) = zp.imag();
          zp *= z;
        }
      }
    }
    B[j] = std::move(Bj);
    target[j] = detail::projected_lags(
        (0.5 * (estimates[j].second + estimates[j].second.adjoint())).eval());
  }

  const Eigen::MatrixXd C = build_cost_matrix(grid, cost);
  Eigen::VectorXd qlin = Eigen::Map<const Eigen::VectorXd>(C.data(), N * N);
  for (int j = 0; j < J; ++j)
    qlin -= 2.0 * lambda * (B[j].transpose() * w.cwiseProduct(target[j]));

  const QpOperator P = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (int j = 0; j < J; ++j)
      out += 2.0 * lambda *
             (B[j].transpose() * w.cwiseProduct(B[j] * v));
    return out;
  };

  auto sol = solve_qp_nonneg(P, qlin, tol, max_iter);
  detail::require_solved(sol.report, "track");

  TransportPlan plan{grid, Eigen::Map<const Eigen::MatrixXd>(
                               sol.x.data(), N, N)};
  std::vector<double> taus(J);
  for (int j = 0; j < J; ++j) taus[j] = estimates[j].first;

  TrackResult res{evaluate_path(std::move(plan), n, std::move(taus)),
                  sol.report};
  double obj = (res.path.plan.M.array() * C.array()).sum();
  for (int j = 0; j < J; ++j) {
    const Eigen::MatrixXcd diff =
        res.path.matrices[j].dense() - estimates[j].second;
    obj += lambda * diff.squaredNorm();
  }
  res.report.objective = obj;
  return res;
}

inline TrackResult track(
    const std::vector<std::pair<double, ToeplitzCov>>& estimates,
    const FrequencyGrid& grid, const CostSpec& cost, double lambda,
    double tol = 1e-8, int max_iter = 20000) {
  EstimateSequence dense;
  dense.reserve(estimates.size());
  for (const auto& [t, R] : estimates) dense.emplace_back(t, R.dense());
  return track(dense, grid, cost, lambda, tol, max_iter);
}

namespace detail {

inline Eigen::MatrixXcd psd_clip(const Eigen::MatrixXcd& H) {
  const auto e = hermitian_eig(hermitize(H));
  return e.vectors * e.values.cwiseMax(0.0).asDiagonal() *
         e.vectors.adjoint();
}

// Scalar normal-equation coefficients of a two-endpoint line fit.
struct LineFitCoeffs {
  double a00 = 0.0, a01 = 0.0, a11 = 0.0;
};

inline LineFitCoeffs line_fit_coeffs(const EstimateSequence& estimates) {
  LineFitCoeffs c;
  for (const auto& [t, R] : estimates) {
    c.a00 += (1.0 - t) * (1.0 - t);
    c.a01 += (1.0 - t) * t;
    c.a11 += t * t;
  }
  return c;
}

inline void require_line_fit_ok(const EstimateSequence& estimates,
                                const char* who) {
  if (estimates.size() < 2)
    throw std::invalid_argument(std::string(who) + ": need >= 2 estimates");
  const int n = static_cast<int>(estimates[0].second.rows());
  bool distinct = false;
  for (const auto& [t, R] : estimates) {
    if (R.rows() != n || R.cols() != n)
      throw std::invalid_argument(std::string(who) +
                                  ": estimate dimensions differ");
    if (t != estimates[0].first) distinct = true;
  }
  if (!distinct)
    throw std::invalid_argument(std::string(who) +
                                ": need two distinct tau values");
}

}  // namespace detail

// Least-squares straight line (1-tau) R0 + tau R1 through the estimates,
// with both endpoints PSD. Block minimization is exact: for fixed R1 the
// optimal R0 is the PSD clip of a single Hermitian matrix, and likewise for
// R1, so alternation descends to the joint optimum of this convex problem.
inline PathEndpoints fit_euclidean_path(const EstimateSequence& estimates,
                                        double tol = 1e-9,
                                        int max_iter = 10000) {
  detail::require_line_fit_ok(estimates, "fit_euclidean_path");
  const int n = static_cast<int>(estimates[0].second.rows());
  const auto c = detail::line_fit_coeffs(estimates);
  Eigen::MatrixXcd G0 = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd G1 = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& [t, R] : estimates) {
    const Eigen::MatrixXcd Rh = 0.5 * (R + R.adjoint());
    G0 += (1.0 - t) * Rh;
    G1 += t * Rh;
  }

  // Unconstrained joint solve seeds the alternation.
  const double det = c.a00 * c.a11 - c.a01 * c.a01;
  Eigen::MatrixXcd R0, R1;
  if (det > 1e-12 * (c.a00 + c.a11) * (c.a00 + c.a11)) {
    R0 = detail::psd_clip((c.a11 * G0 - c.a01 * G1) / det);
    R1 = detail::psd_clip((c.a00 * G1 - c.a01 * G0) / det);
  } else {
    R0 = detail::psd_clip(G0 / std::max(c.a00, 1e-300));
    R1 = detail::psd_clip(G1 / std::max(c.a11, 1e-300));
  }

  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::MatrixXcd R0p = R0, R1p = R1;
    if (c.a00 > 0.0) R0 = detail::psd_clip((G0 - c.a01 * R1) / c.a00);
    if (c.a11 > 0.0) R1 = detail::psd_clip((G1 - c.a01 * R0) / c.a11);
    const double change =
        std::max((R0 - R0p).norm(), (R1 - R1p).norm()) /
        (1.0 + std::max(R0.norm(), R1.norm()));
    if (change <= tol) return {std::move(R0), std::move(R1)};
  }
  throw std::runtime_error("fit_euclidean_path: iteration limit reached");
}

// Least-squares line through the matrix logarithms; unconstrained, so the
// 2x2 normal equations solve it in closed form. Endpoints are returned in
// covariance space; evaluate the path with geodesic_log_euclidean.
inline PathEndpoints fit_log_euclidean_path(
    const EstimateSequence& estimates) {
  detail::require_line_fit_ok(estimates, "fit_log_euclidean_path");
  const int n = static_cast<int>(estimates[0].second.rows());
  const auto c = detail::line_fit_coeffs(estimates);
  const double det = c.a00 * c.a11 - c.a01 * c.a01;
  if (det <= 1e-12 * (c.a00 + c.a11) * (c.a00 + c.a11))
    throw std::invalid_argument(
        "fit_log_euclidean_path: tau values leave an endpoint undetermined");
  Eigen::MatrixXcd G0 = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd G1 = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& [t, R] : estimates) {
    const Eigen::MatrixXcd L = herm_log(0.5 * (R + R.adjoint()));
    G0 += (1.0 - t) * L;
    G1 += t * L;
  }
  const Eigen::MatrixXcd L0 = (c.a11 * G0 - c.a01 * G1) / det;
  const Eigen::MatrixXcd L1 = (c.a00 * G1 - c.a01 * G0) / det;
  return {herm_exp(L0), herm_exp(L1)};
}

}  // namespace tomt

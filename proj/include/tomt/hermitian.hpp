// Dense Hermitian matrix analysis: eigendecomposition, spectral functions,
// covariance geodesics, and the KL / ellipticity divergences with their
// barycenters. These are the baselines the transport distances compete with.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <vector>

#include "tomt/common.hpp"
#include "tomt/spectral.hpp"

namespace tomt {

struct EigDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors;  // columns are orthonormal eigenvectors
};

inline EigDecomposition hermitian_eig(const Eigen::MatrixXcd& H) {
  detail::require_hermitian(H, "hermitian_eig");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hermitian_eig: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace detail {

inline Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& M) {
  return 0.5 * (M + M.adjoint());
}

// Eigendecomposition for internal chains: symmetrizes roundoff instead of
// rejecting it. Public entry points validate; internal products may drift by
// a few ulp from exact Hermitian.
inline EigDecomposition eig_symmetrized(const Eigen::MatrixXcd& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitize(H));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hermitian_eig: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Rebuild V f(D) V^H.
template <class F>
Eigen::MatrixXcd apply_spectral(const EigDecomposition& e, F&& f) {
  Eigen::VectorXd fv(e.values.size());
  for (Eigen::Index i = 0; i < e.values.size(); ++i) fv[i] = f(e.values[i]);
  return e.vectors * fv.asDiagonal() * e.vectors.adjoint();
}

// Positive-definiteness gate for log and negative powers. Reports the
// offending eigenvalue so callers can see how close to singular they were.
inline void require_pd(const EigDecomposition& e, const char* who) {
  const double lmax = std::max(1e-300, e.values.cwiseAbs().maxCoeff());
  const double lmin = e.values.minCoeff();
  if (lmin <= 1e-12 * lmax) {
    std::ostringstream msg;
    msg << who << ": matrix is singular or indefinite (eigenvalue " << lmin
        << ", largest " << lmax << ")";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace detail

inline Eigen::MatrixXcd herm_sqrt(const Eigen::MatrixXcd& H) {
  const auto e = hermitian_eig(H);
  if (e.values.minCoeff() < -1e-12 * std::max(1.0, e.values.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("herm_sqrt: matrix has a negative eigenvalue");
  return detail::apply_spectral(e, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

inline Eigen::MatrixXcd herm_log(const Eigen::MatrixXcd& H) {
  const auto e = hermitian_eig(H);
  detail::require_pd(e, "herm_log");
  return detail::apply_spectral(e, [](double x) { return std::log(x); });
}

inline Eigen::MatrixXcd herm_exp(const Eigen::MatrixXcd& H) {
  return detail::apply_spectral(hermitian_eig(H), [](double x) { return std::exp(x); });
}

// H^t for real t. Negative or fractional t below 1 require PD input; integer
// t >= 0 only needs PSD.
inline Eigen::MatrixXcd herm_power(const Eigen::MatrixXcd& H, double t) {
  const auto e = hermitian_eig(H);
  const bool needs_pd = (t < 0.0) || (t != std::floor(t));
  if (needs_pd) detail::require_pd(e, "herm_power");
  return detail::apply_spectral(e, [t](double x) { return std::pow(x, t); });
}

// ---------------------------------------------------------------- geodesics

// Lag-space straight line (1-tau) R0 + tau R1. PSD for tau in [0, 1] only;
// outside that range the result can be indefinite and is returned as-is.
inline ToeplitzCov geodesic_convex(const ToeplitzCov& R0, const ToeplitzCov& R1,
                                   double tau) {
  if (R0.n != R1.n)
    throw std::invalid_argument("geodesic_convex: dimension mismatch");
  std::vector<cplx> lags(R0.n);
  for (int j = 0; j < R0.n; ++j)
    lags[j] = (1.0 - tau) * R0.lags[j] + tau * R1.lags[j];
  return ToeplitzCov(R0.n, std::move(lags));
}

// Affine-invariant geodesic R0^{1/2} (R0^{-1/2} R1 R0^{-1/2})^tau R0^{1/2}.
inline Eigen::MatrixXcd geodesic_gconvex(const Eigen::MatrixXcd& R0,
                                         const Eigen::MatrixXcd& R1,
                                         double tau) {
  detail::require_hermitian(R0, "geodesic_gconvex");
  detail::require_hermitian(R1, "geodesic_gconvex");
  const auto e0 = hermitian_eig(R0);
  detail::require_pd(e0, "geodesic_gconvex");
  const auto e1 = hermitian_eig(R1);
  detail::require_pd(e1, "geodesic_gconvex");
  const auto sq = detail::apply_spectral(e0, [](double x) { return std::sqrt(x); });
  const auto isq = detail::apply_spectral(e0, [](double x) { return 1.0 / std::sqrt(x); });
  const auto mid = detail::eig_symmetrized(isq * R1 * isq);
  const auto midt = detail::apply_spectral(mid, [tau](double x) {
    return std::pow(std::max(x, 0.0), tau);
  });
  return detail::hermitize(sq * midt * sq);
}

// Gaussian transport geodesic ((1-tau) R0^{1/2} + tau R1^{1/2} U)(...)^H with
// U = R1^{-1/2} R0^{-1/2} (R0^{1/2} R1 R0^{1/2})^{1/2}.
inline Eigen::MatrixXcd geodesic_gaussian_omt(const Eigen::MatrixXcd& R0,
                                              const Eigen::MatrixXcd& R1,
                                              double tau) {
  detail::require_hermitian(R0, "geodesic_gaussian_omt");
  detail::require_hermitian(R1, "geodesic_gaussian_omt");
  const auto e0 = hermitian_eig(R0);
  detail::require_pd(e0, "geodesic_gaussian_omt");
  const auto e1 = hermitian_eig(R1);
  detail::require_pd(e1, "geodesic_gaussian_omt");
  const auto sq0 = detail::apply_spectral(e0, [](double x) { return std::sqrt(x); });
  const auto isq0 = detail::apply_spectral(e0, [](double x) { return 1.0 / std::sqrt(x); });
  const auto sq1 = detail::apply_spectral(e1, [](double x) { return std::sqrt(x); });
  const auto isq1 = detail::apply_spectral(e1, [](double x) { return 1.0 / std::sqrt(x); });
  const auto inner = detail::eig_symmetrized(sq0 * R1 * sq0);
  const auto inner_sq = detail::apply_spectral(inner, [](double x) {
    return std::sqrt(std::max(x, 0.0));
  });
  const Eigen::MatrixXcd U = isq1 * isq0 * inner_sq;
  const Eigen::MatrixXcd B = (1.0 - tau) * sq0 + tau * sq1 * U;
  return detail::hermitize(B * B.adjoint());
}

// exp((1-tau) log R0 + tau log R1).
inline Eigen::MatrixXcd geodesic_log_euclidean(const Eigen::MatrixXcd& R0,
                                               const Eigen::MatrixXcd& R1,
                                               double tau) {
  const Eigen::MatrixXcd L = (1.0 - tau) * herm_log(R0) + tau * herm_log(R1);
  return detail::hermitize(herm_exp(L));
}

// ---------------------------------------------------- divergences and means

// tr(R0^{-1} R1) - log det(R0^{-1} R1) - n. Requires both PD.
inline double kl_divergence(const Eigen::MatrixXcd& R0,
                            const Eigen::MatrixXcd& R1) {
  detail::require_hermitian(R0, "kl_divergence");
  detail::require_hermitian(R1, "kl_divergence");
  if (R0.rows() != R1.rows())
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  const auto e0 = hermitian_eig(R0);
  detail::require_pd(e0, "kl_divergence");
  const auto e1 = hermitian_eig(R1);
  detail::require_pd(e1, "kl_divergence");
  const int n = static_cast<int>(R0.rows());
  const Eigen::MatrixXcd inv0 =
      detail::apply_spectral(e0, [](double x) { return 1.0 / x; });
  const double tr = (inv0 * R1).trace().real();
  double logdet = 0.0;
  for (int i = 0; i < n; ++i)
    logdet += std::log(e1.values[i]) - std::log(e0.values[i]);
  return std::max(tr - logdet - n, 0.0);  // clamp eigensolver roundoff
}

// Scale-invariant ellipticity divergence
//   n log( tr(R0^{-1} R1) / n ) - log det(R0^{-1} R1).
inline double ellipticity_distance(const Eigen::MatrixXcd& R0,
                                   const Eigen::MatrixXcd& R1) {
  detail::require_hermitian(R0, "ellipticity_distance");
  detail::require_hermitian(R1, "ellipticity_distance");
  if (R0.rows() != R1.rows())
    throw std::invalid_argument("ellipticity_distance: dimension mismatch");
  const auto e0 = hermitian_eig(R0);
  detail::require_pd(e0, "ellipticity_distance");
  const auto e1 = hermitian_eig(R1);
  detail::require_pd(e1, "ellipticity_distance");
  const int n = static_cast<int>(R0.rows());
  const Eigen::MatrixXcd inv0 =
      detail::apply_spectral(e0, [](double x) { return 1.0 / x; });
  const double tr = (inv0 * R1).trace().real();
  double logdet = 0.0;
  for (int i = 0; i < n; ++i)
    logdet += std::log(e1.values[i]) - std::log(e0.values[i]);
  return std::max(n * std::log(tr / n) - logdet, 0.0);
}

// Minimizer of sum_j KL(R_j, R) over R: harmonic mean (mean of inverses)^{-1}.
inline Eigen::MatrixXcd kl_barycenter(const std::vector<Eigen::MatrixXcd>& Rs) {
  if (Rs.empty()) throw std::invalid_argument("kl_barycenter: empty input");
  const int n = static_cast<int>(Rs[0].rows());
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& R : Rs) {
    detail::require_hermitian(R, "kl_barycenter");
    if (R.rows() != n)
      throw std::invalid_argument("kl_barycenter: dimension mismatch");
    const auto e = hermitian_eig(R);
    detail::require_pd(e, "kl_barycenter");
    acc += detail::apply_spectral(e, [](double x) { return 1.0 / x; });
  }
  acc /= static_cast<double>(Rs.size());
  return detail::hermitize(
      detail::apply_spectral(detail::eig_symmetrized(acc),
                             [](double x) { return 1.0 / x; }));
}

struct EllipticityBarycenter {
  Eigen::MatrixXcd normalized;   // unit-diagonal congruence of the fixed point
  Eigen::MatrixXcd fixed_point;  // R with F(R) = R, trace n
  int iterations = 0;
  double residual = 0.0;         // ||F(R) - R||_F / ||R||_F at exit
};

// Fixed point of F(R) = ( (n/J) sum_j R_j^{-1} / tr(R_j^{-1} R) )^{-1}.
// F is 1-homogeneous, so the iteration renormalizes to trace n each step; at
// any fixed point of the normalized iteration tr(R F(R)^{-1}) = n forces the
// homogeneity factor to 1, i.e. the limit satisfies F(R) = R exactly.
inline EllipticityBarycenter ellipticity_barycenter(
    const std::vector<Eigen::MatrixXcd>& Rs, double tol = 1e-10,
    int max_iter = 500) {
  if (Rs.empty()) throw std::invalid_argument("ellipticity_barycenter: empty input");
  const int n = static_cast<int>(Rs[0].rows());
  const int J = static_cast<int>(Rs.size());
  std::vector<Eigen::MatrixXcd> invs;
  invs.reserve(Rs.size());
  for (const auto& R : Rs) {
    detail::require_hermitian(R, "ellipticity_barycenter");
    if (R.rows() != n)
      throw std::invalid_argument("ellipticity_barycenter: dimension mismatch");
    const auto e = hermitian_eig(R);
    detail::require_pd(e, "ellipticity_barycenter");
    invs.push_back(detail::apply_spectral(e, [](double x) { return 1.0 / x; }));
  }

  auto F = [&](const Eigen::MatrixXcd& R) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& W : invs) acc += W / (W * R).trace().real();
    acc *= static_cast<double>(n) / J;
    return detail::apply_spectral(detail::eig_symmetrized(acc),
                                  [](double x) { return 1.0 / x; });
  };

  Eigen::MatrixXcd R = Eigen::MatrixXcd::Identity(n, n);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXcd FR = F(R);
    residual = (FR - R).norm() / R.norm();
    Eigen::MatrixXcd Rn = FR * (n / FR.trace().real());
    const double step = (Rn - R).norm() / R.norm();
    R = detail::hermitize(Rn);
    if (step < tol && residual < 1e-8) {
      EllipticityBarycenter out;
      out.fixed_point = R;
      out.iterations = it;
      out.residual = (F(R) - R).norm() / R.norm();
      Eigen::VectorXd d(n);
      for (int i = 0; i < n; ++i) d[i] = 1.0 / std::sqrt(R(i, i).real());
      out.normalized = d.asDiagonal() * R * d.asDiagonal();
      return out;
    }
  }
  std::ostringstream msg;
  msg << "ellipticity_barycenter: no convergence after " << max_iter
      << " iterations (last residual " << residual << ")";
  throw std::runtime_error(msg.str());
}

}  // namespace tomt

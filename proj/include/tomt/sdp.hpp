// Complex Hermitian semidefinite programming:
//   min Re<C, X>  s.t.  Re<A_i, X> = b_i,  X >= 0 (PSD),
// with <A, B> = tr(A B) for Hermitian arguments. Primal-dual path following
// with Nesterov-Todd scaling, working natively on complex matrices (no 2d x
// 2d real embedding; the complex Schur complement is real symmetric PD).
// Constraints are stored sparsely; the SOS selector matrices have O(m) of
// d = m^2 entries, and dense constraint storage would dominate memory.
#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "tomt/common.hpp"

namespace tomt {

using HermTriplets = std::vector<std::tuple<int, int, cplx>>;

struct SdpProblem {
  int dim = 0;
  Eigen::MatrixXcd C;
  std::vector<HermTriplets> constraints;  // entries of each Hermitian A_i
  Eigen::VectorXd b;

  // Appends <A, X> = rhs with A given densely; nonzeros are extracted.
  void add_constraint(const Eigen::MatrixXcd& A, double rhs) {
    HermTriplets t;
    for (int j = 0; j < A.rows(); ++j)
      for (int k = 0; k < A.cols(); ++k)
        if (A(j, k) != cplx(0.0, 0.0)) t.emplace_back(j, k, A(j, k));
    add_constraint_sparse(std::move(t), rhs);
  }

  void add_constraint_sparse(HermTriplets t, double rhs) {
    constraints.push_back(std::move(t));
    const auto m = b.size();
    b.conservativeResize(m + 1);
    b[m] = rhs;
  }
};

struct SdpSolution {
  Eigen::MatrixXcd X;
  Eigen::VectorXd y;
  Eigen::MatrixXcd Z;
  SolveReport report;
};

namespace detail {

inline Eigen::MatrixXcd sdp_constraint_dense(const HermTriplets& t, int d) {
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& [j, k, v] : t) A(j, k) += v;
  return A;
}

inline double sdp_inner(const HermTriplets& t, const Eigen::MatrixXcd& X) {
  cplx acc(0.0, 0.0);
  for (const auto& [j, k, v] : t) acc += v * X(k, j);  // tr(A X)
  return acc.real();
}

// A_i * M with A_i sparse: rows touched are the row indices of A_i.
inline Eigen::MatrixXcd sdp_left_mul(const HermTriplets& t,
                                     const Eigen::MatrixXcd& M) {
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(M.rows(), M.cols());
  for (const auto& [j, k, v] : t) R.row(j) += v * M.row(k);
  return R;
}

// Hermitian square root and inverse square root via eigendecomposition.
inline void sdp_sqrt_pair(const Eigen::MatrixXcd& H, Eigen::MatrixXcd& sq,
                          Eigen::MatrixXcd& isq) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      0.5 * (H + H.adjoint()));
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
  const Eigen::VectorXd r = lam.cwiseSqrt();
  sq = es.eigenvectors() * r.asDiagonal() * es.eigenvectors().adjoint();
  isq = es.eigenvectors() * r.cwiseInverse().asDiagonal() *
        es.eigenvectors().adjoint();
}

// Largest alpha <= 1 with S + alpha dS PSD, via eigmin(L^-1 dS L^-H).
inline double sdp_max_step(const Eigen::MatrixXcd& S,
                           const Eigen::MatrixXcd& dS) {
  Eigen::LLT<Eigen::MatrixXcd> llt(S);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXcd Li = llt.matrixL().solve(
      Eigen::MatrixXcd::Identity(S.rows(), S.cols()));
  const Eigen::MatrixXcd G = Li * dS * Li.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      0.5 * (G + G.adjoint()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return 1.0;
  return std::min(1.0, -1.0 / lmin);
}

}  // namespace detail

inline SdpSolution solve_sdp(const SdpProblem& p, double tol = 1e-7,
                             int max_iter = 100) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const int d = p.dim;
  const int m = static_cast<int>(p.constraints.size());
  if (d < 1) throw std::invalid_argument("solve_sdp: dim must be >= 1");
  if (p.C.rows() != d || p.C.cols() != d)
    throw std::invalid_argument("solve_sdp: objective dimension mismatch");
  if (p.b.size() != m)
    throw std::invalid_argument("solve_sdp: constraint/rhs count mismatch");

  const Eigen::MatrixXcd C = 0.5 * (p.C + p.C.adjoint());
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(d, d);

  double anorm = 1.0;
  for (const auto& t : p.constraints)
    for (const auto& [j, k, v] : t) anorm = std::max(anorm, std::abs(v));
  const double bscale = 1.0 + p.b.cwiseAbs().maxCoeff();
  const double cscale = 1.0 + C.norm();

  const double rho =
      std::max({1.0, p.b.cwiseAbs().maxCoeff() / anorm, C.norm() / std::sqrt(d)});
  Eigen::MatrixXcd X = rho * I;
  Eigen::MatrixXcd Z = rho * I;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  SdpSolution out;
  SolveReport& rep = out.report;
  Eigen::LDLT<Eigen::MatrixXd> hfac;

  // Near a degenerate optimum the scaled Newton system eventually breaks
  // down; the iterate just before the breakdown is typically far better than
  // the one the failing step leaves behind, so keep the best state seen.
  double best_merit = std::numeric_limits<double>::infinity();
  Eigen::MatrixXcd bestX, bestZ;
  Eigen::VectorXd besty;
  SolveReport best_rep;

  int iter = 0;
  for (iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd rp(m);
    for (int i = 0; i < m; ++i)
      rp[i] = p.b[i] - detail::sdp_inner(p.constraints[i], X);
    Eigen::MatrixXcd Rd = C - Z;
    for (int i = 0; i < m; ++i)
      for (const auto& [jj, kk, v] : p.constraints[i]) Rd(jj, kk) -= y[i] * v;
    Rd = 0.5 * (Rd + Rd.adjoint()).eval();

    const double gap = (X * Z).trace().real();
    const double cx = (C * X).trace().real();
    rep.primal_residual = rp.cwiseAbs().maxCoeff() / bscale;
    rep.dual_residual = Rd.norm() / cscale;
    rep.gap = std::abs(gap) / (1.0 + std::abs(cx));
    rep.objective = cx;
    rep.iterations = iter - 1;
    const double merit =
        std::max({rep.primal_residual, rep.dual_residual, rep.gap});
    if (merit < best_merit && X.allFinite() && Z.allFinite()) {
      best_merit = merit;
      bestX = X;
      besty = y;
      bestZ = Z;
      best_rep = rep;
    }
    if (rep.primal_residual <= tol && rep.dual_residual <= tol &&
        rep.gap <= tol) {
      rep.status = SolveStatus::optimal;
      break;
    }
    if (p.b.dot(y) > 1e10 * bscale * cscale && rep.dual_residual <= 1e-5) {
      rep.status = SolveStatus::infeasible;
      break;
    }
    if (!X.allFinite() || !Z.allFinite()) {
      rep.status = SolveStatus::numerical_failure;
      break;
    }

    // Nesterov-Todd scaling point: W Z W = X.
    Eigen::MatrixXcd sqX, isqX;
    detail::sdp_sqrt_pair(X, sqX, isqX);
    Eigen::MatrixXcd sqM, isqM;
    detail::sdp_sqrt_pair(sqX * Z * sqX, sqM, isqM);
    const Eigen::MatrixXcd W = sqX * isqM * sqX;

    // Schur complement H_ij = Re tr(A_i W A_j W), assembled from sparse A_i.
    std::vector<Eigen::MatrixXcd> WAW(m);
    for (int j = 0; j < m; ++j)
      WAW[j] = W * detail::sdp_left_mul(p.constraints[j], W);
    Eigen::MatrixXd H(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        H(i, j) = detail::sdp_inner(p.constraints[i], WAW[j]);
    H = 0.5 * (H + H.transpose()).eval();
    const double hmax = std::max(H.diagonal().maxCoeff(), 1e-300);
    bool ok = false;
    for (double ridge : {0.0, 1e-13, 1e-10, 1e-7}) {
      Eigen::MatrixXd Ht = H;
      Ht.diagonal().array() += ridge * hmax;
      hfac.compute(Ht);
      if (hfac.info() == Eigen::Success && hfac.isPositive()) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      rep.status = SolveStatus::numerical_failure;
      break;
    }

    const double mu = gap / d;
    const Eigen::MatrixXcd Zinv = Z.llt().solve(I);
    const Eigen::MatrixXcd WRdW = W * Rd * W;

    // ntd_rhs(sigma): direction for target sigma*mu on the central path.
    auto ntd_solve = [&](double sigma, Eigen::MatrixXcd& dX,
                         Eigen::MatrixXcd& dZ, Eigen::VectorXd& dy) {
      const Eigen::MatrixXcd Base = sigma * mu * Zinv - X - WRdW;
      Eigen::VectorXd rhs(m);
      for (int i = 0; i < m; ++i)
        rhs[i] = rp[i] - detail::sdp_inner(p.constraints[i], Base);
      dy = hfac.solve(rhs);
      dZ = Rd;
      for (int i = 0; i < m; ++i)
        for (const auto& [jj, kk, v] : p.constraints[i])
          dZ(jj, kk) -= dy[i] * v;
      dZ = 0.5 * (dZ + dZ.adjoint()).eval();
      dX = sigma * mu * Zinv - X - W * dZ * W;
      dX = 0.5 * (dX + dX.adjoint()).eval();
    };

    Eigen::MatrixXcd dXa, dZa;
    Eigen::VectorXd dya;
    ntd_solve(0.0, dXa, dZa, dya);
    const double apa = detail::sdp_max_step(X, dXa);
    const double ada = detail::sdp_max_step(Z, dZa);
    const double gap_aff =
        ((X + apa * dXa) * (Z + ada * dZa)).trace().real();
    double sigma = std::pow(std::max(gap_aff, 0.0) / std::max(gap, 1e-300), 3.0);
    sigma = std::clamp(sigma, 1e-6, 1.0);

    Eigen::MatrixXcd dX, dZ;
    Eigen::VectorXd dy;
    ntd_solve(sigma, dX, dZ, dy);
    const double taustep = rep.gap < 1e-4 ? 0.995 : 0.98;
    const double ap = taustep * detail::sdp_max_step(X, dX);
    const double ad = taustep * detail::sdp_max_step(Z, dZ);
    if (ap < 1e-12 && ad < 1e-12) {
      rep.status = SolveStatus::numerical_failure;
      break;
    }
    X += ap * dX;
    y += ad * dy;
    Z += ad * dZ;
    X = 0.5 * (X + X.adjoint()).eval();
    Z = 0.5 * (Z + Z.adjoint()).eval();
  }
  if (iter > max_iter) rep.status = SolveStatus::iteration_limit;

  if ((rep.status == SolveStatus::numerical_failure ||
       rep.status == SolveStatus::iteration_limit) &&
      std::isfinite(best_merit)) {
    const double merit =
        std::max({rep.primal_residual, rep.dual_residual, rep.gap});
    if (best_merit < merit || !X.allFinite() || !Z.allFinite()) {
      X = bestX;
      y = besty;
      Z = bestZ;
      const SolveStatus status = rep.status;
      rep = best_rep;
      rep.status = status;
    }
    if (rep.primal_residual <= tol && rep.dual_residual <= tol &&
        rep.gap <= tol)
      rep.status = SolveStatus::optimal;
    else if (rep.primal_residual <= 100.0 * tol &&
             rep.dual_residual <= 100.0 * tol && rep.gap <= 100.0 * tol)
      rep.status = SolveStatus::near_optimal;
  }
  rep.seconds = std::chrono::duration<double>(clock::now() - t_start).count();

  out.X = X;
  out.y = y;
  out.Z = Z;
  return out;
}

}  // namespace tomt

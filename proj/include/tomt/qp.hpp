// Nonnegatively constrained convex QP:  min 1/2 x^T P x + q^T x  s.t. x >= 0,
// with P PSD supplied as a matrix-free operator. Accelerated projected
// gradient (FISTA) with backtracking on the Lipschitz estimate and gradient
// based momentum restarts.
#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <functional>

#include "tomt/common.hpp"

namespace tomt {

struct QpSolution {
  Eigen::VectorXd x;
  SolveReport report;
};

using QpOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline QpSolution solve_qp_nonneg(const QpOperator& P,
                                  const Eigen::VectorXd& q, double tol = 1e-8,
                                  int max_iter = 10000,
                                  const Eigen::VectorXd* warm_start = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const auto V = q.size();
  if (V == 0) throw std::invalid_argument("solve_qp_nonneg: empty problem");

  auto objective = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& Pv) {
    return 0.5 * v.dot(Pv) + q.dot(v);
  };

  // Lipschitz estimate: power iteration on P, refined by backtracking below.
  double L;
  {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(V).normalized();
    double lam = 1.0;
    for (int i = 0; i < 25; ++i) {
      Eigen::VectorXd Pv = P(v);
      lam = Pv.norm();
      if (lam <= 1e-300) break;
      v = Pv / lam;
    }
    L = std::max(lam, 1e-12);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(V);
  if (warm_start != nullptr) {
    if (warm_start->size() != V)
      throw std::invalid_argument("solve_qp_nonneg: warm start size mismatch");
    x = warm_start->cwiseMax(0.0);
  }
  Eigen::VectorXd yv = x;
  double t = 1.0;

  QpSolution out;
  SolveReport& rep = out.report;
  rep.dual_residual = 0.0;

  Eigen::VectorXd Px = P(x);
  for (int iter = 1; iter <= max_iter; ++iter) {
    const Eigen::VectorXd Py = P(yv);
    const Eigen::VectorXd gy = Py + q;
    const double fy = objective(yv, Py);

    // backtracking on the majorizer f(y) + g.(x-y) + L/2 |x-y|^2
    Eigen::VectorXd xn;
    Eigen::VectorXd Pxn;
    while (true) {
      xn = (yv - gy / L).cwiseMax(0.0);
      Pxn = P(xn);
      const Eigen::VectorXd diff = xn - yv;
      const double lhs = objective(xn, Pxn);
      const double rhs =
          fy + gy.dot(diff) + 0.5 * L * diff.squaredNorm();
      if (lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)) || L > 1e18) break;
      L *= 2.0;
    }

    // KKT residual at the new point
    const Eigen::VectorXd gx = Pxn + q;
    const double res = (xn - (xn - gx).cwiseMax(0.0)).cwiseAbs().maxCoeff();
    rep.primal_residual = res;
    rep.gap = res / (1.0 + gx.cwiseAbs().maxCoeff());
    rep.objective = objective(xn, Pxn);
    rep.iterations = iter;
    if (res <= tol * (1.0 + gx.cwiseAbs().maxCoeff())) {
      x = xn;
      rep.status = SolveStatus::optimal;
      rep.seconds =
          std::chrono::duration<double>(clock::now() - t_start).count();
      out.x = x;
      return out;
    }

    // momentum with gradient restart
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (gy.dot(xn - x) > 0.0) {
      yv = xn;
      t = 1.0;
    } else {
      yv = xn + ((t - 1.0) / tn) * (xn - x);
      t = tn;
    }
    x = xn;
    Px = Pxn;
  }

  rep.status = SolveStatus::iteration_limit;
  rep.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  out.x = x;
  return out;
}

}  // namespace tomt

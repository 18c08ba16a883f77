// Discretized optimal-mass-transport distances: S and S_kappa between
// spectra on a frequency grid, T and T_kappa between PSD Toeplitz
// covariances, and the gridded dual with certificate recovery.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomt/common.hpp"
#include "tomt/lp.hpp"
#include "tomt/spectral.hpp"

namespace tomt {

struct CostSpec {
  enum class Kind { chordal_pow, abs_angle_pow, fixed_plus_chordal, custom_table };

  Kind kind = Kind::chordal_pow;
  double p = 2.0;
  Eigen::MatrixXd table;  // custom_table only

  static CostSpec chordal(double p = 2.0) {
    CostSpec s;
    s.kind = Kind::chordal_pow;
    s.p = p;
    return s;
  }
  static CostSpec abs_angle(double p = 2.0) {
    CostSpec s;
    s.kind = Kind::abs_angle_pow;
    s.p = p;
    return s;
  }
  static CostSpec fixed_plus_chordal() {
    CostSpec s;
    s.kind = Kind::fixed_plus_chordal;
    return s;
  }
  static CostSpec custom(Eigen::MatrixXd t) {
    CostSpec s;
    s.kind = Kind::custom_table;
    s.table = std::move(t);
    return s;
  }
};

// c(theta_k, theta_l) over one grid. Diagonal exactly zero for the
// distance-like kinds; symmetric for every built-in kind.
inline Eigen::MatrixXd build_cost_matrix(const FrequencyGrid& grid,
                                         const CostSpec& spec) {
  const int N = grid.N;
  if (spec.kind == CostSpec::Kind::custom_table) {
    if (spec.table.rows() != N || spec.table.cols() != N)
      throw std::invalid_argument("build_cost_matrix: table shape mismatch");
    if (spec.table.size() > 0 && spec.table.minCoeff() < 0.0)
      throw std::invalid_argument("build_cost_matrix: negative cost entries");
    return spec.table;
  }
  if (!(spec.p > 0.0))
    throw std::invalid_argument("build_cost_matrix: p must be positive");
  Eigen::MatrixXd C(N, N);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l <= k; ++l) {  // mirrored below: exact symmetry
      const double delta = wrap_to_T(grid.node(k) - grid.node(l));
      double v = 0.0;
      switch (spec.kind) {
        case CostSpec::Kind::chordal_pow: {
          const double s = 2.0 * std::abs(std::sin(0.5 * delta));
          v = spec.p == 2.0 ? s * s : std::pow(s, spec.p);
          break;
        }
        case CostSpec::Kind::abs_angle_pow: {
          const double a = std::abs(delta);
          v = spec.p == 2.0 ? a * a : std::pow(a, spec.p);
          break;
        }
        default: {  // fixed_plus_chordal: baseline charge off the diagonal
          const double s = std::sin(0.5 * delta);
          v = k == l ? 0.0 : 1.0 + 4.0 * s * s;
          break;
        }
      }
      C(k, l) = v;
      C(l, k) = v;
    }
  return C;
}

// Mass moved from node k to node l sits at M(k, l).
struct TransportPlan {
  FrequencyGrid grid;
  Eigen::MatrixXd M;

  Eigen::VectorXd row_marginal() const { return M.rowwise().sum(); }
  Eigen::VectorXd col_marginal() const {
    return M.colwise().sum().transpose();
  }
};

struct DistanceResult {
  double value;
  TransportPlan plan;
  DiscreteSpectrum psi0, psi1;  // perturbation targets; plan marginals when kappa-free
  SolveReport report;
};

struct DualCertificate {
  Eigen::MatrixXcd lambda0, lambda1;
  double value;
  SolveReport report;
};

namespace detail {

inline void require_solved(const SolveReport& rep, const std::string& who) {
  if (rep.status == SolveStatus::optimal ||
      rep.status == SolveStatus::near_optimal)
    return;
  if (rep.status == SolveStatus::infeasible)
    throw std::runtime_error(
        who +
        ": problem infeasible at this grid; off-grid spectral atoms may not "
        "be representable, increase N or feas_tol");
  throw std::runtime_error(who + ": solver failed: " + to_string(rep.status));
}

inline Eigen::VectorXd flatten_rowmajor(const Eigen::MatrixXd& C) {
  const int N0 = static_cast<int>(C.rows());
  const int N1 = static_cast<int>(C.cols());
  Eigen::VectorXd v(static_cast<Eigen::Index>(N0) * N1);
  for (int k = 0; k < N0; ++k) v.segment(static_cast<Eigen::Index>(k) * N1, N1) = C.row(k);
  return v;
}

inline Eigen::MatrixXd plan_from(const Eigen::VectorXd& x, int N) {
  Eigen::MatrixXd M(N, N);
  for (int k = 0; k < N; ++k)
    M.row(k) = x.segment(static_cast<Eigen::Index>(k) * N, N);
  return M;
}

// Columns carry the realified coefficients of Gamma*(Lambda)(theta_k) in the
// parameterization t = [s_0, Re s_1, Im s_1, ...] of superdiagonal sums:
// Gamma*(Lambda)(theta) = (s_0 + 2 sum_d (Re s_d cos - Im s_d sin)) / 2pi.
inline Eigen::MatrixXd dual_profile(const FrequencyGrid& grid, int n) {
  Eigen::MatrixXd P = moment_profile(grid, n);
  for (int j = 1; j < n; ++j) {
    P.row(2 * j - 1) *= 2.0;
    P.row(2 * j) *= -2.0;
  }
  return P;
}

// h with h . t = <Lambda, R> under the same parameterization.
inline Eigen::VectorXd dual_objective_vector(const ToeplitzCov& R) {
  Eigen::VectorXd h = realify_lags(R);
  for (int j = 1; j < R.n; ++j) {
    h[2 * j - 1] *= 2.0;
    h[2 * j] *= -2.0;
  }
  return h;
}

inline Eigen::MatrixXcd lambda_from_t(const Eigen::VectorXd& t, int n) {
  std::vector<cplx> s(n);
  s[0] = cplx(t[0], 0.0);
  for (int d = 1; d < n; ++d) s[d] = cplx(t[2 * d - 1], t[2 * d]);
  return toeplitz_from_superdiag_sums(s);
}

inline double toeplitz_frob(const ToeplitzCov& R) {
  double acc = R.n * R.r0() * R.r0();
  for (int d = 1; d < R.n; ++d)
    acc += 2.0 * (R.n - d) * std::norm(R.lags[d]);
  return std::sqrt(acc);
}

inline double default_feas_tol(const ToeplitzCov& R0, const ToeplitzCov& R1) {
  return 1e-7 * std::max(toeplitz_frob(R0), toeplitz_frob(R1));
}

// Appends per-row slack pairs turning |a_p . x - r_p| <= tol into equalities:
//   mom row p:  a_p . x + s_p = r_p + tol,   pair row p:  s_p + s'_p = 2 tol.
inline void add_tolerance_slacks(LinearProgram& lp, int mom_row0, int pair_row0,
                                 int count) {
  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(2 * count);
  for (int p = 0; p < count; ++p) {
    trips.emplace_back(mom_row0 + p, p, 1.0);
    trips.emplace_back(pair_row0 + p, p, 1.0);
  }
  lp.add_block(CscBlock::from_triplets(lp.rows, count, trips),
               Eigen::VectorXd::Zero(count));
  trips.clear();
  for (int p = 0; p < count; ++p) trips.emplace_back(pair_row0 + p, p, 1.0);
  lp.add_block(CscBlock::from_triplets(lp.rows, count, trips),
               Eigen::VectorXd::Zero(count));
}

// Signed identity columns into rows [row0, row0 + count).
inline CscBlock signed_identity(int lp_rows, int row0, int count, double sign) {
  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(count);
  for (int k = 0; k < count; ++k) trips.emplace_back(row0 + k, k, sign);
  return CscBlock::from_triplets(lp_rows, count, trips);
}

}  // namespace detail

// Balanced transport between two spectra on a shared grid (fixed marginals).
inline DistanceResult compute_S(const DiscreteSpectrum& phi0,
                                const DiscreteSpectrum& phi1,
                                const CostSpec& cost) {
  if (!(phi0.grid == phi1.grid))
    throw std::invalid_argument("compute_S: spectra must share a grid");
  const int N = phi0.grid.N;
  const double m0 = phi0.total(), m1 = phi1.total();
  if (std::abs(m0 - m1) > 1e-9 * std::max({m0, m1, 1e-300}))
    throw std::invalid_argument(
        "compute_S: total masses differ; use compute_S_kappa for unbalanced "
        "spectra");
  const Eigen::MatrixXd C = build_cost_matrix(phi0.grid, cost);

  LinearProgram lp;
  lp.rows = 2 * N - 1;  // last column-marginal row is implied by equal mass
  lp.b.resize(lp.rows);
  lp.b << phi0.mass, phi1.mass.head(N - 1);
  lp.add_block(PlanMarginalBlock{N, 0, N, N - 1}, detail::flatten_rowmajor(C));

  const auto sol = solve_lp(lp);
  detail::require_solved(sol.report, "compute_S");
  TransportPlan plan{phi0.grid, detail::plan_from(sol.x, N)};
  const double value = (plan.M.array() * C.array()).sum();
  DiscreteSpectrum psi0(phi0.grid, plan.row_marginal());
  DiscreteSpectrum psi1(phi0.grid, plan.col_marginal());
  return {value, std::move(plan), std::move(psi0), std::move(psi1), sol.report};
}

// Unbalanced transport: mass may be created or destroyed at kappa per unit.
inline DistanceResult compute_S_kappa(const DiscreteSpectrum& phi0,
                                      const DiscreteSpectrum& phi1,
                                      const CostSpec& cost, double kappa) {
  if (!(phi0.grid == phi1.grid))
    throw std::invalid_argument("compute_S_kappa: spectra must share a grid");
  if (!(kappa > 0.0))
    throw std::invalid_argument("compute_S_kappa: kappa must be positive");
  const int N = phi0.grid.N;
  const Eigen::MatrixXd C = build_cost_matrix(phi0.grid, cost);

  // rowsum(M) + u0 - v0 = phi0 and likewise for columns; u, v price the
  // two-sided mass discrepancy at kappa each.
  LinearProgram lp;
  lp.rows = 2 * N;
  lp.b.resize(lp.rows);
  lp.b << phi0.mass, phi1.mass;
  lp.add_block(PlanMarginalBlock{N, 0, N, N}, detail::flatten_rowmajor(C));
  const Eigen::VectorXd ck = Eigen::VectorXd::Constant(N, kappa);
  lp.add_block(detail::signed_identity(lp.rows, 0, N, 1.0), ck);
  lp.add_block(detail::signed_identity(lp.rows, 0, N, -1.0), ck);
  lp.add_block(detail::signed_identity(lp.rows, N, N, 1.0), ck);
  lp.add_block(detail::signed_identity(lp.rows, N, N, -1.0), ck);

  const auto sol = solve_lp(lp);
  detail::require_solved(sol.report, "compute_S_kappa");
  TransportPlan plan{phi0.grid, detail::plan_from(sol.x, N)};
  const Eigen::VectorXd rm = plan.row_marginal(), cm = plan.col_marginal();
  const double value = (plan.M.array() * C.array()).sum() +
                       kappa * ((phi0.mass - rm).array().abs().sum() +
                                (phi1.mass - cm).array().abs().sum());
  DiscreteSpectrum psi0(phi0.grid, rm);
  DiscreteSpectrum psi1(phi0.grid, cm);
  return {value, std::move(plan), std::move(psi0), std::move(psi1), sol.report};
}

// S_kappa^{1/p} for the wrapped-angle cost; a metric on bounded measures.
inline double wasserstein_kappa(const DiscreteSpectrum& phi0,
                                const DiscreteSpectrum& phi1,
                                const CostSpec& cost, double kappa) {
  if (cost.kind != CostSpec::Kind::abs_angle_pow)
    throw std::invalid_argument(
        "wasserstein_kappa: cost kind must be abs_angle_pow");
  const double s = compute_S_kappa(phi0, phi1, cost, kappa).value;
  return std::pow(std::max(s, 0.0), 1.0 / cost.p);
}

// Transport distance between equal-diagonal PSD Toeplitz covariances: the
// plan's marginals must reproduce each matrix through Gamma, relaxed to an
// l-infinity budget of feas_tol per realified moment. feas_tol < 0 selects
// the default 1e-7 * max Frobenius norm; feas_tol == 0 enforces equalities.
inline DistanceResult compute_T(const ToeplitzCov& R0, const ToeplitzCov& R1,
                                const FrequencyGrid& grid,
                                const CostSpec& cost, double feas_tol = -1.0) {
  if (R0.n != R1.n)
    throw std::invalid_argument("compute_T: matrix orders differ");
  const double d0 = R0.r0(), d1 = R1.r0();
  if (std::abs(d0 - d1) > 1e-9 * std::max({d0, d1, 1e-300}))
    throw std::invalid_argument(
        "compute_T: diagonals differ; T compares equal-diagonal covariances, "
        "use compute_T_kappa");
  const int n = R0.n, N = grid.N, m = 2 * n - 1;
  if (feas_tol < 0.0) feas_tol = detail::default_feas_tol(R0, R1);
  const Eigen::MatrixXd G = moment_profile(grid, n);
  const Eigen::MatrixXd C = build_cost_matrix(grid, cost);

  LinearProgram lp;
  if (feas_tol == 0.0) {
    // exact moments; side-1 mass row dropped as a duplicate of side 0's
    lp.rows = 2 * m - 1;
    lp.b.resize(lp.rows);
    lp.b << realify_lags(R0), realify_lags(R1).tail(m - 1);
    lp.add_block(OuterSumBlock{G, G.bottomRows(m - 1), 0, m},
                 detail::flatten_rowmajor(C));
  } else {
    lp.rows = 4 * m;
    lp.b.resize(lp.rows);
    lp.b << (realify_lags(R0).array() + feas_tol).matrix(),
        (realify_lags(R1).array() + feas_tol).matrix(),
        Eigen::VectorXd::Constant(2 * m, 2.0 * feas_tol);
    lp.add_block(OuterSumBlock{G, G, 0, m}, detail::flatten_rowmajor(C));
    detail::add_tolerance_slacks(lp, 0, 2 * m, m);
    detail::add_tolerance_slacks(lp, m, 3 * m, m);
  }

  const auto sol = solve_lp(lp);
  detail::require_solved(sol.report, "compute_T");
  TransportPlan plan{grid, detail::plan_from(sol.x, N)};
  const double value = (plan.M.array() * C.array()).sum();
  DiscreteSpectrum psi0(grid, plan.row_marginal());
  DiscreteSpectrum psi1(grid, plan.col_marginal());
  return {value, std::move(plan), std::move(psi0), std::move(psi1), sol.report};
}

// T_kappa: marginals are decoupled from the moment-matched spectra psi0/psi1,
// with the (weighted) l1 gap priced at kappa. Diagonals need not match.
inline DistanceResult compute_T_kappa(const ToeplitzCov& R0,
                                      const ToeplitzCov& R1,
                                      const FrequencyGrid& grid,
                                      const CostSpec& cost, double kappa,
                                      double feas_tol = -1.0) {
  if (R0.n != R1.n)
    throw std::invalid_argument("compute_T_kappa: matrix orders differ");
  if (!(kappa > 0.0))
    throw std::invalid_argument("compute_T_kappa: kappa must be positive");
  const int n = R0.n, N = grid.N, m = 2 * n - 1;
  if (feas_tol < 0.0) feas_tol = detail::default_feas_tol(R0, R1);
  const Eigen::MatrixXd G = moment_profile(grid, n);
  const Eigen::MatrixXd C = build_cost_matrix(grid, cost);

  // rows: link0 [0,N), link1 [N,2N), mom0, mom1, then slack pair rows.
  const int mom0 = 2 * N, mom1 = 2 * N + m;
  const bool relaxed = feas_tol > 0.0;
  LinearProgram lp;
  lp.rows = 2 * N + 2 * m + (relaxed ? 2 * m : 0);
  lp.b = Eigen::VectorXd::Zero(lp.rows);
  if (relaxed) {
    lp.b.segment(mom0, m) = (realify_lags(R0).array() + feas_tol).matrix();
    lp.b.segment(mom1, m) = (realify_lags(R1).array() + feas_tol).matrix();
    lp.b.tail(2 * m).setConstant(2.0 * feas_tol);
  } else {
    lp.b.segment(mom0, m) = realify_lags(R0);
    lp.b.segment(mom1, m) = realify_lags(R1);
  }

  lp.add_block(PlanMarginalBlock{N, 0, N, N}, detail::flatten_rowmajor(C));
  // psi_j columns: -1 in the link row, moment profile into mom rows
  for (int side = 0; side < 2; ++side) {
    std::vector<std::tuple<int, int, double>> trips;
    trips.reserve(static_cast<size_t>(N) * (m + 1));
    const int link0 = side * N, momr = side == 0 ? mom0 : mom1;
    for (int k = 0; k < N; ++k) {
      trips.emplace_back(link0 + k, k, -1.0);
      for (int p = 0; p < m; ++p) trips.emplace_back(momr + p, k, G(p, k));
    }
    lp.add_block(CscBlock::from_triplets(lp.rows, N, trips),
                 Eigen::VectorXd::Zero(N));
  }
  const Eigen::VectorXd ck = Eigen::VectorXd::Constant(N, kappa);
  lp.add_block(detail::signed_identity(lp.rows, 0, N, 1.0), ck);
  lp.add_block(detail::signed_identity(lp.rows, 0, N, -1.0), ck);
  lp.add_block(detail::signed_identity(lp.rows, N, N, 1.0), ck);
  lp.add_block(detail::signed_identity(lp.rows, N, N, -1.0), ck);
  if (relaxed) {
    detail::add_tolerance_slacks(lp, mom0, 2 * N + 2 * m, m);
    detail::add_tolerance_slacks(lp, mom1, 2 * N + 3 * m, m);
  }

  const auto sol = solve_lp(lp);
  detail::require_solved(sol.report, "compute_T_kappa");
  TransportPlan plan{grid, detail::plan_from(sol.x, N)};
  const Eigen::Index qn = static_cast<Eigen::Index>(N) * N;
  DiscreteSpectrum psi0(grid, sol.x.segment(qn, N));
  DiscreteSpectrum psi1(grid, sol.x.segment(qn + N, N));
  const double value =
      (plan.M.array() * C.array()).sum() +
      kappa * ((psi0.mass - plan.row_marginal()).array().abs().sum() +
               (psi1.mass - plan.col_marginal()).array().abs().sum());
  return {value, std::move(plan), std::move(psi0), std::move(psi1), sol.report};
}

// Gridded dual: maximize <Lambda0,R0> + <Lambda1,R1> over pairs whose
// Toeplitz-adjoint forms satisfy the sampled cost inequalities (and, with
// kappa, the level bounds |Gamma*(Lambda_j)| <= kappa). Solved through the
// standard-form partner LP; the row duals are the Lambda parameters.
inline DualCertificate dual_grid(const ToeplitzCov& R0, const ToeplitzCov& R1,
                                 const FrequencyGrid& grid,
                                 const CostSpec& cost,
                                 std::optional<double> kappa = std::nullopt) {
  if (R0.n != R1.n)
    throw std::invalid_argument("dual_grid: matrix orders differ");
  if (kappa && !(*kappa > 0.0))
    throw std::invalid_argument("dual_grid: kappa must be positive");
  const int n = R0.n, N = grid.N, m = 2 * n - 1;
  const Eigen::MatrixXd P = detail::dual_profile(grid, n);
  const Eigen::MatrixXd C = build_cost_matrix(grid, cost);
  const Eigen::VectorXd h0 = detail::dual_objective_vector(R0);
  const Eigen::VectorXd h1 = detail::dual_objective_vector(R1);

  Eigen::VectorXd t0(m), t1(m);
  SolveReport rep;
  if (!kappa) {
    const double d0 = R0.r0(), d1 = R1.r0();
    if (std::abs(d0 - d1) > 1e-9 * std::max({d0, d1, 1e-300}))
      throw std::invalid_argument(
          "dual_grid: diagonals differ; the kappa-free dual needs "
          "equal-diagonal covariances");
    // The two mass rows coincide, so only s_0(L0) + s_0(L1) is determined;
    // merge them and split the recovered sum evenly (membership and the
    // objective are invariant to the split).
    LinearProgram lp;
    lp.rows = 2 * m - 1;
    lp.b.resize(lp.rows);
    lp.b << h0, h1.tail(m - 1);
    lp.add_block(OuterSumBlock{P, P.bottomRows(m - 1), 0, m},
                 detail::flatten_rowmajor(C));
    const auto sol = solve_lp(lp, 1e-9);
    detail::require_solved(sol.report, "dual_grid");
    rep = sol.report;
    t0[0] = t1[0] = 0.5 * sol.y[0];
    t0.tail(m - 1) = sol.y.segment(1, m - 1);
    t1.tail(m - 1) = sol.y.tail(m - 1);
  } else {
    // Level bounds go on lifted variables alpha_j >= Gamma*(Lambda_j); the
    // pair constraints bind alpha, which only tightens the raw forms.
    const int a0 = 2 * m, a1 = 2 * m + N;
    LinearProgram lp;
    lp.rows = 2 * m + 2 * N;
    lp.b = Eigen::VectorXd::Zero(lp.rows);
    lp.b.head(m) = h0;
    lp.b.segment(m, m) = h1;
    lp.add_block(PlanMarginalBlock{N, a0, a1, N}, detail::flatten_rowmajor(C));
    for (int side = 0; side < 2; ++side) {
      std::vector<std::tuple<int, int, double>> trips;
      trips.reserve(static_cast<size_t>(N) * (m + 1));
      for (int k = 0; k < N; ++k) {
        for (int p = 0; p < m; ++p)
          trips.emplace_back(side * m + p, k, P(p, k));
        trips.emplace_back((side == 0 ? a0 : a1) + k, k, -1.0);
      }
      lp.add_block(CscBlock::from_triplets(lp.rows, N, trips),
                   Eigen::VectorXd::Zero(N));
    }
    const Eigen::VectorXd ck = Eigen::VectorXd::Constant(N, *kappa);
    lp.add_block(detail::signed_identity(lp.rows, a0, N, 1.0), ck);
    lp.add_block(detail::signed_identity(lp.rows, a0, N, -1.0), ck);
    lp.add_block(detail::signed_identity(lp.rows, a1, N, 1.0), ck);
    lp.add_block(detail::signed_identity(lp.rows, a1, N, -1.0), ck);
    const auto sol = solve_lp(lp, 1e-9);
    detail::require_solved(sol.report, "dual_grid");
    rep = sol.report;
    t0 = sol.y.head(m);
    t1 = sol.y.segment(m, m);
  }

  // Absorb solver slack into the constant coefficients so the certificate is
  // exactly feasible; this only lowers the (still valid) bound.
  Eigen::VectorXd g0 = P.transpose() * t0, g1 = P.transpose() * t1;
  double shift0 = 0.0, shift1 = 0.0;
  if (kappa) {
    shift0 = std::max(0.0, g0.maxCoeff() - *kappa);
    shift1 = std::max(0.0, g1.maxCoeff() - *kappa);
  }
  double pair_excess = 0.0;
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < N; ++l)
      pair_excess = std::max(
          pair_excess, g0[k] - shift0 + g1[l] - shift1 - C(k, l));
  shift0 += 0.5 * pair_excess;
  shift1 += 0.5 * pair_excess;
  t0[0] -= two_pi * shift0;
  t1[0] -= two_pi * shift1;
  g0.array() -= shift0;
  g1.array() -= shift1;

  DualCertificate cert{detail::lambda_from_t(t0, n),
                       detail::lambda_from_t(t1, n), 0.0, rep};
  cert.value = trace_product(cert.lambda0, R0) + trace_product(cert.lambda1, R1);

  double worst = 0.0;
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < N; ++l)
      worst = std::max(worst, g0[k] + g1[l] - C(k, l));
  if (kappa)
    worst = std::max({worst, g0.maxCoeff() - *kappa, g1.maxCoeff() - *kappa});
  if (worst > 1e-8)
    throw std::runtime_error("dual_grid: certificate infeasible beyond tolerance");
  return cert;
}

}  // namespace tomt

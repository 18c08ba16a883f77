// Standard-form linear programming:  min c^T x  s.t.  A x = b, x >= 0.
//
// A is held as an ordered list of column blocks so the transport problems
// never materialize their N^2 plan columns:
//   CscBlock          generic sparse columns (slacks, lifted spectra)
//   PlanMarginalBlock column (k,l) has a 1 in row-marginal row k and
//                     col-marginal row l  (the transport-plan incidence)
//   OuterSumBlock     column (k,l) is [G0.col(k); G1.col(l)]  (plan columns
//                     hit by moment maps on both marginals)
// The solver only needs A x, A^T y and the normal matrix A diag(d) A^T, and
// each block contributes those at O(nnz) / O(N^2) cost.
#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <tuple>
#include <variant>
#include <vector>

#include "tomt/common.hpp"

namespace tomt {

struct CscBlock {
  int rows = 0;
  int cols = 0;
  std::vector<int> col_ptr;  // size cols + 1
  std::vector<int> row_idx;
  std::vector<double> val;

  static CscBlock from_triplets(
      int rows, int cols,
      const std::vector<std::tuple<int, int, double>>& trips) {
    CscBlock B;
    B.rows = rows;
    B.cols = cols;
    B.col_ptr.assign(cols + 1, 0);
    for (const auto& [r, c, v] : trips) {
      if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw std::invalid_argument("CscBlock: triplet out of range");
      ++B.col_ptr[c + 1];
    }
    for (int c = 0; c < cols; ++c) B.col_ptr[c + 1] += B.col_ptr[c];
    B.row_idx.resize(trips.size());
    B.val.resize(trips.size());
    std::vector<int> fill(B.col_ptr.begin(), B.col_ptr.end() - 1);
    for (const auto& [r, c, v] : trips) {
      B.row_idx[fill[c]] = r;
      B.val[fill[c]] = v;
      ++fill[c];
    }
    return B;
  }

  static CscBlock from_dense(const Eigen::MatrixXd& A) {
    std::vector<std::tuple<int, int, double>> trips;
    for (int c = 0; c < A.cols(); ++c)
      for (int r = 0; r < A.rows(); ++r)
        if (A(r, c) != 0.0) trips.emplace_back(r, c, A(r, c));
    return from_triplets(static_cast<int>(A.rows()),
                         static_cast<int>(A.cols()), trips);
  }
};

// Transport-plan incidence. Column q = k*N + l carries a 1 in row (row0 + k)
// and, when l < rows1, a 1 in row (row1 + l). rows1 < N drops trailing
// col-marginal rows (used to shed the one redundant equal-mass row).
struct PlanMarginalBlock {
  int N = 0;
  int row0 = 0;
  int row1 = 0;
  int rows1 = -1;  // -1 means N

  int second_rows() const { return rows1 < 0 ? N : rows1; }
};

// Column q = k*N + l is [G0.col(k) into rows row0..] + [G1.col(l) into rows
// row1..]. G0 and G1 may have different row counts but share N columns.
struct OuterSumBlock {
  Eigen::MatrixXd G0, G1;
  int row0 = 0;
  int row1 = 0;
};

using LpBlock = std::variant<CscBlock, PlanMarginalBlock, OuterSumBlock>;

namespace detail {

inline int block_cols(const LpBlock& blk) {
  if (const auto* c = std::get_if<CscBlock>(&blk)) return c->cols;
  if (const auto* p = std::get_if<PlanMarginalBlock>(&blk)) return p->N * p->N;
  const auto& o = std::get<OuterSumBlock>(blk);
  return static_cast<int>(o.G0.cols() * o.G1.cols());
}

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;
using RowMajorMapMut =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;

// y += B x   (x points at this block's slice)
inline void block_mul_add(const LpBlock& blk, const double* x,
                          Eigen::VectorXd& y) {
  if (const auto* c = std::get_if<CscBlock>(&blk)) {
    for (int j = 0; j < c->cols; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      for (int p = c->col_ptr[j]; p < c->col_ptr[j + 1]; ++p)
        y[c->row_idx[p]] += c->val[p] * xj;
    }
    return;
  }
  if (const auto* pm = std::get_if<PlanMarginalBlock>(&blk)) {
    const int N = pm->N;
    RowMajorMap X(x, N, N);
    y.segment(pm->row0, N) += X.rowwise().sum();
    const int n1 = pm->second_rows();
    y.segment(pm->row1, n1) += X.colwise().sum().head(n1).transpose();
    return;
  }
  const auto& o = std::get<OuterSumBlock>(blk);
  const int N = static_cast<int>(o.G0.cols());
  RowMajorMap X(x, N, N);
  y.segment(o.row0, o.G0.rows()) += o.G0 * X.rowwise().sum();
  y.segment(o.row1, o.G1.rows()) += o.G1 * X.colwise().sum().transpose();
}

// x += B^T y   (x points at this block's slice)
inline void block_tmul_add(const LpBlock& blk, const Eigen::VectorXd& y,
                           double* x) {
  if (const auto* c = std::get_if<CscBlock>(&blk)) {
    for (int j = 0; j < c->cols; ++j) {
      double acc = 0.0;
      for (int p = c->col_ptr[j]; p < c->col_ptr[j + 1]; ++p)
        acc += c->val[p] * y[c->row_idx[p]];
      x[j] += acc;
    }
    return;
  }
  if (const auto* pm = std::get_if<PlanMarginalBlock>(&blk)) {
    const int N = pm->N;
    const int n1 = pm->second_rows();
    RowMajorMapMut X(x, N, N);
    X.colwise() += y.segment(pm->row0, N);
    X.leftCols(n1).rowwise() += y.segment(pm->row1, n1).transpose();
    return;
  }
  const auto& o = std::get<OuterSumBlock>(blk);
  const int N = static_cast<int>(o.G0.cols());
  RowMajorMapMut X(x, N, N);
  const Eigen::VectorXd u = o.G0.transpose() * y.segment(o.row0, o.G0.rows());
  const Eigen::VectorXd v = o.G1.transpose() * y.segment(o.row1, o.G1.rows());
  X.colwise() += u;
  X.rowwise() += v.transpose();
}

// H += B diag(d) B^T   (d points at this block's slice; H gets both triangles)
inline void block_adat(const LpBlock& blk, const double* d,
                       Eigen::MatrixXd& H) {
  if (const auto* c = std::get_if<CscBlock>(&blk)) {
    for (int j = 0; j < c->cols; ++j) {
      const double dj = d[j];
      if (dj == 0.0) continue;
      for (int p = c->col_ptr[j]; p < c->col_ptr[j + 1]; ++p)
        for (int q = c->col_ptr[j]; q < c->col_ptr[j + 1]; ++q)
          H(c->row_idx[p], c->row_idx[q]) += dj * c->val[p] * c->val[q];
    }
    return;
  }
  if (const auto* pm = std::get_if<PlanMarginalBlock>(&blk)) {
    const int N = pm->N;
    const int n1 = pm->second_rows();
    RowMajorMap D(d, N, N);
    const Eigen::VectorXd rs = D.rowwise().sum();
    const Eigen::VectorXd cs = D.colwise().sum().transpose();
    H.block(pm->row0, pm->row0, N, N).diagonal() += rs;
    H.block(pm->row1, pm->row1, n1, n1).diagonal() += cs.head(n1);
    H.block(pm->row0, pm->row1, N, n1) += D.leftCols(n1);
    H.block(pm->row1, pm->row0, n1, N) += D.leftCols(n1).transpose();
    return;
  }
  const auto& o = std::get<OuterSumBlock>(blk);
  const int N = static_cast<int>(o.G0.cols());
  const auto p0 = o.G0.rows();
  const auto p1 = o.G1.rows();
  RowMajorMap D(d, N, N);
  const Eigen::VectorXd rs = D.rowwise().sum();
  const Eigen::VectorXd cs = D.colwise().sum().transpose();
  H.block(o.row0, o.row0, p0, p0) +=
      o.G0 * rs.asDiagonal() * o.G0.transpose();
  H.block(o.row1, o.row1, p1, p1) +=
      o.G1 * cs.asDiagonal() * o.G1.transpose();
  const Eigen::MatrixXd C = o.G0 * (D * o.G1.transpose());
  H.block(o.row0, o.row1, p0, p1) += C;
  H.block(o.row1, o.row0, p1, p0) += C.transpose();
}

}  // namespace detail

struct LinearProgram {
  int rows = 0;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<LpBlock> blocks;

  int cols() const { return static_cast<int>(c.size()); }

  void add_block(LpBlock blk, const Eigen::VectorXd& c_part) {
    if (detail::block_cols(blk) != c_part.size())
      throw std::invalid_argument(
          "LinearProgram::add_block: objective slice size mismatch");
    const auto old = c.size();
    c.conservativeResize(old + c_part.size());
    c.tail(c_part.size()) = c_part;
    blocks.push_back(std::move(blk));
  }

  static LinearProgram from_dense(const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& c) {
    if (A.rows() != b.size() || A.cols() != c.size())
      throw std::invalid_argument("LinearProgram::from_dense: shape mismatch");
    LinearProgram lp;
    lp.rows = static_cast<int>(A.rows());
    lp.b = b;
    lp.add_block(CscBlock::from_dense(A), c);
    return lp;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
    int off = 0;
    for (const auto& blk : blocks) {
      detail::block_mul_add(blk, x.data() + off, y);
      off += detail::block_cols(blk);
    }
    return y;
  }

  Eigen::VectorXd apply_T(const Eigen::VectorXd& y) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols());
    int off = 0;
    for (const auto& blk : blocks) {
      detail::block_tmul_add(blk, y, x.data() + off);
      off += detail::block_cols(blk);
    }
    return x;
  }

  Eigen::MatrixXd normal_matrix(const Eigen::VectorXd& d) const {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows, rows);
    int off = 0;
    for (const auto& blk : blocks) {
      detail::block_adat(blk, d.data() + off, H);
      off += detail::block_cols(blk);
    }
    return H;
  }
};

struct LpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd s;
  SolveReport report;
};

namespace detail {

// Row presolve for LPs given as a single generic sparse block: drops zero
// rows and exact duplicate rows, flags contradictions. The transport
// builders emit full-row-rank systems directly and bypass this (their LPs
// contain structured blocks).
struct Presolve {
  bool infeasible = false;
  std::vector<int> keep;  // surviving row indices, in order
};

inline Presolve presolve_rows(const LinearProgram& lp) {
  Presolve out;
  const auto* csc =
      lp.blocks.size() == 1 ? std::get_if<CscBlock>(&lp.blocks[0]) : nullptr;
  if (csc == nullptr || static_cast<long long>(lp.rows) * lp.cols() > 4000000) {
    out.keep.resize(lp.rows);
    for (int i = 0; i < lp.rows; ++i) out.keep[i] = i;
    return out;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(lp.rows, csc->cols);
  for (int j = 0; j < csc->cols; ++j)
    for (int p = csc->col_ptr[j]; p < csc->col_ptr[j + 1]; ++p)
      A(csc->row_idx[p], j) = csc->val[p];
  const double ascale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double bscale = std::max(1.0, lp.b.cwiseAbs().maxCoeff());
  std::vector<int> status(lp.rows, 0);  // 0 keep, 1 drop
  for (int i = 0; i < lp.rows; ++i) {
    if (A.row(i).cwiseAbs().maxCoeff() <= 1e-14 * ascale) {
      if (std::abs(lp.b[i]) > 1e-12 * bscale) {
        out.infeasible = true;
        return out;
      }
      status[i] = 1;
    }
  }
  for (int i = 0; i < lp.rows; ++i) {
    if (status[i]) continue;
    for (int j = i + 1; j < lp.rows; ++j) {
      if (status[j]) continue;
      if ((A.row(i) - A.row(j)).cwiseAbs().maxCoeff() <= 1e-14 * ascale) {
        if (std::abs(lp.b[i] - lp.b[j]) > 1e-12 * bscale) {
          out.infeasible = true;
          return out;
        }
        status[j] = 1;
      }
    }
  }
  for (int i = 0; i < lp.rows; ++i)
    if (!status[i]) out.keep.push_back(i);
  return out;
}

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1e30;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

}  // namespace detail

// Mehrotra predictor-corrector interior point method on the normal
// equations, dense Cholesky with an adaptive diagonal ridge. Deterministic.
inline LpSolution solve_lp(const LinearProgram& lp_in, double tol = 1e-8,
                           int max_iter = 200) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - t_start).count();
  };

  if (lp_in.cols() == 0)
    throw std::invalid_argument("solve_lp: problem has no variables");

  const auto pre = detail::presolve_rows(lp_in);
  LpSolution out;
  out.x = Eigen::VectorXd::Zero(lp_in.cols());
  out.y = Eigen::VectorXd::Zero(lp_in.rows);
  out.s = Eigen::VectorXd::Zero(lp_in.cols());
  if (pre.infeasible) {
    out.report.status = SolveStatus::infeasible;
    out.report.seconds = elapsed();
    return out;
  }

  // Reduced problem (usually identical to the input).
  LinearProgram lp = lp_in;
  const bool reduced = static_cast<int>(pre.keep.size()) != lp_in.rows;
  if (reduced) {
    auto& csc = std::get<CscBlock>(lp.blocks[0]);
    std::vector<int> newrow(lp_in.rows, -1);
    for (int i = 0; i < static_cast<int>(pre.keep.size()); ++i)
      newrow[pre.keep[i]] = i;
    std::vector<std::tuple<int, int, double>> trips;
    for (int j = 0; j < csc.cols; ++j)
      for (int p = csc.col_ptr[j]; p < csc.col_ptr[j + 1]; ++p)
        if (newrow[csc.row_idx[p]] >= 0)
          trips.emplace_back(newrow[csc.row_idx[p]], j, csc.val[p]);
    lp.rows = static_cast<int>(pre.keep.size());
    lp.blocks[0] =
        CscBlock::from_triplets(lp.rows, csc.cols, trips);
    Eigen::VectorXd nb(lp.rows);
    for (int i = 0; i < lp.rows; ++i) nb[i] = lp_in.b[pre.keep[i]];
    lp.b = nb;
  }

  const int E = lp.rows;
  const int V = lp.cols();

  // No constraints left: x = 0 is optimal iff c >= 0.
  if (E == 0) {
    if (lp.c.minCoeff() >= 0.0) {
      out.report.status = SolveStatus::optimal;
      out.report.objective = 0.0;
      out.report.primal_residual = 0.0;
      out.report.dual_residual = 0.0;
      out.report.gap = 0.0;
    } else {
      out.report.status = SolveStatus::unbounded;
    }
    out.report.seconds = elapsed();
    return out;
  }

  const double bscale = 1.0 + lp.b.cwiseAbs().maxCoeff();
  const double cscale = 1.0 + lp.c.cwiseAbs().maxCoeff();

  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd Hexact;
  auto factor = [&](const Eigen::VectorXd& d) -> bool {
    Hexact = lp.normal_matrix(d);
    const double hmax = std::max(Hexact.diagonal().maxCoeff(), 1.0);
    for (double ridge : {0.0, 1e-13, 1e-10, 1e-7, 1e-4}) {
      Eigen::MatrixXd Ht = Hexact;
      Ht.diagonal().array() += ridge * hmax;
      llt.compute(Ht);
      if (llt.info() == Eigen::Success) return true;
    }
    return false;
  };
  // Refine against the un-ridged matrix: the ridge is only a factorization
  // aid and would otherwise leave a primal-residual floor on degenerate LPs.
  // Refinement must be safeguarded: when Hexact is numerically singular the
  // correction can grow along null directions, so keep a pass only if it
  // shrinks the residual.
  auto normal_solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
    Eigen::VectorXd v = llt.solve(rhs);
    Eigen::VectorXd res = rhs - Hexact * v;
    double best = res.cwiseAbs().maxCoeff();
    for (int pass = 0; pass < 3; ++pass) {
      Eigen::VectorXd vt = v + llt.solve(res);
      Eigen::VectorXd rest = rhs - Hexact * vt;
      const double rn = rest.cwiseAbs().maxCoeff();
      if (!(rn < 0.5 * best)) break;
      v.swap(vt);
      res.swap(rest);
      best = rn;
    }
    return v;
  };

  // Mehrotra starting point from two least-squares solves.
  Eigen::VectorXd x, y, s;
  {
    if (!factor(Eigen::VectorXd::Ones(V))) {
      out.report.status = SolveStatus::numerical_failure;
      out.report.seconds = elapsed();
      return out;
    }
    Eigen::VectorXd xt = lp.apply_T(normal_solve(lp.b));
    y = normal_solve(lp.apply(lp.c));
    Eigen::VectorXd st = lp.c - lp.apply_T(y);
    const double dx = std::max(-1.5 * xt.minCoeff(), 0.0);
    const double ds = std::max(-1.5 * st.minCoeff(), 0.0);
    Eigen::VectorXd xh = xt.array() + dx;
    Eigen::VectorXd sh = st.array() + ds;
    const double dot = std::max(xh.dot(sh), 0.0);
    const double dx2 = dx + 0.5 * dot / std::max(sh.sum(), 1e-30);
    const double ds2 = ds + 0.5 * dot / std::max(xh.sum(), 1e-30);
    x = xt.array() + dx2;
    s = st.array() + ds2;
    const double xfloor = 1e-4 * std::max(1.0, x.cwiseAbs().maxCoeff());
    const double sfloor = 1e-4 * std::max(1.0, s.cwiseAbs().maxCoeff());
    x = x.cwiseMax(xfloor);
    s = s.cwiseMax(sfloor);
  }

  SolveReport rep;
  int iter = 0;
  double rp_mark = std::numeric_limits<double>::infinity();
  int rp_mark_iter = 0;
  bool stalled = false;
  // Best iterate by worst-case relative residual. Degenerate instances can
  // blow up after nearly converging (the limiting normal matrix is singular
  // and late Newton directions are garbage), leaving a useless final iterate
  // when an earlier one already met the relaxed tolerance.
  double best_merit = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  Eigen::VectorXd xb, yb, sb;
  double best_obj = 0.0, best_rp = 0.0, best_rd = 0.0, best_gap = 0.0;
  for (iter = 1; iter <= max_iter; ++iter) {
    const Eigen::VectorXd rp = lp.b - lp.apply(x);
    const Eigen::VectorXd rd = lp.c - lp.apply_T(y) - s;
    const double cx = lp.c.dot(x);
    const double by = lp.b.dot(y);
    const double comp = x.dot(s);
    rep.primal_residual = rp.cwiseAbs().maxCoeff() / bscale;
    rep.dual_residual = rd.cwiseAbs().maxCoeff() / cscale;
    rep.gap = comp / (1.0 + std::abs(cx));
    rep.objective = cx;
    rep.iterations = iter - 1;

    if (rep.primal_residual <= tol && rep.dual_residual <= tol &&
        rep.gap <= tol) {
      rep.status = SolveStatus::optimal;
      break;
    }
    const double merit =
        std::max({rep.primal_residual, rep.dual_residual, rep.gap});
    if (merit < best_merit) {
      best_merit = merit;
      best_iter = iter;
      xb = x;
      yb = y;
      sb = s;
      best_obj = rep.objective;
      best_rp = rep.primal_residual;
      best_rd = rep.dual_residual;
      best_gap = rep.gap;
    } else if (iter - best_iter >= 30 && merit > 1e6 * best_merit) {
      // diverged past recovery; stop burning iterations
      rep.status = SolveStatus::iteration_limit;
      break;
    }
    // Primal degeneracy can pin rp while the duals converge; once the gap is
    // crushed far below tolerance and rp has not halved for 20 iterations,
    // stop and hand the iterate to the feasibility restoration below. Runs
    // that are still converging keep their gap near tol, not orders below.
    if (rep.primal_residual < 0.5 * rp_mark) {
      rp_mark = rep.primal_residual;
      rp_mark_iter = iter;
    }
    if (iter - rp_mark_iter >= 20 && rep.dual_residual <= tol &&
        rep.gap <= 1e-12) {
      stalled = true;
      rep.status = SolveStatus::iteration_limit;
      break;
    }
    // Divergence heuristics: a dual ray with vanishing dual residual means
    // primal infeasibility; a primal ray with vanishing primal residual
    // means unboundedness.
    if (by > 1e11 * bscale * cscale && rep.dual_residual <= 1e-6) {
      rep.status = SolveStatus::infeasible;
      break;
    }
    if (cx < -1e11 * bscale * cscale && rep.primal_residual <= 1e-6) {
      rep.status = SolveStatus::unbounded;
      break;
    }
    if (!x.allFinite() || !y.allFinite() || !s.allFinite()) {
      rep.status = SolveStatus::numerical_failure;
      break;
    }

    const Eigen::VectorXd d = x.cwiseQuotient(s).cwiseMin(1e18);
    if (!factor(d)) {
      rep.status = SolveStatus::numerical_failure;
      break;
    }
    const double mu = comp / V;
    const Eigen::VectorXd drd = d.cwiseProduct(rd);

    // affine scaling step
    Eigen::VectorXd rxs = -x.cwiseProduct(s);
    Eigen::VectorXd dy =
        normal_solve(rp + lp.apply(drd - rxs.cwiseQuotient(s)));
    Eigen::VectorXd dsv = rd - lp.apply_T(dy);
    Eigen::VectorXd dxv = rxs.cwiseQuotient(s) - d.cwiseProduct(dsv);
    const double ap_aff = std::min(1.0, detail::max_step(x, dxv));
    const double ad_aff = std::min(1.0, detail::max_step(s, dsv));
    const double mu_aff =
        (x + ap_aff * dxv).dot(s + ad_aff * dsv) / V;
    double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // corrector step
    rxs.array() += sigma * mu;
    rxs -= dxv.cwiseProduct(dsv);
    dy = normal_solve(rp + lp.apply(drd - rxs.cwiseQuotient(s)));
    dsv = rd - lp.apply_T(dy);
    dxv = rxs.cwiseQuotient(s) - d.cwiseProduct(dsv);

    const double eta = rep.gap < 1e-3 ? 0.99995 : 0.9995;
    const double ap = std::min(1.0, eta * detail::max_step(x, dxv));
    const double ad = std::min(1.0, eta * detail::max_step(s, dsv));
    x += ap * dxv;
    y += ad * dy;
    s += ad * dsv;
  }
  if (iter > max_iter) rep.status = SolveStatus::iteration_limit;

  // A failed loop hands the best iterate, not the last one, to the recovery
  // logic below. Statuses with a certificate (infeasible, unbounded) keep
  // their ray.
  if (rep.status == SolveStatus::iteration_limit ||
      rep.status == SolveStatus::numerical_failure) {
    const double merit =
        std::max({rep.primal_residual, rep.dual_residual, rep.gap});
    if (xb.size() == V && !(merit <= best_merit)) {
      x = xb;
      y = yb;
      s = sb;
      rep.objective = best_obj;
      rep.primal_residual = best_rp;
      rep.dual_residual = best_rd;
      rep.gap = best_gap;
    }
  }

  // Feasibility restoration for stalled iterates: on degenerate relaxed
  // problems the limiting normal matrix loses rank and Newton steps stop
  // correcting Ax - b even as the gap converges. One weighted least-norm
  // projection dx = D A^T q with (A D A^T) q = b - Ax and D = x^2 + delta
  // concentrates the correction on the support and recovers feasibility.
  if ((stalled || rep.status == SolveStatus::iteration_limit ||
       rep.status == SolveStatus::numerical_failure) &&
      x.allFinite() && rep.dual_residual <= 100.0 * tol &&
      rep.gap <= 100.0 * tol) {
    const double xmax = std::max(x.maxCoeff(), 1e-30);
    const double gap0 = rep.gap;
    // Sweep the weight floor upward: with no floor the correction stays on
    // the support but may not span the residual; each larger floor widens
    // the reachable range at the price of perturbing near-zero variables.
    for (double floor : {0.0, 1e-12, 1e-9, 1e-6}) {
      Eigen::VectorXd xr = x;
      for (int round = 0; round < 2; ++round) {
        const Eigen::VectorXd d =
            (xr.array().square() + floor * xmax * xmax).matrix();
        if (!factor(d)) break;
        const Eigen::VectorXd q = normal_solve(lp.b - lp.apply(xr));
        xr = (xr + d.cwiseProduct(lp.apply_T(q))).cwiseMax(0.0);
      }
      const double rpr =
          (lp.b - lp.apply(xr)).cwiseAbs().maxCoeff() / bscale;
      const double cxr = lp.c.dot(xr);
      const double gapr = xr.dot(s) / (1.0 + std::abs(cxr));
      if (rpr < rep.primal_residual && gapr <= std::max(gap0, 10.0 * tol)) {
        x = xr;
        rep.primal_residual = rpr;
        rep.objective = cxr;
        rep.gap = gapr;
      }
      if (rep.primal_residual <= tol) break;
    }
    if (rep.primal_residual <= tol && rep.dual_residual <= tol &&
        rep.gap <= tol)
      rep.status = SolveStatus::optimal;
    else if (rep.primal_residual <= 100.0 * tol &&
             rep.dual_residual <= 100.0 * tol && rep.gap <= 100.0 * tol)
      rep.status = SolveStatus::near_optimal;
  }
  rep.seconds = elapsed();

  out.x = x;
  out.s = s;
  if (reduced) {
    out.y.setZero();
    for (int i = 0; i < lp.rows; ++i) out.y[pre.keep[i]] = y[i];
  } else {
    out.y = y;
  }
  out.report = rep;
  return out;
}

}  // namespace tomt

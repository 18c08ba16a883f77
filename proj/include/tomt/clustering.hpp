// Transport barycenters, nearest-barycenter classification, and K-means over
// covariance matrices, with Euclidean, log-Euclidean, KL, and ellipticity
// comparison clusterings.
#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tomt/distance.hpp"
#include "tomt/hermitian.hpp"
#include "tomt/spectral.hpp"

namespace tomt {

struct ClusterModel {
  int K = 0;
  std::vector<Eigen::MatrixXcd> barycenters;
  std::vector<int> assignments;
  double total_cost = 0.0;
  std::vector<double> history;  // total cost after each assignment pass
  Eigen::MatrixXd distances;    // final input-by-barycenter table
};

struct BarycenterResult {
  ToeplitzCov bary;
  double value = 0.0;  // sum of transport costs from each input at the optimum
  SolveReport report;
};

// Barycenter under T_kappa as one joint LP: per input l a plan M_l, a
// moment-matched spectrum psi_l (within feas_tol), and a barycenter-side
// spectrum phi_l whose moments are coupled across inputs; the marginal gaps
// are priced at kappa per unit, exactly as in compute_T_kappa. The barycenter
// is Gamma(phi_0), which is PSD Toeplitz by construction.
inline BarycenterResult barycenter_tk(const std::vector<ToeplitzCov>& Rs,
                                      const FrequencyGrid& grid,
                                      const CostSpec& cost, double kappa,
                                      double feas_tol = -1.0) {
  if (Rs.empty()) throw std::invalid_argument("barycenter_tk: empty input");
  if (!(kappa > 0.0))
    throw std::invalid_argument("barycenter_tk: kappa must be positive");
  const int L = static_cast<int>(Rs.size());
  const int n = Rs[0].n, N = grid.N, m = 2 * n - 1;
  for (const auto& R : Rs)
    if (R.n != n)
      throw std::invalid_argument("barycenter_tk: matrix orders differ");
  if (feas_tol < 0.0) {
    double frob = 0.0;
    for (const auto& R : Rs)
      frob = std::max(frob, detail::toeplitz_frob(R));
    feas_tol = 1e-7 * frob;
  }
  const bool relaxed = feas_tol > 0.0;
  const Eigen::MatrixXd G = moment_profile(grid, n);
  const Eigen::MatrixXd C = build_cost_matrix(grid, cost);

  // rows: per input the two marginal-link blocks, then the psi moment rows,
  // then the moment-coupling rows Gamma(phi_0) = Gamma(phi_l), then the
  // tolerance pair rows.
  const auto link0 = [&](int l) { return 2 * N * l; };
  const auto link1 = [&](int l) { return 2 * N * l + N; };
  const auto mom = [&](int l) { return 2 * N * L + m * l; };
  const auto coup = [&](int l) { return 2 * N * L + m * L + m * (l - 1); };
  const auto pair = [&](int l) {
    return 2 * N * L + m * L + m * (L - 1) + m * l;
  };

  LinearProgram lp;
  lp.rows = 2 * N * L + m * L + m * (L - 1) + (relaxed ? m * L : 0);
  lp.b = Eigen::VectorXd::Zero(lp.rows);
  for (int l = 0; l < L; ++l) {
    lp.b.segment(mom(l), m) =
        relaxed ? (realify_lags(Rs[l]).array() + feas_tol).matrix()
                : realify_lags(Rs[l]);
    if (relaxed) lp.b.segment(pair(l), m).setConstant(2.0 * feas_tol);
  }

  const Eigen::VectorXd ck = Eigen::VectorXd::Constant(N, kappa);
  for (int l = 0; l < L; ++l) {
    lp.add_block(PlanMarginalBlock{N, link0(l), link1(l), N},
                 detail::flatten_rowmajor(C));

    std::vector<std::tuple<int, int, double>> trips;
    trips.reserve(static_cast<size_t>(N) * (m + 1));
    for (int k = 0; k < N; ++k) {
      trips.emplace_back(link0(l) + k, k, -1.0);
      for (int p = 0; p < m; ++p) trips.emplace_back(mom(l) + p, k, G(p, k));
    }
    lp.add_block(CscBlock::from_triplets(lp.rows, N, trips),
                 Eigen::VectorXd::Zero(N));

    trips.clear();
    trips.reserve(static_cast<size_t>(N) * (1 + m * (L - 1)));
    for (int k = 0; k < N; ++k) {
      trips.emplace_back(link1(l) + k, k, -1.0);
      if (l == 0) {
        for (int j = 1; j < L; ++j)
          for (int p = 0; p < m; ++p)
            trips.emplace_back(coup(j) + p, k, G(p, k));
      } else {
        for (int p = 0; p < m; ++p)
          trips.emplace_back(coup(l) + p, k, -G(p, k));
      }
    }
    lp.add_block(CscBlock::from_triplets(lp.rows, N, trips),
                 Eigen::VectorXd::Zero(N));

    lp.add_block(detail::signed_identity(lp.rows, link0(l), N, 1.0), ck);
    lp.add_block(detail::signed_identity(lp.rows, link0(l), N, -1.0), ck);
    lp.add_block(detail::signed_identity(lp.rows, link1(l), N, 1.0), ck);
    lp.add_block(detail::signed_identity(lp.rows, link1(l), N, -1.0), ck);
  }
  if (relaxed)
    for (int l = 0; l < L; ++l)
      detail::add_tolerance_slacks(lp, mom(l), pair(l), m);

  const auto sol = solve_lp(lp);
  detail::require_solved(sol.report, "barycenter_tk");

  const Eigen::Index stride = static_cast<Eigen::Index>(N) * N + 6 * N;
  const Eigen::Index qn = static_cast<Eigen::Index>(N) * N;
  BarycenterResult out{
      gamma_apply(DiscreteSpectrum(grid, sol.x.segment(qn + N, N)), n), 0.0,
      sol.report};
  for (int l = 0; l < L; ++l) {
    const Eigen::MatrixXd M = detail::plan_from(
        sol.x.segment(static_cast<Eigen::Index>(l) * stride, qn), N);
    const Eigen::VectorXd psi =
        sol.x.segment(static_cast<Eigen::Index>(l) * stride + qn, N);
    const Eigen::VectorXd phi =
        sol.x.segment(static_cast<Eigen::Index>(l) * stride + qn + N, N);
    out.value += (M.array() * C.array()).sum() +
                 kappa * ((psi - M.rowwise().sum()).array().abs().sum() +
                          (phi - M.colwise().sum().transpose()).array().abs().sum());
  }
  return out;
}

namespace detail {

// Runs f(0..count-1) on a small worker pool; the first exception thrown by
// any task is rethrown after all workers finish.
template <class F>
inline void parallel_for_each(int count, F&& f) {
  const int hw = static_cast<int>(
      std::max(1u, std::thread::hardware_concurrency()));
  const int workers = std::min(count, hw);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < count;) {
        try {
          f(i);
        } catch (...) {
          const std::lock_guard<std::mutex> hold(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline Eigen::MatrixXd tk_table(const std::vector<ToeplitzCov>& Rs,
                                const std::vector<ToeplitzCov>& barys,
                                const FrequencyGrid& grid, const CostSpec& cost,
                                double kappa) {
  const int L = static_cast<int>(Rs.size());
  const int K = static_cast<int>(barys.size());
  Eigen::MatrixXd D(L, K);
  parallel_for_each(L * K, [&](int t) {
    D(t / K, t % K) =
        compute_T_kappa(Rs[t / K], barys[t % K], grid, cost, kappa).value;
  });
  return D;
}

// One K-means run from the given initial barycenters' RNG state. Records the
// total cost after every assignment pass; terminates when the assignment
// repeats or max_iter is reached. Empty clusters are reseeded from the
// farthest input whose departure leaves its cluster nonempty.
template <class Mat, class TableFn, class BaryFn, class ComboFn, class DenseFn>
ClusterModel kmeans_run(const std::vector<Mat>& Rs, int K, Rng& rng,
                        int max_iter, TableFn&& table_of, BaryFn&& bary_of,
                        ComboFn&& combo_of, DenseFn&& dense_of) {
  const int L = static_cast<int>(Rs.size());
  std::vector<Mat> barys;
  barys.reserve(K);
  for (int j = 0; j < K; ++j) {
    Eigen::VectorXd w(L);
    for (int i = 0; i < L; ++i) w[i] = rng.uniform();
    if (w.sum() <= 0.0) w.setConstant(1.0);
    w /= w.sum();
    barys.push_back(combo_of(Rs, w));
  }

  std::vector<int> a(L, -1), prev;
  Eigen::MatrixXd D;
  std::vector<double> history;
  for (int it = 0; it < max_iter; ++it) {
    D = table_of(Rs, barys);
    for (int i = 0; i < L; ++i) {
      int best = 0;
      for (int j = 1; j < K; ++j)
        if (D(i, j) < D(i, best)) best = j;  // ties keep the lowest index
      a[i] = best;
    }
    for (int guard = 0; guard < K; ++guard) {
      std::vector<int> count(K, 0);
      for (int i = 0; i < L; ++i) ++count[a[i]];
      int empty = -1;
      for (int j = 0; j < K; ++j)
        if (count[j] == 0) {
          empty = j;
          break;
        }
      if (empty < 0) break;
      int worst = -1;
      for (int i = 0; i < L; ++i)
        if (count[a[i]] >= 2 && (worst < 0 || D(i, a[i]) > D(worst, a[worst])))
          worst = i;
      if (worst < 0) break;  // unreachable while K <= L
      barys[empty] = Rs[worst];
      D.col(empty) = table_of(Rs, std::vector<Mat>{barys[empty]}).col(0);
      a[worst] = empty;
    }
    double cost = 0.0;
    for (int i = 0; i < L; ++i) cost += D(i, a[i]);
    history.push_back(cost);
    if (a == prev) break;
    prev = a;
    if (it + 1 == max_iter) break;

    std::vector<Mat> next_barys(barys);
    parallel_for_each(K, [&](int j) {
      std::vector<Mat> members;
      for (int i = 0; i < L; ++i)
        if (a[i] == j) members.push_back(Rs[i]);
      next_barys[j] = bary_of(members);
    });
    barys = std::move(next_barys);
  }

  ClusterModel out;
  out.K = K;
  out.assignments = a;
  out.total_cost = history.back();
  out.history = std::move(history);
  out.distances = std::move(D);
  out.barycenters.reserve(K);
  for (const auto& B : barys) out.barycenters.push_back(dense_of(B));
  return out;
}

template <class Mat, class TableFn, class BaryFn, class ComboFn, class DenseFn>
ClusterModel kmeans_multistart(const std::vector<Mat>& Rs, int K,
                               std::uint64_t init_seed, int max_iter,
                               int restarts, TableFn&& table_of,
                               BaryFn&& bary_of, ComboFn&& combo_of,
                               DenseFn&& dense_of) {
  const int L = static_cast<int>(Rs.size());
  if (L == 0) throw std::invalid_argument("kmeans: empty input");
  if (K < 1 || K > L)
    throw std::invalid_argument("kmeans: K must be in [1, #inputs]");
  if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  ClusterModel best;
  for (int r = 0; r < restarts; ++r) {
    // restart r reproduces as a standalone call with init_seed + r
    Rng rng(init_seed + static_cast<std::uint64_t>(r));
    ClusterModel model = kmeans_run(Rs, K, rng, max_iter, table_of, bary_of,
                                    combo_of, dense_of);
    if (r == 0 || model.total_cost < best.total_cost) best = std::move(model);
  }
  return best;
}

}  // namespace detail

// argmin_j T_kappa(R, barycenters[j]); ties break toward the lowest index.
inline int classify(const ToeplitzCov& R,
                    const std::vector<ToeplitzCov>& barycenters,
                    const FrequencyGrid& grid, const CostSpec& cost,
                    double kappa) {
  if (barycenters.empty())
    throw std::invalid_argument("classify: no barycenters");
  const Eigen::MatrixXd D =
      detail::tk_table({R}, barycenters, grid, cost, kappa);
  int best = 0;
  for (int j = 1; j < D.cols(); ++j)
    if (D(0, j) < D(0, best)) best = j;
  return best;
}

inline ClusterModel kmeans(const std::vector<ToeplitzCov>& Rs, int K,
                           const FrequencyGrid& grid, const CostSpec& cost,
                           double kappa, std::uint64_t init_seed = 0,
                           int max_iter = 50, int restarts = 5,
                           bool normalize = false) {
  if (!(kappa > 0.0))
    throw std::invalid_argument("kmeans: kappa must be positive");
  std::vector<ToeplitzCov> inputs = Rs;
  if (normalize)
    for (auto& R : inputs) {
      if (!(R.r0() > 0.0))
        throw std::invalid_argument("kmeans: cannot normalize zero diagonal");
      const double s = 1.0 / R.r0();
      for (auto& l : R.lags) l *= s;
      R.lags[0] = cplx(1.0, 0.0);
    }
  const int n = inputs.empty() ? 0 : inputs[0].n;
  return detail::kmeans_multistart(
      inputs, K, init_seed, max_iter, restarts,
      [&](const std::vector<ToeplitzCov>& ins,
          const std::vector<ToeplitzCov>& bs) {
        return detail::tk_table(ins, bs, grid, cost, kappa);
      },
      [&](const std::vector<ToeplitzCov>& members) {
        return barycenter_tk(members, grid, cost, kappa).bary;
      },
      [n](const std::vector<ToeplitzCov>& ins, const Eigen::VectorXd& w) {
        std::vector<cplx> lags(n, cplx(0.0, 0.0));
        for (int i = 0; i < static_cast<int>(ins.size()); ++i)
          for (int d = 0; d < n; ++d) lags[d] += w[i] * ins[i].lags[d];
        return ToeplitzCov(n, std::move(lags));
      },
      [](const ToeplitzCov& B) { return B.dense(); });
}

enum class CompareMetric { euclidean, log_euclidean, kl, ellipticity };

// K-means under the four baseline distances. The ellipticity loop iterates on
// the trace-normalized fixed point (the stationary point of the summed
// distance, so the cost descends); the stored barycenters carry the
// unit-diagonal congruence form.
inline ClusterModel kmeans_comparison(const std::vector<Eigen::MatrixXcd>& Rs,
                                      int K, CompareMetric metric,
                                      std::uint64_t init_seed = 0,
                                      int max_iter = 50, int restarts = 5) {
  const int L = static_cast<int>(Rs.size());
  if (L == 0) throw std::invalid_argument("kmeans_comparison: empty input");
  const int n = static_cast<int>(Rs[0].rows());
  for (const auto& R : Rs)
    if (R.rows() != n || R.cols() != n)
      throw std::invalid_argument("kmeans_comparison: dimension mismatch");

  const auto dist = [metric](const Eigen::MatrixXcd& A,
                             const Eigen::MatrixXcd& B) -> double {
    switch (metric) {
      case CompareMetric::euclidean:
        return (A - B).squaredNorm();
      case CompareMetric::log_euclidean:
        return (herm_log(A) - herm_log(B)).squaredNorm();
      case CompareMetric::kl:
        return kl_divergence(A, B);
      default:
        return ellipticity_distance(A, B);
    }
  };

  return detail::kmeans_multistart(
      Rs, K, init_seed, max_iter, restarts,
      [&](const std::vector<Eigen::MatrixXcd>& ins,
          const std::vector<Eigen::MatrixXcd>& bs) {
        const int l = static_cast<int>(ins.size());
        const int k = static_cast<int>(bs.size());
        Eigen::MatrixXd D(l, k);
        detail::parallel_for_each(l * k, [&](int t) {
          D(t / k, t % k) = dist(ins[t / k], bs[t % k]);
        });
        return D;
      },
      [&](const std::vector<Eigen::MatrixXcd>& members) -> Eigen::MatrixXcd {
        switch (metric) {
          case CompareMetric::euclidean: {
            Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
            for (const auto& R : members) acc += R;
            return acc / static_cast<double>(members.size());
          }
          case CompareMetric::log_euclidean: {
            Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
            for (const auto& R : members) acc += herm_log(R);
            return herm_exp((acc / static_cast<double>(members.size())).eval());
          }
          case CompareMetric::kl:
            return kl_barycenter(members);
          default:
            return ellipticity_barycenter(members).fixed_point;
        }
      },
      [n](const std::vector<Eigen::MatrixXcd>& ins, const Eigen::VectorXd& w) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < static_cast<int>(ins.size()); ++i)
          acc += w[i] * ins[i];
        return acc;
      },
      [metric, n](const Eigen::MatrixXcd& B) -> Eigen::MatrixXcd {
        if (metric != CompareMetric::ellipticity) return B;
        Eigen::VectorXd d(n);
        for (int i = 0; i < n; ++i) d[i] = 1.0 / std::sqrt(B(i, i).real());
        return d.asDiagonal() * B * d.asDiagonal();
      });
}

}  // namespace tomt

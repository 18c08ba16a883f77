#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <thread>

#include "test_util.hpp"
#include "tomt/distance.hpp"

using namespace tomt;
using Catch::Approx;

namespace {

DiscreteSpectrum atoms_on(const FrequencyGrid& grid,
                          const std::vector<std::pair<int, double>>& at) {
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(grid.N);
  for (const auto& [k, w] : at) mass[k] += w;
  return {grid, mass};
}

ToeplitzCov atom_cov(const FrequencyGrid& grid, int node, double mass, int n) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(grid.N);
  mu[node] = mass;
  return gamma_apply(DiscreteSpectrum(grid, mu), n);
}

ToeplitzCov schur_product(const ToeplitzCov& A, const ToeplitzCov& B) {
  std::vector<cplx> lags(A.n);
  for (int d = 0; d < A.n; ++d) lags[d] = A.lags[d] * B.lags[d];
  return {A.n, lags};
}

ToeplitzCov add_cov(const ToeplitzCov& A, const ToeplitzCov& B) {
  std::vector<cplx> lags(A.n);
  for (int d = 0; d < A.n; ++d) lags[d] = A.lags[d] + B.lags[d];
  return {A.n, lags};
}

double moment_defect(const DiscreteSpectrum& psi, const ToeplitzCov& R) {
  return (moment_profile(psi.grid, R.n) * psi.mass - realify_lags(R))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("cost matrix closed forms") {
  FrequencyGrid g(8);
  REQUIRE(g.node(3) == Approx(0.0).margin(1e-15));
  REQUIRE(g.node(7) == Approx(pi));
  const auto C2 = build_cost_matrix(g, CostSpec::chordal(2.0));
  REQUIRE(C2(3, 7) == Approx(4.0));

  const auto C1 = build_cost_matrix(g, CostSpec::abs_angle(1.0));
  REQUIRE(C1(3, 7) == Approx(pi));
  REQUIRE(C1(0, 1) == Approx(two_pi / 8));

  FrequencyGrid g360(360);
  const auto Cf = build_cost_matrix(g360, CostSpec::fixed_plus_chordal());
  const double s = std::sin(pi / 360);
  REQUIRE(Cf(0, 1) == Approx(1.0 + 4.0 * s * s).epsilon(1e-12));
  REQUIRE(Cf(0, 1) == Approx(1.000305).margin(1e-6));
}

TEST_CASE("cost matrix invariants: zero diagonal, symmetry, nonnegativity") {
  FrequencyGrid g(17);
  for (const auto& spec :
       {CostSpec::chordal(2.0), CostSpec::chordal(1.5), CostSpec::abs_angle(1.0),
        CostSpec::fixed_plus_chordal()}) {
    const auto C = build_cost_matrix(g, spec);
    REQUIRE(C.diagonal().cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((C - C.transpose()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(C.minCoeff() >= 0.0);
  }
}

TEST_CASE("cost matrix rejects bad input") {
  FrequencyGrid g(4);
  REQUIRE_THROWS_AS(build_cost_matrix(g, CostSpec::chordal(0.0)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(build_cost_matrix(g, CostSpec::chordal(-1.0)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(build_cost_matrix(g, CostSpec::custom(Eigen::MatrixXd::Zero(3, 4))),
                    std::invalid_argument);
  Eigen::MatrixXd neg = Eigen::MatrixXd::Zero(4, 4);
  neg(1, 2) = -0.5;
  REQUIRE_THROWS_AS(build_cost_matrix(g, CostSpec::custom(neg)),
                    std::invalid_argument);
  Eigen::MatrixXd ok = Eigen::MatrixXd::Constant(4, 4, 0.25);
  REQUIRE(build_cost_matrix(g, CostSpec::custom(ok)) == ok);
}

TEST_CASE("compute_S matches vertex enumeration on sparse spectra") {
  Rng rng(71);
  FrequencyGrid g(8);
  const auto C = build_cost_matrix(g, CostSpec::chordal(2.0));
  for (int trial = 0; trial < 5; ++trial) {
    // three atoms a side; zero-mass nodes force zero plan rows/columns, so
    // the support-restricted LP is equivalent and small enough to enumerate
    std::vector<int> k0 = {0, 2, 5}, k1 = {1, 3, 6};
    std::vector<double> w0(3), w1(3);
    double t0 = 0.0, t1 = 0.0;
    for (int i = 0; i < 3; ++i) {
      w0[i] = rng.uniform(0.2, 1.5);
      w1[i] = rng.uniform(0.2, 1.5);
      t0 += w0[i];
      t1 += w1[i];
    }
    for (auto& w : w1) w *= t0 / t1;

    const int a = 3, b = 3;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(a + b - 1, a * b);
    Eigen::VectorXd bb(a + b - 1), cc(a * b);
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < b; ++j) {
        const int q = i * b + j;
        A(i, q) = 1.0;
        if (j + 1 < b) A(a + j, q) = 1.0;
        cc[q] = C(k0[i], k1[j]);
      }
    for (int i = 0; i < a; ++i) bb[i] = w0[i];
    for (int j = 0; j + 1 < b; ++j) bb[a + j] = w1[j];
    const auto oracle = tomt_test::vertex_oracle(A, bb, cc);
    REQUIRE(oracle.feasible);

    auto phi0 = atoms_on(g, {{k0[0], w0[0]}, {k0[1], w0[1]}, {k0[2], w0[2]}});
    auto phi1 = atoms_on(g, {{k1[0], w1[0]}, {k1[1], w1[1]}, {k1[2], w1[2]}});
    const auto res = compute_S(phi0, phi1, CostSpec::chordal(2.0));
    REQUIRE(res.value ==
            Approx(oracle.value).margin(1e-7 * (1.0 + oracle.value)));
    REQUIRE((res.plan.row_marginal() - phi0.mass).cwiseAbs().maxCoeff() < 1e-7);
    REQUIRE((res.plan.col_marginal() - phi1.mass).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("compute_S trivial cases and preconditions") {
  Rng rng(72);
  FrequencyGrid g(16);
  const auto phi = tomt_test::random_spectrum(rng, g);
  const auto self = compute_S(phi, phi, CostSpec::chordal(2.0));
  REQUIRE(self.value >= 0.0);
  REQUIRE(self.value <= 1e-8 * (1.0 + phi.total()));

  // single atoms: only one feasible plan
  const double m = 1.37;
  const auto pa = atoms_on(g, {{2, m}});
  const auto pb = atoms_on(g, {{11, m}});
  const auto C = build_cost_matrix(g, CostSpec::chordal(2.0));
  const auto res = compute_S(pa, pb, CostSpec::chordal(2.0));
  REQUIRE(res.value == Approx(m * C(2, 11)).epsilon(1e-8));

  const auto heavier = atoms_on(g, {{2, 2 * m}});
  REQUIRE_THROWS_AS(compute_S(heavier, pb, CostSpec::chordal(2.0)),
                    std::invalid_argument);
  FrequencyGrid g2(24);
  REQUIRE_THROWS_AS(
      compute_S(pa, tomt_test::random_spectrum(rng, g2), CostSpec::chordal(2.0)),
      std::invalid_argument);
}

TEST_CASE("compute_S_kappa closed forms") {
  FrequencyGrid g(16);
  Rng rng(73);
  const auto phi = tomt_test::random_spectrum(rng, g);
  const auto self = compute_S_kappa(phi, phi, CostSpec::chordal(2.0), 1.0);
  REQUIRE(self.value <= 1e-8 * (1.0 + phi.total()));

  // empty target: removing everything is the only option
  const auto zero = atoms_on(g, {});
  const double kappa = 0.7;
  const auto rem = compute_S_kappa(phi, zero, CostSpec::chordal(2.0), kappa);
  REQUIRE(rem.value == Approx(kappa * phi.total()).epsilon(1e-7));

  // two far atoms: removal vs transport, both regimes of the closed form
  const double m0 = 1.3, m1 = 0.7;
  const auto pa = atoms_on(g, {{2, m0}});
  const auto pb = atoms_on(g, {{10, m1}});
  const auto C = build_cost_matrix(g, CostSpec::chordal(2.0));
  const double c = C(2, 10);
  for (const double k : {0.05, 3.0}) {
    const double expected =
        std::min(k * (m0 + m1), c * std::min(m0, m1) + k * std::abs(m0 - m1));
    const auto res = compute_S_kappa(pa, pb, CostSpec::chordal(2.0), k);
    REQUIRE(res.value == Approx(expected).epsilon(1e-7));
  }

  REQUIRE_THROWS_AS(compute_S_kappa(pa, pb, CostSpec::chordal(2.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("wasserstein_kappa is a metric on the grid") {
  Rng rng(74);
  FrequencyGrid g(12);
  REQUIRE_THROWS_AS(
      wasserstein_kappa(tomt_test::random_spectrum(rng, g),
                        tomt_test::random_spectrum(rng, g),
                        CostSpec::chordal(2.0), 1.0),
      std::invalid_argument);

  for (const double p : {1.0, 2.0}) {
    const CostSpec cost = CostSpec::abs_angle(p);
    const auto phi = tomt_test::random_spectrum(rng, g);
    REQUIRE(wasserstein_kappa(phi, phi, cost, 0.8) ==
            Approx(0.0).margin(1e-4));
    for (int trial = 0; trial < 25; ++trial) {
      const auto f0 = tomt_test::random_spectrum(rng, g);
      const auto f1 = tomt_test::random_spectrum(rng, g);
      const auto f2 = tomt_test::random_spectrum(rng, g);
      const double d01 = wasserstein_kappa(f0, f1, cost, 0.8);
      const double d12 = wasserstein_kappa(f1, f2, cost, 0.8);
      const double d02 = wasserstein_kappa(f0, f2, cost, 0.8);
      REQUIRE(d02 <= d01 + d12 + 1e-7);
    }
    // p = 1: the root is the identity
    if (p == 1.0) {
      const auto f0 = tomt_test::random_spectrum(rng, g);
      const auto f1 = tomt_test::random_spectrum(rng, g);
      REQUIRE(wasserstein_kappa(f0, f1, cost, 0.8) ==
              Approx(compute_S_kappa(f0, f1, cost, 0.8).value));
    }
  }
}

TEST_CASE("compute_T closed forms") {
  // identical matrices
  Rng rng(75);
  FrequencyGrid g64(64);
  const auto R = gamma_apply(tomt_test::random_spectrum(rng, g64), 4);
  const auto self = compute_T(R, R, g64, CostSpec::chordal(2.0));
  REQUIRE(self.value >= 0.0);
  REQUIRE(self.value <= 1e-6 * (1.0 + R.r0()));

  // on-grid rank-one pair: unique spectra force the plan
  FrequencyGrid g24(24);
  const auto C = build_cost_matrix(g24, CostSpec::chordal(2.0));
  const auto R0 = atom_cov(g24, 5, two_pi, 3);
  const auto R1 = atom_cov(g24, 17, two_pi, 3);
  const double closed = two_pi * C(5, 17);
  REQUIRE(compute_T(R0, R1, g24, CostSpec::chordal(2.0)).value ==
          Approx(closed).epsilon(1e-5));
  REQUIRE(compute_T(R0, R1, g24, CostSpec::chordal(2.0), 0.0).value ==
          Approx(closed).epsilon(1e-5));
}

TEST_CASE("compute_T on the two-dimensional trajectory endpoints") {
  // n = 2 pair: unit diagonal, lags placing the atoms at 0 and -5pi/6
  FrequencyGrid g(24);
  const ToeplitzCov R0{2, {cplx(1, 0), cplx(1, 0)}};
  const ToeplitzCov R1{2, {cplx(1, 0), std::polar(1.0, -5.0 * pi / 6.0)}};
  const auto res = compute_T(R0, R1, g, CostSpec::chordal(2.0));
  REQUIRE(res.value == Approx(two_pi * (2.0 + std::sqrt(3.0))).epsilon(1e-6));
}

TEST_CASE("compute_T preconditions and infeasibility reporting") {
  FrequencyGrid g(16);
  const auto R0 = atom_cov(g, 3, two_pi, 2);
  ToeplitzCov bigger{2, {cplx(2, 0), cplx(0.5, 0)}};
  REQUIRE_THROWS_AS(compute_T(R0, bigger, g, CostSpec::chordal(2.0)),
                    std::invalid_argument);
  ToeplitzCov other_n{3, {cplx(1, 0), cplx(0, 0), cplx(0, 0)}};
  REQUIRE_THROWS_AS(compute_T(R0, other_n, g, CostSpec::chordal(2.0)),
                    std::invalid_argument);

  // off-grid unit-modulus lag: not representable, must be reported
  ToeplitzCov off{2, {cplx(1, 0), std::polar(1.0, 0.5)}};
  REQUIRE_THROWS_AS(compute_T(R0, off, g, CostSpec::chordal(2.0), 0.0),
                    std::runtime_error);
}

TEST_CASE("compute_T plan feasibility and grid refinement") {
  Rng rng(76);
  const int n = 4;
  auto R0 = tomt_test::poisson_toeplitz(rng, n);
  auto R1 = tomt_test::poisson_toeplitz(rng, n);
  // match diagonals exactly
  const double scale = R0.r0() / R1.r0();
  for (auto& l : R1.lags) l *= scale;

  FrequencyGrid g(128);
  const double tol = 1e-7 * std::max(realify_lags(R0).norm(), 1.0) * 10;
  const auto res = compute_T(R0, R1, g, CostSpec::chordal(2.0));
  REQUIRE(moment_defect(res.psi0, R0) < 2e-7 * (1.0 + R0.r0()));
  REQUIRE(moment_defect(res.psi1, R1) < 2e-7 * (1.0 + R1.r0()));
  REQUIRE(res.value == Approx(res.report.objective).margin(1e-6 * (1 + res.value)));
  (void)tol;

  const double v256 = compute_T(R0, R1, FrequencyGrid(256), CostSpec::chordal(2.0)).value;
  const double v512 = compute_T(R0, R1, FrequencyGrid(512), CostSpec::chordal(2.0)).value;
  REQUIRE(v256 == Approx(v512).epsilon(1e-3));
}

TEST_CASE("compute_T_kappa closed form and symmetry") {
  FrequencyGrid g(32);
  const double mass = 1.7, kappa = 5.0;
  const auto R0 = atom_cov(g, 4, mass, 3);
  ToeplitzCov R1 = R0;
  for (auto& l : R1.lags) l *= 2.0;
  // same atom location: transport is free, the surplus is removed at kappa
  const auto res = compute_T_kappa(R0, R1, g, CostSpec::chordal(2.0), kappa);
  REQUIRE(res.value == Approx(kappa * mass).epsilon(1e-5));

  REQUIRE_THROWS_AS(compute_T_kappa(R0, R1, g, CostSpec::chordal(2.0), -1.0),
                    std::invalid_argument);

  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto A = gamma_apply(tomt_test::random_spectrum(rng, g), 3);
    const auto B = gamma_apply(tomt_test::random_spectrum(rng, g), 3);
    const double ab = compute_T_kappa(A, B, g, CostSpec::chordal(2.0), kappa).value;
    const double ba = compute_T_kappa(B, A, g, CostSpec::chordal(2.0), kappa).value;
    REQUIRE(ab >= 0.0);
    REQUIRE(ab == Approx(ba).margin(1e-7 * (1.0 + ab)));
  }
}

TEST_CASE("compute_T_kappa psi matches the moments") {
  Rng rng(78);
  FrequencyGrid g(48);
  const auto R0 = gamma_apply(tomt_test::random_spectrum(rng, g), 4);
  const auto R1 = gamma_apply(tomt_test::random_spectrum(rng, g), 4);
  const auto res = compute_T_kappa(R0, R1, g, CostSpec::chordal(2.0), 5.0);
  const double tol = 1e-7 * std::max(R0.r0(), R1.r0()) * 20 + 1e-8;
  REQUIRE(moment_defect(res.psi0, R0) < tol);
  REQUIRE(moment_defect(res.psi1, R1) < tol);
}

TEST_CASE("contractivity under additive and multiplicative noise") {
  Rng rng(79);
  FrequencyGrid g(48);
  const int n = 3;
  const double kappa = 5.0;
  const CostSpec cost = CostSpec::chordal(2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto R0 = gamma_apply(tomt_test::random_spectrum(rng, g), n);
    const auto R1 = gamma_apply(tomt_test::random_spectrum(rng, g), n);
    const double base = compute_T_kappa(R0, R1, g, cost, kappa).value;

    const auto Rw = gamma_apply(tomt_test::random_spectrum(rng, g), n);
    const double plus =
        compute_T_kappa(add_cov(R0, Rw), add_cov(R1, Rw), g, cost, kappa).value;
    REQUIRE(plus <= base + 1e-6);

    auto W = gamma_apply(tomt_test::random_spectrum(rng, g), n);
    const double s = 1.0 / (W.r0() * rng.uniform(1.0, 3.0));  // diag <= 1
    for (auto& l : W.lags) l *= s;
    const double had =
        compute_T_kappa(schur_product(R0, W), schur_product(R1, W), g, cost,
                        kappa)
            .value;
    REQUIRE(had <= base + 1e-6);
  }
}

TEST_CASE("dual certificate: kappa-free duality on matched diagonals") {
  Rng rng(80);
  FrequencyGrid g(64);
  const int n = 3;
  // grid-supported spectra with equal total mass: exact-moment primal exists
  auto mu0 = tomt_test::random_spectrum(rng, g);
  auto mu1 = tomt_test::random_spectrum(rng, g);
  mu1.mass *= mu0.total() / mu1.total();
  const auto R0 = gamma_apply(mu0, n);
  const auto R1 = gamma_apply(mu1, n);

  const double primal = compute_T(R0, R1, g, CostSpec::chordal(2.0), 0.0).value;
  const auto cert = dual_grid(R0, R1, g, CostSpec::chordal(2.0));
  REQUIRE(cert.value == Approx(primal).margin(1e-6 * (1.0 + primal)));

  // independent membership check through the adjoint
  const auto C = build_cost_matrix(g, CostSpec::chordal(2.0));
  Eigen::VectorXd g0(g.N), g1(g.N);
  for (int k = 0; k < g.N; ++k) {
    g0[k] = gamma_adjoint(cert.lambda0, g.node(k));
    g1[k] = gamma_adjoint(cert.lambda1, g.node(k));
  }
  for (int k = 0; k < g.N; ++k)
    for (int l = 0; l < g.N; ++l)
      REQUIRE(g0[k] + g1[l] <= C(k, l) + 1e-8);

  // value is the trace pairing of the certificate
  REQUIRE(cert.value ==
          Approx(trace_product(cert.lambda0, R0) +
                 trace_product(cert.lambda1, R1)));

  // identical inputs: optimal value 0
  const auto same = dual_grid(R0, R0, g, CostSpec::chordal(2.0));
  REQUIRE(std::abs(same.value) <= 1e-7 * (1.0 + R0.r0()));
}

TEST_CASE("dual certificate: kappa duality without matched diagonals") {
  Rng rng(81);
  FrequencyGrid g(64);
  const int n = 3;
  const double kappa = 5.0;
  const auto R0 = gamma_apply(tomt_test::random_spectrum(rng, g), n);
  const auto R1 = gamma_apply(tomt_test::random_spectrum(rng, g), n);

  const double primal =
      compute_T_kappa(R0, R1, g, CostSpec::chordal(2.0), kappa, 0.0).value;
  const auto cert = dual_grid(R0, R1, g, CostSpec::chordal(2.0), kappa);
  REQUIRE(cert.value == Approx(primal).margin(1e-6 * (1.0 + primal)));

  for (int k = 0; k < g.N; ++k) {
    REQUIRE(gamma_adjoint(cert.lambda0, g.node(k)) <= kappa + 1e-8);
    REQUIRE(gamma_adjoint(cert.lambda1, g.node(k)) <= kappa + 1e-8);
  }

  // kappa-free dual rejects mismatched diagonals
  REQUIRE_THROWS_AS(dual_grid(R0, R1, g, CostSpec::chordal(2.0)),
                    std::invalid_argument);
}

TEST_CASE("distance computations are pure and thread-safe") {
  Rng rng(82);
  FrequencyGrid g(16);
  const auto phi0 = tomt_test::random_spectrum(rng, g);
  auto phi1 = tomt_test::random_spectrum(rng, g);
  phi1.mass *= phi0.total() / phi1.total();

  const double ref = compute_S(phi0, phi1, CostSpec::chordal(2.0)).value;
  std::vector<double> vals(4, -1.0);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      vals[t] = compute_S(phi0, phi1, CostSpec::chordal(2.0)).value;
    });
  for (auto& th : pool) th.join();
  for (const double v : vals) REQUIRE(v == ref);
}

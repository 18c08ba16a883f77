#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "tomt/hermitian.hpp"

using namespace tomt;
using Catch::Approx;

namespace {
Eigen::MatrixXcd diag2(double a, double b) {
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(2, 2);
  D(0, 0) = a;
  D(1, 1) = b;
  return D;
}
}  // namespace

TEST_CASE("hermitian_eig reconstructs and orthonormalizes") {
  Rng rng(21);
  const auto H = tomt_test::random_hermitian(rng, 6);
  const auto e = hermitian_eig(H);
  const Eigen::MatrixXcd re =
      e.vectors * e.values.asDiagonal() * e.vectors.adjoint();
  REQUIRE((re - H).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXcd gram = e.vectors.adjoint() * e.vectors;
  REQUIRE((gram - Eigen::MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff() <
          1e-12);
  for (int i = 0; i + 1 < 6; ++i) REQUIRE(e.values[i] <= e.values[i + 1]);

  const auto ei = hermitian_eig(Eigen::MatrixXcd::Identity(3, 3));
  REQUIRE(ei.values.minCoeff() == Approx(1.0));
  REQUIRE(ei.values.maxCoeff() == Approx(1.0));

  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Zero(2, 2);
  bad(0, 1) = cplx(0, 1);
  bad(1, 0) = cplx(0, 1);  // not Hermitian: needs -i
  REQUIRE_THROWS_AS(hermitian_eig(bad), std::invalid_argument);
}

TEST_CASE("spectral functions: sqrt, log, exp, power") {
  REQUIRE((herm_sqrt(diag2(4, 9)) - diag2(2, 3)).cwiseAbs().maxCoeff() < 1e-12);

  Rng rng(3);
  const auto P = tomt_test::random_pd(rng, 5);
  const auto S = herm_sqrt(P);
  REQUIRE((S * S - P).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((herm_exp(herm_log(P)) - P).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((herm_power(P, -1.0) * P - Eigen::MatrixXcd::Identity(5, 5))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  REQUIRE((herm_power(P, 0.5) - S).cwiseAbs().maxCoeff() < 1e-10);

  // log of a singular matrix names the offending eigenvalue
  try {
    herm_log(diag2(1, 0));
    FAIL("expected herm_log to reject a singular matrix");
  } catch (const std::invalid_argument& err) {
    REQUIRE(std::string(err.what()).find("eigenvalue") != std::string::npos);
  }
  REQUIRE_THROWS_AS(herm_power(diag2(1, 0), -2.0), std::invalid_argument);
  REQUIRE_NOTHROW(herm_power(diag2(1, 0), 2.0));  // integer power of PSD is fine
}

TEST_CASE("lag-space line: endpoints and an indefinite extrapolation") {
  const ToeplitzCov R0(2, {cplx(1, 0), cplx(1, 0)});
  const ToeplitzCov R1(2, {cplx(1, 0), cplx(-1, 0)});
  const auto mid = geodesic_convex(R0, R1, 0.5);
  REQUIRE(std::abs(mid.lags[1]) < 1e-15);
  const auto at0 = geodesic_convex(R0, R1, 0.0);
  REQUIRE(at0.lags[1] == cplx(1, 0));
  const auto at2 = geodesic_convex(R0, R1, 2.0);
  REQUIRE(at2.lags[1].real() == Approx(-3.0));
  REQUIRE_FALSE(validate_psd(at2).is_psd);
}

TEST_CASE("affine-invariant geodesic") {
  const auto A = diag2(1, 4);
  const auto B = diag2(4, 1);
  const auto mid = geodesic_gconvex(A, B, 0.5);
  REQUIRE((mid - diag2(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

  Rng rng(8);
  const auto R0 = tomt_test::random_pd(rng, 4);
  const auto R1 = tomt_test::random_pd(rng, 4);
  REQUIRE((geodesic_gconvex(R0, R1, 0.0) - R0).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE((geodesic_gconvex(R0, R1, 1.0) - R1).cwiseAbs().maxCoeff() < 1e-8);

  // det along the geodesic is the geometric interpolation of the dets
  const double tau = 0.3;
  const auto G = geodesic_gconvex(R0, R1, tau);
  const double logdet = std::log(G.determinant().real());
  const double want = (1 - tau) * std::log(R0.determinant().real()) +
                      tau * std::log(R1.determinant().real());
  REQUIRE(logdet == Approx(want).epsilon(1e-8));
}

TEST_CASE("Gaussian transport geodesic") {
  // scalars: ((1-tau) sqrt(r0) + tau sqrt(r1))^2
  Eigen::MatrixXcd r0(1, 1), r1(1, 1);
  r0(0, 0) = 1.0;
  r1(0, 0) = 4.0;
  const auto m = geodesic_gaussian_omt(r0, r1, 0.5);
  REQUIRE(m(0, 0).real() == Approx(2.25));

  Rng rng(15);
  const auto A = tomt_test::random_pd(rng, 4);
  const auto B = tomt_test::random_pd(rng, 4);
  REQUIRE((geodesic_gaussian_omt(A, B, 0.0) - A).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE((geodesic_gaussian_omt(A, B, 1.0) - B).cwiseAbs().maxCoeff() < 1e-8);
  // PD along the way
  for (double tau : {0.25, 0.5, 0.75}) {
    const auto G = geodesic_gaussian_omt(A, B, tau);
    REQUIRE(hermitian_eig(G).values.minCoeff() > 0.0);
  }
}

TEST_CASE("log-Euclidean geodesic interpolates diagonals geometrically") {
  const auto A = diag2(1, 8);
  const auto B = diag2(4, 2);
  const auto mid = geodesic_log_euclidean(A, B, 0.5);
  REQUIRE(mid(0, 0).real() == Approx(2.0));
  REQUIRE(mid(1, 1).real() == Approx(4.0));

  Rng rng(16);
  const auto R0 = tomt_test::random_pd(rng, 3);
  const auto R1 = tomt_test::random_pd(rng, 3);
  REQUIRE((geodesic_log_euclidean(R0, R1, 0.0) - R0).cwiseAbs().maxCoeff() <
          1e-8);
  REQUIRE((geodesic_log_euclidean(R0, R1, 1.0) - R1).cwiseAbs().maxCoeff() <
          1e-8);
}

TEST_CASE("matrix geodesics leave the Toeplitz class") {
  Rng rng(99);
  int off_gconvex = 0, off_gauss = 0, off_logeuc = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXcd R0 =
        tomt_test::random_toeplitz(rng, 5, 64, 3).dense() +
        0.05 * Eigen::MatrixXcd::Identity(5, 5);
    const Eigen::MatrixXcd R1 =
        tomt_test::random_toeplitz(rng, 5, 64, 3).dense() +
        0.05 * Eigen::MatrixXcd::Identity(5, 5);
    if (tomt_test::max_toeplitz_defect(geodesic_gconvex(R0, R1, 0.5)) > 1e-6)
      ++off_gconvex;
    if (tomt_test::max_toeplitz_defect(geodesic_gaussian_omt(R0, R1, 0.5)) >
        1e-6)
      ++off_gauss;
    if (tomt_test::max_toeplitz_defect(geodesic_log_euclidean(R0, R1, 0.5)) >
        1e-6)
      ++off_logeuc;
  }
  REQUIRE(off_gconvex >= 95);
  REQUIRE(off_gauss >= 95);
  REQUIRE(off_logeuc >= 95);
}

TEST_CASE("KL divergence closed forms") {
  Rng rng(31);
  const auto R = tomt_test::random_pd(rng, 4);
  REQUIRE(kl_divergence(R, R) == Approx(0.0).margin(1e-9));

  const auto I = Eigen::MatrixXcd::Identity(2, 2);
  REQUIRE(kl_divergence(I, diag2(std::exp(1.0), 1.0)) ==
          Approx(std::exp(1.0) - 2.0).epsilon(1e-10));

  const auto A = diag2(1, 1);
  const auto B = diag2(4, 1);
  REQUIRE(kl_divergence(A, B) != Approx(kl_divergence(B, A)).epsilon(1e-6));
  REQUIRE(kl_divergence(A, B) >= 0.0);
}

TEST_CASE("ellipticity divergence is exactly scale invariant") {
  Rng rng(32);
  const auto R0 = tomt_test::random_pd(rng, 3);
  const auto R1 = tomt_test::random_pd(rng, 3);
  const double base = ellipticity_distance(R0, R1);
  REQUIRE(ellipticity_distance(R0, 7.3 * R1) == Approx(base).margin(1e-10));
  REQUIRE(ellipticity_distance(R0, 1e-3 * R1) == Approx(base).margin(1e-10));

  const auto I = Eigen::MatrixXcd::Identity(2, 2);
  REQUIRE(ellipticity_distance(I, diag2(1, 4)) ==
          Approx(2 * std::log(2.5) - std::log(4.0)).epsilon(1e-10));
  REQUIRE(ellipticity_distance(I, I) == Approx(0.0).margin(1e-12));
}

TEST_CASE("kl_barycenter is the harmonic mean") {
  Eigen::MatrixXcd a(1, 1), b(1, 1);
  a(0, 0) = 1.0;
  b(0, 0) = 3.0;
  const auto bc = kl_barycenter({a, b});
  REQUIRE(bc(0, 0).real() == Approx(1.5));

  // first-order optimality: barycenter beats nearby perturbations
  Rng rng(41);
  std::vector<Eigen::MatrixXcd> Rs;
  for (int j = 0; j < 3; ++j) Rs.push_back(tomt_test::random_pd(rng, 3));
  const auto C = kl_barycenter(Rs);
  auto total = [&](const Eigen::MatrixXcd& X) {
    double s = 0.0;
    for (const auto& R : Rs) s += kl_divergence(R, X);
    return s;
  };
  const double at_bc = total(C);
  for (int t = 0; t < 5; ++t) {
    const auto dH = 1e-3 * tomt_test::random_hermitian(rng, 3);
    REQUIRE(total(C + dH) >= at_bc - 1e-9);
  }
}

TEST_CASE("ellipticity_barycenter fixed point") {
  Rng rng(55);
  const auto R = tomt_test::random_pd(rng, 3);

  const auto single = ellipticity_barycenter({R});
  for (int i = 0; i < 3; ++i)
    REQUIRE(single.normalized(i, i).real() == Approx(1.0).margin(1e-12));
  // single input: fixed point is a positive multiple of the input
  const cplx ratio = single.fixed_point(0, 1) / R(0, 1);
  REQUIRE((single.fixed_point - ratio.real() * R).cwiseAbs().maxCoeff() <
          1e-8 * R.norm());

  std::vector<Eigen::MatrixXcd> Rs;
  for (int j = 0; j < 3; ++j) Rs.push_back(tomt_test::random_pd(rng, 4));
  const auto bc = ellipticity_barycenter(Rs);
  REQUIRE(bc.residual < 1e-8);
  for (int i = 0; i < 4; ++i)
    REQUIRE(bc.normalized(i, i).real() == Approx(1.0).margin(1e-12));
  REQUIRE(bc.fixed_point.trace().real() == Approx(4.0).epsilon(1e-8));

  // plug back: F(fixed_point) == fixed_point within the reported residual
  const int n = 4, J = 3;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& Rj : Rs) {
    const Eigen::MatrixXcd W = Rj.inverse();
    acc += W / (W * bc.fixed_point).trace().real();
  }
  acc *= double(n) / J;
  const Eigen::MatrixXcd F = acc.inverse();
  REQUIRE((F - bc.fixed_point).norm() / bc.fixed_point.norm() < 1e-7);
}

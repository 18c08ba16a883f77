#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "tomt/io.hpp"

using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / "tomt_io_tests";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string scratch(const std::string& name) {
  return (scratch_dir() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("toeplitz json round trip") {
  tomt::Rng rng(41);
  const auto R = tomt_test::poisson_toeplitz(rng, 5);
  const auto j = tomt::json::parse(tomt::to_json(R).dump());
  const auto back = tomt::toeplitz_from_json(j);
  REQUIRE(back.n == R.n);
  for (int d = 0; d < R.n; ++d) REQUIRE(back.lags[d] == R.lags[d]);
}

TEST_CASE("toeplitz json diagnostics") {
  REQUIRE_THROWS_WITH(tomt::toeplitz_from_json(tomt::json{{"n", 2}}),
                      Catch::Matchers::ContainsSubstring("lags"));
  REQUIRE_THROWS_WITH(
      tomt::toeplitz_from_json(
          tomt::json{{"n", 2}, {"lags", {{1.0, 0.0}}}}),
      Catch::Matchers::ContainsSubstring("exactly n"));
  REQUIRE_THROWS_WITH(
      tomt::toeplitz_from_json(
          tomt::json{{"n", 1}, {"lags", {{1.0, 0.0, 3.0}}}}),
      Catch::Matchers::ContainsSubstring("lags[0]"));
  // constructor rejection surfaces as a parse error with context
  REQUIRE_THROWS_AS(
      tomt::toeplitz_from_json(
          tomt::json{{"n", 1}, {"lags", {{-1.0, 0.0}}}}),
      tomt::ParseError);
}

TEST_CASE("dense matrix json round trip") {
  tomt::Rng rng(42);
  const Eigen::MatrixXcd M = tomt_test::random_hermitian(rng, 4);
  const auto back =
      tomt::dense_from_json(tomt::json::parse(tomt::to_json(M).dump()));
  REQUIRE((back - M).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE_THROWS_AS(tomt::to_json(Eigen::MatrixXcd::Zero(2, 3).eval()),
                    std::invalid_argument);
  REQUIRE_THROWS_WITH(
      tomt::dense_from_json(tomt::json{{"n", 2}, {"entries", {{1.0, 0.0}}}}),
      Catch::Matchers::ContainsSubstring("n*n"));
}

TEST_CASE("distance result json round trip") {
  const tomt::FrequencyGrid grid(16);
  const auto cost = tomt::CostSpec::chordal(2.0);
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(16), m1 = m0;
  m0[3] = tomt::two_pi;
  m1[11] = tomt::two_pi;
  const auto R0 = tomt::gamma_apply({grid, m0}, 3);
  const auto R1 = tomt::gamma_apply({grid, m1}, 3);
  const auto res = tomt::compute_T_kappa(R0, R1, grid, cost, 5.0);

  const auto j = tomt::json::parse(tomt::to_json(res).dump());
  const auto back = tomt::distance_from_json(j);
  REQUIRE(back.value == res.value);
  REQUIRE(back.plan.grid.N == 16);
  REQUIRE((back.plan.M - res.plan.M).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.psi0.mass - res.psi0.mass).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.psi1.mass - res.psi1.mass).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.report.status == res.report.status);

  auto bad = j;
  bad["plan"][0] = tomt::json::array({99, 0, 1.0});
  REQUIRE_THROWS_WITH(tomt::distance_from_json(bad),
                      Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("sos certificate json round trip") {
  tomt::Rng rng(43);
  tomt::SosCertificate cert;
  cert.m = 6;
  cert.value = 2.5;
  cert.lambda0 = tomt_test::random_hermitian(rng, 3);
  cert.lambda1 = tomt_test::random_hermitian(rng, 3);
  cert.Q = tomt_test::random_pd(rng, 4);
  const auto back =
      tomt::sos_from_json(tomt::json::parse(tomt::to_json(cert).dump()));
  REQUIRE(back.m == cert.m);
  REQUIRE(back.value == cert.value);
  REQUIRE((back.lambda0 - cert.lambda0).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.lambda1 - cert.lambda1).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.Q - cert.Q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cluster model json normalizes rows by their minimum") {
  tomt::ClusterModel model;
  model.K = 2;
  model.assignments = {0, 1, 0};
  model.total_cost = 3.5;
  model.distances.resize(3, 2);
  model.distances << 2.0, 6.0, 8.0, 4.0, 0.0, 5.0;

  const auto j = tomt::to_json(model);
  REQUIRE(j["normalized_distances"][0][0].get<double>() == 1.0);
  REQUIRE(j["normalized_distances"][0][1].get<double>() == 3.0);
  REQUIRE(j["normalized_distances"][1][1].get<double>() == 1.0);
  REQUIRE(j["normalized_distances"][1][0].get<double>() == 2.0);
  // nonpositive row minimum: row passes through unnormalized
  REQUIRE(j["normalized_distances"][2][1].get<double>() == 5.0);

  const auto back = tomt::cluster_model_from_json(j);
  REQUIRE(back.K == 2);
  REQUIRE(back.assignments == model.assignments);
  REQUIRE(back.total_cost == 3.5);
  REQUIRE(back.distances(0, 1) == 3.0);

  auto bad = j;
  bad["assignments"][0] = 7;
  REQUIRE_THROWS_WITH(tomt::cluster_model_from_json(bad),
                      Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("path json round trip") {
  const tomt::FrequencyGrid grid(16);
  const auto cost = tomt::CostSpec::chordal(2.0);
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(16), m1 = m0;
  m0[2] = tomt::two_pi;
  m1[9] = tomt::two_pi;
  const auto R0 = tomt::gamma_apply({grid, m0}, 3);
  const auto R1 = tomt::gamma_apply({grid, m1}, 3);
  const auto res = tomt::compute_T(R0, R1, grid, cost);
  const auto path =
      tomt::evaluate_path(res.plan, 3, std::vector<double>{0.0, 0.5, 1.0});

  const auto back =
      tomt::path_from_json(tomt::json::parse(tomt::to_json(path).dump()));
  REQUIRE(back.taus == path.tau_grid);
  REQUIRE(back.matrices.size() == 3);
  for (size_t t = 0; t < 3; ++t)
    for (int d = 0; d < 3; ++d)
      REQUIRE(back.matrices[t].lags[d] == path.matrices[t].lags[d]);
}

TEST_CASE("ar spec and ula scene json round trips") {
  tomt::ArSpec spec{0.9, 0.3 * tomt::pi, 0.6 * tomt::pi, 750, 123456789012345ULL};
  const auto spec_back =
      tomt::ar_spec_from_json(tomt::json::parse(tomt::to_json(spec).dump()));
  REQUIRE(spec_back.pole_radius == spec.pole_radius);
  REQUIRE(spec_back.freq_start == spec.freq_start);
  REQUIRE(spec_back.freq_end == spec.freq_end);
  REQUIRE(spec_back.total_samples == spec.total_samples);
  REQUIRE(spec_back.seed == spec.seed);

  tomt::UlaScene scene{15, {{-50.0, 0.5}, {30.0, 0.5}}, 0.05};
  const auto scene_back =
      tomt::ula_scene_from_json(tomt::json::parse(tomt::to_json(scene).dump()));
  REQUIRE(scene_back.n_sensors == 15);
  REQUIRE(scene_back.noise_power == 0.05);
  REQUIRE(scene_back.sources.size() == 2);
  REQUIRE(scene_back.sources[0].angle_deg == -50.0);
  REQUIRE(scene_back.sources[1].power == 0.5);

  REQUIRE_THROWS_WITH(
      tomt::ula_scene_from_json(tomt::json{{"n_sensors", 3}}),
      Catch::Matchers::ContainsSubstring("noise_power"));
}

TEST_CASE("json file errors carry path and line") {
  const auto good = scratch("good.json");
  tomt::write_json_file(good, tomt::json{{"n", 1}, {"lags", {{2.0, 0.0}}}});
  const auto R = tomt::toeplitz_from_json(tomt::read_json_file(good));
  REQUIRE(R.r0() == 2.0);

  const auto bad = scratch("bad.json");
  write_text(bad, "{\n  \"n\": 1,\n  \"lags\": [[1, 0],]\n}\n");
  REQUIRE_THROWS_WITH(tomt::read_json_file(bad),
                      Catch::Matchers::ContainsSubstring("bad.json:3"));
  REQUIRE_THROWS_WITH(tomt::read_json_file(scratch("missing.json")),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("spectrum csv round trip") {
  const tomt::FrequencyGrid grid(24);
  tomt::Rng rng(44);
  Eigen::VectorXd mass(24);
  for (int k = 0; k < 24; ++k) mass[k] = rng.uniform();
  const tomt::DiscreteSpectrum mu{grid, mass};

  const auto path = scratch("spectrum.csv");
  tomt::write_spectrum_csv(path, mu);
  const auto back = tomt::read_spectrum_csv(path);
  REQUIRE(back.grid.N == 24);
  REQUIRE((back.mass - mass).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spectrum csv diagnostics") {
  const auto path = scratch("spectrum_bad.csv");
  write_text(path, "theta,mass\n0.5,1.0\n0.7,2.0\n");
  REQUIRE_THROWS_WITH(tomt::read_spectrum_csv(path),
                      Catch::Matchers::ContainsSubstring("uniform"));

  write_text(path, "theta,mass\n0.5\n");
  REQUIRE_THROWS_WITH(
      tomt::read_spectrum_csv(path),
      Catch::Matchers::ContainsSubstring("expected 2 fields, got 1"));

  write_text(path, "theta,mass\n0.5,abc\n0.7,2.0\n");
  REQUIRE_THROWS_WITH(tomt::read_spectrum_csv(path),
                      Catch::Matchers::ContainsSubstring(":2: field 2"));

  write_text(path, "wrong,header\n");
  REQUIRE_THROWS_WITH(tomt::read_spectrum_csv(path),
                      Catch::Matchers::ContainsSubstring("header"));
}

TEST_CASE("signal csv round trip") {
  const tomt::ArSpec spec{0.8, 0.2 * tomt::pi, 0.5 * tomt::pi, 25, 7};
  const auto y = tomt::simulate_ar(spec);
  const auto path = scratch("signal.csv");
  tomt::write_signal_csv(path, y);
  const auto back = tomt::read_signal_csv(path);
  REQUIRE(back.size() == y.size());
  for (size_t t = 0; t < y.size(); ++t) REQUIRE(back[t] == y[t]);
}

TEST_CASE("signal csv diagnostics") {
  const auto path = scratch("signal_bad.csv");
  write_text(path, "t,re,im\n0,1.0,0.0\n2,0.5,0.5\n");
  REQUIRE_THROWS_WITH(tomt::read_signal_csv(path),
                      Catch::Matchers::ContainsSubstring("expected t = 1"));
}

TEST_CASE("path csv is a plot-ready long table") {
  const tomt::FrequencyGrid grid(12);
  const auto cost = tomt::CostSpec::chordal(2.0);
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(12), m1 = m0;
  m0[1] = tomt::two_pi;
  m1[7] = tomt::two_pi;
  const auto R0 = tomt::gamma_apply({grid, m0}, 3);
  const auto R1 = tomt::gamma_apply({grid, m1}, 3);
  const auto res = tomt::compute_T(R0, R1, grid, cost);
  const auto path =
      tomt::evaluate_path(res.plan, 3, std::vector<double>{0.0, 1.0});

  const auto file = scratch("path.csv");
  tomt::write_path_csv(file, path, grid);

  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "tau,theta,value");
  int rows = 0;
  std::string line;
  double first_value = 0.0;
  while (std::getline(in, line)) {
    if (rows == 0) {
      const auto fields = line.substr(line.rfind(',') + 1);
      first_value = std::stod(fields);
    }
    ++rows;
  }
  REQUIRE(rows == 2 * 12);
  // row one is tau=0 at the first grid node; pin it to the direct correlogram
  REQUIRE(first_value ==
          Approx(tomt::correlogram(path.matrices[0].dense(), grid.node(0)))
              .margin(1e-12));
}

// File formats: JSON schemas for covariances, transport results, certificates,
// and cluster models; CSV for spectra, signals, and plot-ready path exports.
// Complex numbers are [re, im] pairs in JSON and re,im column pairs in CSV.
#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomt/clustering.hpp"
#include "tomt/distance.hpp"
#include "tomt/paths.hpp"
#include "tomt/signals.hpp"
#include "tomt/sos.hpp"

namespace tomt {

using json = nlohmann::json;

// Schema or syntax problem in an input file; the message carries the path and
// the line or field where parsing stopped.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline json cplx_to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }

inline cplx cplx_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(where + ": expected a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline const json& field(const json& j, const char* name,
                         const std::string& where) {
  if (!j.is_object() || !j.contains(name))
    throw ParseError(where + ": missing field '" + name + "'");
  return j[name];
}

inline int int_field(const json& j, const char* name,
                     const std::string& where) {
  const json& f = field(j, name, where);
  if (!f.is_number_integer())
    throw ParseError(where + ": field '" + name + "' must be an integer");
  return f.get<int>();
}

inline double num_field(const json& j, const char* name,
                        const std::string& where) {
  const json& f = field(j, name, where);
  if (!f.is_number())
    throw ParseError(where + ": field '" + name + "' must be a number");
  return f.get<double>();
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---- JSON schemas ----------------------------------------------------------

inline json to_json(const ToeplitzCov& R) {
  json lags = json::array();
  for (const auto& l : R.lags) lags.push_back(detail::cplx_to_json(l));
  return {{"n", R.n}, {"lags", std::move(lags)}};
}

inline ToeplitzCov toeplitz_from_json(const json& j,
                                      const std::string& where = "ToeplitzCov") {
  const int n = detail::int_field(j, "n", where);
  const json& lags = detail::field(j, "lags", where);
  if (!lags.is_array() || static_cast<int>(lags.size()) != n)
    throw ParseError(where + ": 'lags' must hold exactly n entries");
  std::vector<cplx> v(n);
  for (int d = 0; d < n; ++d)
    v[d] = detail::cplx_from_json(lags[d],
                                  where + ": lags[" + std::to_string(d) + "]");
  try {
    return {n, std::move(v)};
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline json to_json(const Eigen::MatrixXcd& M) {
  if (M.rows() != M.cols())
    throw std::invalid_argument("to_json: dense matrix must be square");
  json entries = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      entries.push_back(detail::cplx_to_json(M(r, c)));
  return {{"n", static_cast<int>(M.rows())}, {"entries", std::move(entries)}};
}

inline Eigen::MatrixXcd dense_from_json(const json& j,
                                        const std::string& where = "matrix") {
  const int n = detail::int_field(j, "n", where);
  if (n < 1) throw ParseError(where + ": n must be positive");
  const json& entries = detail::field(j, "entries", where);
  if (!entries.is_array() ||
      static_cast<int>(entries.size()) != n * n)
    throw ParseError(where + ": 'entries' must hold n*n row-major values");
  Eigen::MatrixXcd M(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      M(r, c) = detail::cplx_from_json(
          entries[r * n + c],
          where + ": entries[" + std::to_string(r * n + c) + "]");
  return M;
}

// Plan cells are dumped as (k, l, mass) triplets, zeros omitted.
inline json to_json(const DistanceResult& res) {
  json plan = json::array();
  const int N = res.plan.grid.N;
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < N; ++l)
      if (res.plan.M(k, l) != 0.0)
        plan.push_back(json::array({k, l, res.plan.M(k, l)}));
  return {{"value", res.value},
          {"grid_N", N},
          {"plan", std::move(plan)},
          {"psi0", std::vector<double>(res.psi0.mass.begin(), res.psi0.mass.end())},
          {"psi1", std::vector<double>(res.psi1.mass.begin(), res.psi1.mass.end())},
          {"status", to_string(res.report.status)}};
}

// Rebuilds value, plan, and mass vectors; solver diagnostics other than the
// status string are not serialized and come back defaulted.
inline DistanceResult distance_from_json(const json& j,
                                         const std::string& where = "DistanceResult") {
  const int N = detail::int_field(j, "grid_N", where);
  if (N < 2) throw ParseError(where + ": grid_N must be at least 2");
  FrequencyGrid grid(N);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  const json& plan = detail::field(j, "plan", where);
  if (!plan.is_array()) throw ParseError(where + ": 'plan' must be an array");
  for (size_t t = 0; t < plan.size(); ++t) {
    const json& trip = plan[t];
    const std::string wt = where + ": plan[" + std::to_string(t) + "]";
    if (!trip.is_array() || trip.size() != 3)
      throw ParseError(wt + ": expected [k, l, mass]");
    const int k = trip[0].get<int>(), l = trip[1].get<int>();
    if (k < 0 || k >= N || l < 0 || l >= N)
      throw ParseError(wt + ": node index out of range");
    M(k, l) = trip[2].get<double>();
  }
  auto mass_of = [&](const char* name) {
    const json& arr = detail::field(j, name, where);
    if (!arr.is_array() || static_cast<int>(arr.size()) != N)
      throw ParseError(where + ": '" + name + "' must hold N masses");
    Eigen::VectorXd m(N);
    for (int k = 0; k < N; ++k) m[k] = arr[k].get<double>();
    return m;
  };
  DistanceResult res{detail::num_field(j, "value", where),
                     TransportPlan{grid, std::move(M)},
                     DiscreteSpectrum(grid, mass_of("psi0")),
                     DiscreteSpectrum(grid, mass_of("psi1")),
                     SolveReport{}};
  const json& st = detail::field(j, "status", where);
  for (int s = 0; s <= static_cast<int>(SolveStatus::numerical_failure); ++s)
    if (st.is_string() &&
        st.get<std::string>() == to_string(static_cast<SolveStatus>(s)))
      res.report.status = static_cast<SolveStatus>(s);
  return res;
}

inline json to_json(const SosCertificate& cert) {
  return {{"m", cert.m},
          {"value", cert.value},
          {"lambda0", to_json(cert.lambda0)},
          {"lambda1", to_json(cert.lambda1)},
          {"Q", to_json(cert.Q)}};
}

inline SosCertificate sos_from_json(const json& j,
                                    const std::string& where = "SosCertificate") {
  SosCertificate cert;
  cert.m = detail::int_field(j, "m", where);
  cert.value = detail::num_field(j, "value", where);
  cert.lambda0 = dense_from_json(detail::field(j, "lambda0", where), where + ".lambda0");
  cert.lambda1 = dense_from_json(detail::field(j, "lambda1", where), where + ".lambda1");
  cert.Q = dense_from_json(detail::field(j, "Q", where), where + ".Q");
  return cert;
}

// The distance table is normalized per input row by its row minimum (the
// nearest barycenter reads 1.0); degenerate rows with a nonpositive minimum
// are written as-is. Barycenters are not part of this schema; export them
// separately as covariances.
inline json to_json(const ClusterModel& model) {
  json table = json::array();
  for (Eigen::Index i = 0; i < model.distances.rows(); ++i) {
    const double lo = model.distances.row(i).minCoeff();
    json row = json::array();
    for (Eigen::Index k = 0; k < model.distances.cols(); ++k)
      row.push_back(lo > 0.0 ? model.distances(i, k) / lo
                             : model.distances(i, k));
    table.push_back(std::move(row));
  }
  return {{"K", model.K},
          {"assignments", model.assignments},
          {"normalized_distances", std::move(table)},
          {"total_cost", model.total_cost}};
}

inline ClusterModel cluster_model_from_json(const json& j,
                                            const std::string& where = "ClusterModel") {
  ClusterModel model;
  model.K = detail::int_field(j, "K", where);
  model.total_cost = detail::num_field(j, "total_cost", where);
  const json& a = detail::field(j, "assignments", where);
  if (!a.is_array()) throw ParseError(where + ": 'assignments' must be an array");
  for (const auto& v : a) {
    if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() >= model.K)
      throw ParseError(where + ": assignment out of range 0..K-1");
    model.assignments.push_back(v.get<int>());
  }
  const json& table = detail::field(j, "normalized_distances", where);
  if (!table.is_array() || table.size() != model.assignments.size())
    throw ParseError(where + ": one distance row per assignment required");
  model.distances.resize(static_cast<Eigen::Index>(table.size()), model.K);
  for (size_t i = 0; i < table.size(); ++i) {
    if (!table[i].is_array() || static_cast<int>(table[i].size()) != model.K)
      throw ParseError(where + ": distance row " + std::to_string(i) +
                       " must hold K values");
    for (int k = 0; k < model.K; ++k)
      model.distances(static_cast<Eigen::Index>(i), k) =
          table[i][k].get<double>();
  }
  return model;
}

// Matrix-per-tau export; full fidelity through the Toeplitz lag schema.
inline json to_json(const CovariancePath& path) {
  json mats = json::array();
  for (const auto& R : path.matrices) mats.push_back(to_json(R));
  return {{"taus", path.tau_grid}, {"matrices", std::move(mats)}};
}

struct PathSamples {
  std::vector<double> taus;
  std::vector<ToeplitzCov> matrices;
};

inline PathSamples path_from_json(const json& j,
                                  const std::string& where = "path") {
  const json& taus = detail::field(j, "taus", where);
  const json& mats = detail::field(j, "matrices", where);
  if (!taus.is_array() || !mats.is_array() || taus.size() != mats.size())
    throw ParseError(where + ": 'taus' and 'matrices' must be equal-length arrays");
  PathSamples out;
  for (size_t t = 0; t < taus.size(); ++t) {
    out.taus.push_back(taus[t].get<double>());
    out.matrices.push_back(toeplitz_from_json(
        mats[t], where + ": matrices[" + std::to_string(t) + "]"));
  }
  return out;
}

inline json to_json(const ArSpec& spec) {
  return {{"pole_radius", spec.pole_radius},
          {"freq_start", spec.freq_start},
          {"freq_end", spec.freq_end},
          {"total_samples", spec.total_samples},
          {"seed", spec.seed}};
}

inline ArSpec ar_spec_from_json(const json& j,
                                const std::string& where = "ArSpec") {
  ArSpec spec;
  spec.pole_radius = detail::num_field(j, "pole_radius", where);
  spec.freq_start = detail::num_field(j, "freq_start", where);
  spec.freq_end = detail::num_field(j, "freq_end", where);
  spec.total_samples = detail::int_field(j, "total_samples", where);
  const json& seed = detail::field(j, "seed", where);
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    throw ParseError(where + ": field 'seed' must be an integer");
  spec.seed = seed.get<std::uint64_t>();
  return spec;
}

inline json to_json(const UlaScene& scene) {
  json sources = json::array();
  for (const auto& s : scene.sources)
    sources.push_back({{"angle_deg", s.angle_deg}, {"power", s.power}});
  return {{"n_sensors", scene.n_sensors},
          {"noise_power", scene.noise_power},
          {"sources", std::move(sources)}};
}

inline UlaScene ula_scene_from_json(const json& j,
                                    const std::string& where = "UlaScene") {
  UlaScene scene;
  scene.n_sensors = detail::int_field(j, "n_sensors", where);
  scene.noise_power = detail::num_field(j, "noise_power", where);
  const json& sources = detail::field(j, "sources", where);
  if (!sources.is_array())
    throw ParseError(where + ": 'sources' must be an array");
  for (size_t s = 0; s < sources.size(); ++s) {
    const std::string ws = where + ": sources[" + std::to_string(s) + "]";
    scene.sources.push_back({detail::num_field(sources[s], "angle_deg", ws),
                             detail::num_field(sources[s], "power", ws)});
  }
  return scene;
}

// ---- JSON files -------------------------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // recover the line from the byte offset for a usable diagnostic
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)),
                     std::istreambuf_iterator<char>());
    const size_t upto = std::min(text.size(), static_cast<size_t>(e.byte));
    const long line =
        1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ParseError(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

// ---- CSV --------------------------------------------------------------------

namespace detail {

// Splits one CSV line; no quoting, the formats here never need it.
inline std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double csv_number(const std::string& s, const std::string& path,
                         long line, int fieldno) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size())
    throw ParseError(path + ":" + std::to_string(line) + ": field " +
                     std::to_string(fieldno) + " is not a number: '" + s + "'");
  return v;
}

struct CsvReader {
  std::ifstream in;
  std::string path;
  long line = 0;

  CsvReader(const std::string& p) : in(p), path(p) {
    if (!in) throw ParseError(p + ": cannot open for reading");
  }

  // Reads the next data row, enforcing the field count; empty lines skipped.
  bool next(int nfields, std::vector<std::string>& out) {
    std::string raw;
    while (std::getline(in, raw)) {
      ++line;
      if (raw.empty() || raw == "\r") continue;
      out = csv_fields(raw);
      if (static_cast<int>(out.size()) != nfields)
        throw ParseError(path + ":" + std::to_string(line) + ": expected " +
                         std::to_string(nfields) + " fields, got " +
                         std::to_string(out.size()));
      return true;
    }
    return false;
  }

  void expect_header(const std::string& header) {
    std::vector<std::string> f;
    if (!next(static_cast<int>(csv_fields(header).size()), f) ||
        csv_fields(header) != f)
      throw ParseError(path + ":" + std::to_string(std::max(line, 1L)) +
                       ": expected header '" + header + "'");
  }
};

}  // namespace detail

inline void write_spectrum_csv(const std::string& path,
                               const DiscreteSpectrum& mu) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "theta,mass\n";
  for (int k = 0; k < mu.grid.N; ++k)
    out << detail::fmt_double(mu.grid.node(k)) << ','
        << detail::fmt_double(mu.mass[k]) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

// Row count fixes N; the theta column must reproduce that uniform grid.
inline DiscreteSpectrum read_spectrum_csv(const std::string& path) {
  detail::CsvReader r(path);
  r.expect_header("theta,mass");
  std::vector<double> thetas, masses;
  std::vector<std::string> f;
  while (r.next(2, f)) {
    thetas.push_back(detail::csv_number(f[0], path, r.line, 1));
    masses.push_back(detail::csv_number(f[1], path, r.line, 2));
  }
  const int N = static_cast<int>(thetas.size());
  if (N < 2) throw ParseError(path + ": a spectrum needs at least 2 rows");
  FrequencyGrid grid(N);
  for (int k = 0; k < N; ++k)
    if (std::abs(thetas[k] - grid.node(k)) > 1e-9)
      throw ParseError(path + ": theta in row " + std::to_string(k + 1) +
                       " does not lie on the uniform " + std::to_string(N) +
                       "-point grid");
  return {grid, Eigen::Map<const Eigen::VectorXd>(masses.data(), N)};
}

inline void write_signal_csv(const std::string& path,
                             const std::vector<cplx>& y) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "t,re,im\n";
  for (size_t t = 0; t < y.size(); ++t)
    out << t << ',' << detail::fmt_double(y[t].real()) << ','
        << detail::fmt_double(y[t].imag()) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline std::vector<cplx> read_signal_csv(const std::string& path) {
  detail::CsvReader r(path);
  r.expect_header("t,re,im");
  std::vector<cplx> y;
  std::vector<std::string> f;
  while (r.next(3, f)) {
    const double t = detail::csv_number(f[0], path, r.line, 1);
    if (t != static_cast<double>(y.size()))
      throw ParseError(path + ":" + std::to_string(r.line) +
                       ": field 1: expected t = " + std::to_string(y.size()));
    y.emplace_back(detail::csv_number(f[1], path, r.line, 2),
                   detail::csv_number(f[2], path, r.line, 3));
  }
  return y;
}

// Plot-ready long format: one row per (tau, grid node) with the correlogram
// value of that path matrix. A view for plotting, not a round-trip format;
// use the path JSON schema to reload a path.
inline void write_path_csv(const std::string& path, const CovariancePath& cp,
                           const FrequencyGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "tau,theta,value\n";
  for (size_t t = 0; t < cp.matrices.size(); ++t) {
    const Eigen::MatrixXcd dense = cp.matrices[t].dense();
    for (int k = 0; k < grid.N; ++k)
      out << detail::fmt_double(cp.tau_grid[t]) << ','
          << detail::fmt_double(grid.node(k)) << ','
          << detail::fmt_double(correlogram(dense, grid.node(k))) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace tomt

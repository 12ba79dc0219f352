#pragma once

// Configuration ingestion and report emission behind the `hyperlq` tool.
//
// A configuration is either a boundary system
//
//   {"n": 1, "inputs": 1, "outputs": 1,
//    "K": [-1], "L": [-0.5], "K_y": [-1], "L_y": [0],
//    "lambda0": {"type": "constant", "value": 1},
//    "M": [...], "z0": {"type": "constant", "value": [1]},
//    "grid_points": 2001}
//
// or a reduced quadruple as printed by `hyperlq reduce`
//
//   {"A_d": [[-0.5]], "B_d": [[1.0]], "C_d": [[-0.5]], "D_d": [[1.0]], "p1": 1.0}
//
// in which case lambda0 is taken constant, 1/p1. Matrices are row-major,
// either flat or nested; complex entries are {"re": x, "im": y}.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyperlq/error.hpp"
#include "hyperlq/frequency.hpp"
#include "hyperlq/model.hpp"
#include "hyperlq/numerics.hpp"
#include "hyperlq/pde.hpp"
#include "hyperlq/riccati.hpp"
#include "hyperlq/verify.hpp"

namespace hyperlq::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kValidation = 1, kConvergence = 2, kStability = 3 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence: return kConvergence;
    case ErrorCode::UnstableMatrix: return kStability;
    default: return kValidation;
  }
}

/// Everything the commands need, after validation, M elimination and
/// reduction. z0 lives in the coordinates of the reduced system.
struct Pipeline {
  std::optional<BoundarySystem> system;  // absent for pre-reduced input
  SpatialProfile profile = SpatialProfile::constant(1.0, 2);
  DiscreteQuadruple quad;
  double p1 = 0.0;
  std::optional<Matrix> Q1;
  StateFunction z0;
};

namespace detail {

[[noreturn]] inline void bad(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

inline cplx parse_scalar(const json& v, const std::string& name) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_object() && v.contains("re")) {
    return {v.at("re").get<double>(), v.contains("im") ? v.at("im").get<double>() : 0.0};
  }
  bad(name + ": expected a number or {\"re\", \"im\"}");
}

inline bool is_scalar(const json& v) { return v.is_number() || v.is_object(); }

inline Matrix parse_matrix(const json& v, std::size_t rows, std::size_t cols,
                           const std::string& name) {
  if (!v.is_array()) bad(name + ": expected an array");
  std::vector<cplx> entries;
  entries.reserve(rows * cols);
  if (!v.empty() && v.front().is_array()) {
    if (v.size() != rows) bad(name + ": expected " + std::to_string(rows) + " rows");
    for (const auto& row : v) {
      if (!row.is_array() || row.size() != cols)
        bad(name + ": expected rows of length " + std::to_string(cols));
      for (const auto& e : row) entries.push_back(parse_scalar(e, name));
    }
  } else {
    if (v.size() != rows * cols)
      bad(name + ": expected " + std::to_string(rows * cols) + " entries, got " +
          std::to_string(v.size()));
    for (const auto& e : v) entries.push_back(parse_scalar(e, name));
  }
  return Matrix(rows, cols, std::move(entries));
}

/// Shape taken from a nested array.
inline Matrix parse_nested(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty() || !v.front().is_array()) bad(name + ": expected nested rows");
  return parse_matrix(v, v.size(), v.front().size(), name);
}

inline std::vector<double> parse_reals(const json& v, const std::string& name) {
  if (!v.is_array()) bad(name + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) bad(name + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::size_t parse_count(const json& cfg, const char* key, std::optional<std::size_t> fallback = {}) {
  if (!cfg.contains(key)) {
    if (fallback) return *fallback;
    bad(std::string("missing \"") + key + "\"");
  }
  const auto& v = cfg.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) bad(std::string(key) + ": expected a count");
  return v.get<std::size_t>();
}

inline SpatialProfile parse_profile(const json& spec, std::size_t points) {
  if (!spec.is_object() || !spec.contains("type")) bad("lambda0: expected an object with \"type\"");
  const std::string type = spec.at("type").get<std::string>();
  if (type == "constant") return SpatialProfile::constant(spec.at("value").get<double>(), points);
  if (type == "affine") {
    return SpatialProfile::affine(spec.at("a").get<double>(), spec.at("b").get<double>(), points);
  }
  if (type == "samples") {
    return SpatialProfile(parse_reals(spec.at("grid"), "lambda0.grid"),
                          parse_reals(spec.at("values"), "lambda0.values"));
  }
  bad("lambda0: unknown type \"" + type + "\"");
}

inline Matrix parse_vector(const json& v, std::size_t n, const std::string& name) {
  if (is_scalar(v) && n == 1) return Matrix(1, 1, {parse_scalar(v, name)});
  return parse_matrix(v, n, 1, name);
}

inline StateFunction parse_z0(const json& cfg, const SpatialProfile& profile, std::size_t n) {
  const auto& grid = profile.grid();
  if (!cfg.contains("z0")) {
    Matrix ones(n, 1);
    for (auto& v : ones.entries()) v = 1.0;
    return StateFunction::constant(grid, ones);
  }
  const auto& spec = cfg.at("z0");
  const std::string type = spec.at("type").get<std::string>();
  if (type == "constant") return StateFunction::constant(grid, parse_vector(spec.at("value"), n, "z0.value"));
  if (type == "samples") {
    StateFunction src;
    src.grid = parse_reals(spec.at("grid"), "z0.grid");
    const auto& vals = spec.at("values");
    if (!vals.is_array() || vals.size() != src.grid.size() || src.grid.size() < 2)
      bad("z0.values must have one entry per z0.grid point");
    for (const auto& v : vals) src.values.push_back(parse_vector(v, n, "z0.values"));
    if (std::abs(src.grid.front()) > 1e-12 || std::abs(src.grid.back() - 1.0) > 1e-12)
      bad("z0.grid must span [0, 1]");
    return StateFunction::sample(grid, [&](double z) { return src.at(z); });
  }
  bad("z0: unknown type \"" + type + "\"");
}

inline std::optional<std::vector<Matrix>> parse_m(const json& cfg, std::size_t n, std::size_t points) {
  if (!cfg.contains("M") || cfg.at("M").is_null()) return std::nullopt;
  const auto& m = cfg.at("M");
  if (m.is_object()) {
    if (m.value("type", "") != "constant") bad("M: only {\"type\": \"constant\"} objects are supported");
    return std::vector<Matrix>(points, parse_matrix(m.at("value"), n, n, "M.value"));
  }
  if (!m.is_array()) bad("M: expected an array");
  // One matrix per grid point takes precedence over a single nested matrix.
  if (m.size() == points && m.front().is_array()) {
    std::vector<Matrix> out;
    out.reserve(points);
    for (const auto& sample : m) out.push_back(parse_matrix(sample, n, n, "M sample"));
    return out;
  }
  return std::vector<Matrix>(points, parse_matrix(m, n, n, "M"));
}

}  // namespace detail

inline Pipeline load_pipeline(const json& cfg) {
  using namespace detail;
  if (!cfg.is_object()) bad("configuration must be a JSON object");
  Pipeline pl;
  const std::size_t points = parse_count(cfg, "grid_points", 2001);

  if (cfg.contains("A_d")) {
    pl.quad = {parse_nested(cfg.at("A_d"), "A_d"), parse_nested(cfg.at("B_d"), "B_d"),
               parse_nested(cfg.at("C_d"), "C_d"), parse_nested(cfg.at("D_d"), "D_d")};
    pl.quad.check();
    if (!cfg.contains("p1") || !cfg.at("p1").is_number()) bad("reduced input needs \"p1\"");
    pl.p1 = cfg.at("p1").get<double>();
    if (!(pl.p1 > 0.0)) throw Error(ErrorCode::NonPositiveSpeed, "p1 must be positive");
    pl.profile = SpatialProfile::constant(1.0 / pl.p1, points);
    pl.z0 = parse_z0(cfg, pl.profile, pl.quad.states());
    return pl;
  }

  BoundarySystem sys;
  sys.n = parse_count(cfg, "n");
  sys.inputs = parse_count(cfg, "inputs");
  sys.outputs = parse_count(cfg, "outputs");
  if (sys.n == 0) throw Error(ErrorCode::DimensionMismatch, "n must be positive");
  if (sys.inputs > sys.n) throw Error(ErrorCode::DimensionMismatch, "inputs must not exceed n");
  for (const char* key : {"K", "L", "K_y", "L_y", "lambda0"})
    if (!cfg.contains(key)) bad(std::string("missing \"") + key + "\"");
  sys.K = parse_matrix(cfg.at("K"), sys.n, sys.n, "K");
  sys.L = parse_matrix(cfg.at("L"), sys.n, sys.n, "L");
  sys.K_y = parse_matrix(cfg.at("K_y"), sys.outputs, sys.n, "K_y");
  sys.L_y = parse_matrix(cfg.at("L_y"), sys.outputs, sys.n, "L_y");
  sys.lambda0 = parse_profile(cfg.at("lambda0"), points);
  sys.M = parse_m(cfg, sys.n, sys.lambda0.points());
  validate(sys);

  const StateFunction z0 = parse_z0(cfg, sys.lambda0, sys.n);
  auto qt = q_transform(sys);
  pl.quad = reduce(qt.system);
  pl.profile = sys.lambda0;
  pl.p1 = pl.profile.total_travel_time();
  pl.z0 = z0;
  if (sys.M) {
    pl.Q1 = qt.Q1;
    for (std::size_t k = 0; k < pl.z0.values.size(); ++k) pl.z0.values[k] = qt.Q[k] * z0.values[k];
  }
  pl.system = std::move(sys);
  return pl;
}

/// Schema problems surface as InvalidConfig, whatever layer detects them.
inline Pipeline load_pipeline_checked(const json& cfg) {
  try {
    return load_pipeline(cfg);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Emission

inline ordered_json to_json(cplx v) {
  v += 0.0;  // -0.0 prints as 0.0
  if (v.imag() == 0.0) return v.real();
  ordered_json o;
  o["re"] = v.real();
  o["im"] = v.imag();
  return o;
}

inline ordered_json to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json vector_json(const Matrix& v) {
  ordered_json out = ordered_json::array();
  for (const auto& x : v.entries()) out.push_back(to_json(x));
  return out;
}

inline ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

/// %.17g, round-trip safe for doubles.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline ordered_json reduce_report(const Pipeline& pl) {
  ordered_json out;
  out["A_d"] = to_json(pl.quad.A);
  out["B_d"] = to_json(pl.quad.B);
  out["C_d"] = to_json(pl.quad.C);
  out["D_d"] = to_json(pl.quad.D);
  out["p1"] = pl.p1;
  return out;
}

struct SolveResult {
  RiccatiSolution care;
  std::optional<FilterSolution> fare;
  StabilityCertificate stability;
  UniquenessReport uniqueness;
};

/// Throws NoConvergence when the control equation fails; a failing filter
/// equation is reported, not thrown.
inline SolveResult solve_all(const DiscreteQuadruple& q, const RiccatiOptions& opt = {}) {
  SolveResult r{solve_care(q, opt), std::nullopt, {}, {}};
  try {
    r.fare = solve_fare(q, opt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoConvergence && e.code() != ErrorCode::SingularMatrix) throw;
  }
  r.stability = stability_certificate(q, r.care);
  r.uniqueness = uniqueness_certificate(q, r.care, r.fare);
  return r;
}

inline ordered_json solve_report(const Pipeline& pl, const RiccatiOptions& opt = {}) {
  const SolveResult r = solve_all(pl.quad, opt);
  ordered_json out;
  out["Pi"] = to_json(r.care.Pi);
  out["P"] = to_json(r.care.P);
  out["V"] = to_json(r.care.V);
  out["F_d"] = to_json(r.care.F);
  out["Omega"] = to_json(r.care.Omega);
  out["A_Pi"] = to_json(r.care.A_closed);
  out["iterations"] = r.care.iterations;
  out["care_residual"] = r.care.residual;
  out["r_open"] = r.stability.r_open;
  out["r_closed"] = r.stability.r_closed;
  out["stable"] = r.stability.stable;
  ordered_json fare;
  fare["solvable"] = r.uniqueness.fare_solvable;
  if (r.fare) {
    fare["PiTilde"] = to_json(r.fare->PiTilde);
    fare["iterations"] = r.fare->iterations;
    fare["residual"] = r.fare->residual;
  }
  out["fare"] = std::move(fare);
  out["unique"] = r.uniqueness.unique;
  if (!r.uniqueness.unique) out["reason"] = r.uniqueness.reason;
  return out;
}

inline StateFunction ones_on(const SpatialProfile& profile, std::size_t n) {
  Matrix ones(n, 1);
  for (auto& v : ones.entries()) v = 1.0;
  return StateFunction::constant(profile.grid(), ones);
}

inline ordered_json verify_report(const Pipeline& pl, std::size_t trials, std::uint64_t seed,
                                  std::size_t degree) {
  const auto& q = pl.quad;
  const RiccatiSolution care = solve_care(q);
  ordered_json out;
  out["trials"] = trials;
  out["seed"] = seed;
  out["degree"] = degree;
  out["care_residual"] = care.residual;
  if (trials > 0) {
    const auto s = verify_batch(q, care, trials, seed, degree);
    out["node_residual_max"] = s.node_max;
    out["weiss_weiss_residual_max"] = s.weiss_weiss_max;
    out["naive_residual_max"] = s.naive_max;
    out["naive_residual_min"] = s.naive_min;
    out["kl_optimal_max"] = s.kl_optimal_max;
    out["membership_defect_max"] = s.membership_max;
  }
  const auto grid = default_omega_grid(pl.p1);
  const auto fact = factorization_residual(q, care, pl.p1, grid);
  ordered_json f;
  f["points"] = grid.size();
  f["residual"] = fact.value;
  f["worst_omega"] = number_or_null(fact.worst_omega);
  f["skipped"] = fact.skipped;
  out["factorization"] = std::move(f);
  const auto coer = coercivity_margin(q, pl.p1, grid);
  out["coercivity_margin"] = coer.value;
  const auto gap = omega_limit_check(q, care);
  out["omega_gap"] = gap.gap;
  out["omega_factor_defect"] = gap.factor_defect;
  out["omega_star_omega"] = to_json(gap.omega);
  out["naive_weight"] = to_json(gap.naive);
  const auto h = hinf_proxy(q, care);
  ordered_json hj;
  hj["r_open"] = h.r_open;
  hj["r_closed"] = h.r_closed;
  hj["chi_bounded"] = h.chi_bounded;
  hj["chi_inv_bounded"] = h.chi_inv_bounded;
  out["hinf_proxy"] = std::move(hj);

  const std::vector<double> s_list{10.0 / pl.p1, 100.0 / pl.p1, 1000.0 / pl.p1};
  const auto probe = yosida_probe(pl.profile, q, ones_on(pl.profile, q.states()), s_list);
  ordered_json table = ordered_json::array();
  for (std::size_t k = 0; k < s_list.size(); ++k) {
    ordered_json row;
    row["s"] = s_list[k];
    row["value"] = vector_json(probe.values[k]);
    row["error"] = probe.errors[k];
    table.push_back(std::move(row));
  }
  ordered_json y;
  y["target"] = vector_json(probe.target);
  y["table"] = std::move(table);
  out["yosida"] = std::move(y);
  return out;
}

/// One row per omega: omega, Re/Im of every G entry, min eig Phi,
/// factorization residual, pole_skipped (1 when the row sits on a pole).
inline void popov_csv(const Pipeline& pl, double omega_min, double omega_max, std::size_t points,
                      std::ostream& os) {
  const auto& q = pl.quad;
  const RiccatiSolution care = solve_care(q);
  const auto omegas = uniform_omega_grid(omega_min, omega_max, points);
  os << "omega";
  for (std::size_t i = 0; i < q.outputs(); ++i)
    for (std::size_t j = 0; j < q.inputs(); ++j)
      os << ",G_" << i << "_" << j << "_re,G_" << i << "_" << j << "_im";
  os << ",min_eig_phi,factorization_residual,pole_skipped\n";

  std::vector<std::optional<FrequencySample>> rows(omegas.size());
  parallel_for(omegas.size(), [&](std::size_t k) {
    try {
      rows[k] = sample_frequency(q, care, pl.p1, omegas[k]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PoleHit) throw;
    }
  });
  const std::string nan = "nan";
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    os << fmt(omegas[k]);
    if (rows[k]) {
      const auto& f = *rows[k];
      for (const auto& g : f.G.entries()) os << ',' << fmt(g.real()) << ',' << fmt(g.imag());
      os << ',' << fmt(min_eigenvalue_hermitian(f.Phi)) << ',' << fmt(f.factorization_residual)
         << ",0\n";
    } else {
      for (std::size_t e = 0; e < 2 * q.outputs() * q.inputs(); ++e) os << ',' << nan;
      os << ',' << nan << ',' << nan << ",1\n";
    }
  }
}

/// "optimal", "zero", or a JSON matrix literal such as "[[0.3]]".
inline Matrix resolve_gain(const std::string& spec, const DiscreteQuadruple& q,
                           const std::optional<RiccatiSolution>& care) {
  if (spec == "optimal") {
    if (!care) throw Error(ErrorCode::NoConvergence, "optimal gain needs a CARE solution");
    return care->F;
  }
  if (spec == "zero") return Matrix(q.inputs(), q.states());
  json v;
  try {
    v = json::parse(spec);
  } catch (const json::exception&) {
    detail::bad("--gain must be optimal, zero or a JSON matrix");
  }
  return detail::parse_matrix(v, q.inputs(), q.states(), "gain");
}

inline void write_trace_csv(const SimulationResult& r, std::ostream& os) {
  const auto& tr = r.trace;
  const std::size_t n = tr.samples.empty() ? 0 : tr.samples.front().rows();
  const std::size_t p = r.inputs.empty() ? 0 : r.inputs.front().rows();
  const std::size_t m = r.outputs.empty() ? 0 : r.outputs.front().rows();
  os << "t";
  for (std::size_t i = 0; i < n; ++i) os << ",w1_" << i << "_re,w1_" << i << "_im";
  for (std::size_t i = 0; i < p; ++i) os << ",u_" << i << "_re,u_" << i << "_im";
  for (std::size_t i = 0; i < m; ++i) os << ",y_" << i << "_re,y_" << i << "_im";
  os << '\n';
  for (std::size_t k = 0; k < tr.samples.size(); ++k) {
    os << fmt(static_cast<double>(k) * tr.dt);
    for (const auto* block : {&tr.samples[k], &r.inputs[k], &r.outputs[k]})
      for (const auto& v : block->entries()) os << ',' << fmt(v.real()) << ',' << fmt(v.imag());
    os << '\n';
  }
}

/// Runs the closed loop and returns the summary. With periods = 0 the
/// CSV holds the initial period trace (the horizon itself is empty).
inline ordered_json simulate_report(const Pipeline& pl, std::size_t periods, std::size_t ppp,
                                    const std::string& gain_spec, bool want_tail,
                                    std::ostream* csv) {
  const auto& q = pl.quad;
  std::optional<SolveResult> solved;
  try {
    solved = solve_all(q);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoConvergence || gain_spec == "optimal") throw;
  }
  const Matrix gain =
      resolve_gain(gain_spec, q, solved ? std::optional<RiccatiSolution>(solved->care) : std::nullopt);
  const SimulationResult r = simulate_closed_loop(pl.profile, q, gain, pl.z0, periods, ppp, want_tail);

  if (csv) {
    if (periods == 0) {
      SimulationResult first = r;
      first.trace = initial_trace(pl.profile, pl.z0, ppp);
      first.inputs.clear();
      first.outputs.clear();
      for (const auto& w : first.trace.samples) {
        first.inputs.push_back(gain * w);
        first.outputs.push_back((q.C + q.D * gain) * w);
      }
      write_trace_csv(first, *csv);
    } else {
      write_trace_csv(r, *csv);
    }
  }

  ordered_json out;
  out["periods"] = periods;
  out["points_per_period"] = ppp;
  out["gain"] = to_json(gain);
  out["measured_cost"] = r.measured_cost;
  out["tail_cost"] = r.tail_available ? ordered_json(r.tail_cost) : ordered_json(nullptr);
  out["total_cost"] = r.tail_available ? ordered_json(r.measured_cost + r.tail_cost) : ordered_json(nullptr);
  out["predicted_cost"] = number_or_null(r.predicted_cost);
  if (solved) {
    const auto oc = optimal_cost(pl.profile, solved->care, pl.z0, solved->uniqueness);
    out["optimal_cost"] = oc.value;
    out["optimal_cost_certified"] = oc.certified;
  } else {
    out["optimal_cost"] = nullptr;
    out["optimal_cost_certified"] = false;
  }
  return out;
}

}  // namespace hyperlq::cli

#ifndef PIPF_IO_HPP
#define PIPF_IO_HPP

// Run configuration (JSON) and plot-ready CSV serialization.
//
// Numbers are written with std::to_chars in shortest round-trip form, which
// is locale independent; absent values (NaN) are written as empty fields.
// Angles in the configuration are given in degrees and kept verbatim so that
// serialize(parse(text)) is a fixed point.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "pipf/errors.hpp"
#include "pipf/stabilizer.hpp"
#include "pipf/sweep.hpp"

namespace pipf {

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  struct Model {
    double m = 80.0;
    double r0 = 1.0;
    double g = 9.8;
  } model;

  // Non-dimensional bounds; beta and gamma in rad.
  struct Bounds {
    std::array<double, 2> r{0.4, 1.0};
    std::array<double, 2> beta{0.0, std::numbers::pi};
    std::array<double, 2> gamma{-std::numbers::pi / 2, std::numbers::pi / 2};
    std::array<double, 2> F{0.0, 2.0};
    std::array<double, 2> tau{-1.0, 1.0};
  } bounds;

  struct Weights {
    std::vector<double> k1;
    double k2 = 0.0;
    double k3 = 0.0;
  };

  struct Stabilizer {
    double eta = 0.2;
    int knots = 20;
    double alpha_min_deg = 10.0;
    double alpha_max_deg = 170.0;
    double eps_gamma = 0.05;
    double eps_gamma_dot = 0.05;
    double eps_z_dot = 0.02;
    double z_dot_des = 0.01;
    double gamma_des = 0.0;
    double gamma_dot_des = 0.0;
    int max_iterations = 50;
    Weights pitch{{1.0, 10.0, 100.0, 1000.0}, 1e4, 1e5};
    Weights vertical{{1e6, 1e7, 1e8}, 1e3, 1e3};
  } stabilizer;

  struct Solver {
    double constraint_tolerance = 1e-6;
    double optimality_tolerance = 1e-5;
    int max_outer_iterations = 200;
    int max_inner_iterations = 80;
  } solver;

  struct Sweep {
    std::array<double, 2> omega0{1.0, 5.0};
    std::optional<std::array<double, 2>> vx0;
    double vz0 = -0.3;
    double inertia_nd = 0.04;
    double alpha0_deg = 60.0;
    int n_omega = 21;
    int n_vx = 13;
    double eta_vx = 1.5;
    double vx_span = 1.2;
  } sweep;

  struct Case {
    double omega0 = 3.0;
    double vx0 = 1.2;
    double vz0 = -0.3;
    double inertia_nd = 0.04;
    double alpha0_deg = 60.0;
  } landing_case;

  struct Capture {
    int nsteps = 0;
    double step_time_nd = 0.5;
    /// m; defaults to r0 cos(alpha_min).
    std::optional<double> reach;
  } capture;

  int workers = 1;
  std::string out_dir = "out";

  ModelParams model_params() const {
    // The flywheel inertia is set per case; this value is a placeholder.
    return ModelParams::from_nondimensional_inertia(model.m, model.g, model.r0,
                                                    landing_case.inertia_nd);
  }

  StabilizerConfig stabilizer_config() const {
    StabilizerConfig c;
    const auto& s = stabilizer;
    c.eta = s.eta;
    c.knots = s.knots;
    c.alpha_min = deg_to_rad(s.alpha_min_deg);
    c.alpha_max = deg_to_rad(s.alpha_max_deg);
    c.eps_gamma = s.eps_gamma;
    c.eps_gamma_dot = s.eps_gamma_dot;
    c.eps_z_dot = s.eps_z_dot;
    c.z_dot_des = s.z_dot_des;
    c.gamma_des = s.gamma_des;
    c.gamma_dot_des = s.gamma_dot_des;
    c.max_iterations = s.max_iterations;
    c.pitch = {s.pitch.k1, s.pitch.k2, s.pitch.k3};
    c.vertical = {s.vertical.k1, s.vertical.k2, s.vertical.k3};
    c.constraints.Q_min = {bounds.r[0], bounds.beta[0], bounds.gamma[0]};
    c.constraints.Q_max = {bounds.r[1], bounds.beta[1], bounds.gamma[1]};
    c.constraints.U_min = {bounds.F[0], bounds.tau[0]};
    c.constraints.U_max = {bounds.F[1], bounds.tau[1]};
    c.solver.solver.constraint_tolerance = solver.constraint_tolerance;
    c.solver.solver.optimality_tolerance = solver.optimality_tolerance;
    c.solver.solver.max_outer_iterations = solver.max_outer_iterations;
    c.solver.solver.max_inner_iterations = solver.max_inner_iterations;
    return c;
  }

  SweepSpec sweep_spec() const {
    SweepSpec s;
    s.omega0 = {sweep.omega0[0], sweep.omega0[1]};
    if (sweep.vx0) s.vx0 = Range{(*sweep.vx0)[0], (*sweep.vx0)[1]};
    s.vz0 = sweep.vz0;
    s.inertia_nd = sweep.inertia_nd;
    s.alpha0 = deg_to_rad(sweep.alpha0_deg);
    s.n_omega = sweep.n_omega;
    s.n_vx = sweep.n_vx;
    s.eta_vx = sweep.eta_vx;
    s.vx_span = sweep.vx_span;
    return s;
  }

  LandingCase case_spec() const {
    return {landing_case.omega0, landing_case.vx0, landing_case.vz0, landing_case.inertia_nd,
            deg_to_rad(landing_case.alpha0_deg)};
  }

  double capture_reach() const {
    return capture.reach.value_or(model.r0 * std::cos(deg_to_rad(stabilizer.alpha_min_deg)));
  }

  /// Semantic checks beyond types; throws InvalidInput.
  void validate() const {
    model_params();
    stabilizer_config().validate();
    sweep_spec().validate();
    if (workers < 1) throw InvalidInput("workers must be positive");
    if (capture.nsteps < 0) throw InvalidInput("capture.nsteps must be non-negative");
    detail::require_positive(capture.step_time_nd, "capture.step_time_nd");
    if (capture.reach) detail::require_positive(*capture.reach, "capture.reach");
    if (out_dir.empty()) throw InvalidInput("out_dir must not be empty");
  }
};

namespace detail {

using nlohmann::json;

/// Reads named members from a JSON object, rejecting any other key
/// so that misspellings surface instead of silently using defaults.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidInput(path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      j_.at(key).get_to(out);
    } catch (const json::exception& e) {
      throw InvalidInput(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    try {
      j_.at(key).get_to(v);
    } catch (const json::exception& e) {
      throw InvalidInput(path_ + "." + key + ": " + e.what());
    }
    out = v;
  }

  const json& child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return j_.contains(key) ? j_.at(key) : empty;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw InvalidInput("unknown key " + path_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_weights(const json& j, const std::string& path, RunConfig::Weights& w) {
  ObjectReader r(j, path);
  r.get("k1", w.k1);
  r.get("k2", w.k2);
  r.get("k3", w.k3);
  r.finish();
}

inline json weights_json(const RunConfig::Weights& w) {
  return {{"k1", w.k1}, {"k2", w.k2}, {"k3", w.k3}};
}

}  // namespace detail

inline RunConfig parse_config(std::string_view text) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  detail::ObjectReader top(root, "config");
  int schema = kSchemaVersion;
  top.get("schema", schema);
  if (schema != kSchemaVersion) throw InvalidInput("unsupported config schema");

  {
    detail::ObjectReader r(top.child("model"), "model");
    r.get("m", c.model.m);
    r.get("r0", c.model.r0);
    r.get("g", c.model.g);
    r.finish();
  }
  {
    detail::ObjectReader r(top.child("bounds"), "bounds");
    r.get("r", c.bounds.r);
    r.get("beta", c.bounds.beta);
    r.get("gamma", c.bounds.gamma);
    r.get("F", c.bounds.F);
    r.get("tau", c.bounds.tau);
    r.finish();
  }
  {
    auto& s = c.stabilizer;
    detail::ObjectReader r(top.child("stabilizer"), "stabilizer");
    r.get("eta", s.eta);
    r.get("knots", s.knots);
    r.get("alpha_min_deg", s.alpha_min_deg);
    r.get("alpha_max_deg", s.alpha_max_deg);
    r.get("eps_gamma", s.eps_gamma);
    r.get("eps_gamma_dot", s.eps_gamma_dot);
    r.get("eps_z_dot", s.eps_z_dot);
    r.get("z_dot_des", s.z_dot_des);
    r.get("gamma_des", s.gamma_des);
    r.get("gamma_dot_des", s.gamma_dot_des);
    r.get("max_iterations", s.max_iterations);
    const auto& pj = r.child("pitch");
    if (!pj.empty()) detail::read_weights(pj, "stabilizer.pitch", s.pitch);
    const auto& vj = r.child("vertical");
    if (!vj.empty()) detail::read_weights(vj, "stabilizer.vertical", s.vertical);
    r.finish();
  }
  {
    detail::ObjectReader r(top.child("solver"), "solver");
    r.get("constraint_tolerance", c.solver.constraint_tolerance);
    r.get("optimality_tolerance", c.solver.optimality_tolerance);
    r.get("max_outer_iterations", c.solver.max_outer_iterations);
    r.get("max_inner_iterations", c.solver.max_inner_iterations);
    r.finish();
  }
  {
    auto& s = c.sweep;
    detail::ObjectReader r(top.child("sweep"), "sweep");
    r.get("omega0", s.omega0);
    r.get("vx0", s.vx0);
    r.get("vz0", s.vz0);
    r.get("inertia_nd", s.inertia_nd);
    r.get("alpha0_deg", s.alpha0_deg);
    r.get("n_omega", s.n_omega);
    r.get("n_vx", s.n_vx);
    r.get("eta_vx", s.eta_vx);
    r.get("vx_span", s.vx_span);
    r.finish();
  }
  {
    auto& s = c.landing_case;
    detail::ObjectReader r(top.child("case"), "case");
    r.get("omega0", s.omega0);
    r.get("vx0", s.vx0);
    r.get("vz0", s.vz0);
    r.get("inertia_nd", s.inertia_nd);
    r.get("alpha0_deg", s.alpha0_deg);
    r.finish();
  }
  {
    detail::ObjectReader r(top.child("capture"), "capture");
    r.get("nsteps", c.capture.nsteps);
    r.get("step_time_nd", c.capture.step_time_nd);
    r.get("reach", c.capture.reach);
    r.finish();
  }
  top.get("workers", c.workers);
  top.get("out_dir", c.out_dir);
  top.finish();
  c.validate();
  return c;
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  using nlohmann::ordered_json;
  const auto& s = c.stabilizer;
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["model"] = {{"m", c.model.m}, {"r0", c.model.r0}, {"g", c.model.g}};
  j["bounds"] = {{"r", c.bounds.r},         {"beta", c.bounds.beta}, {"gamma", c.bounds.gamma},
                 {"F", c.bounds.F},         {"tau", c.bounds.tau}};
  j["stabilizer"] = {{"eta", s.eta},
                     {"knots", s.knots},
                     {"alpha_min_deg", s.alpha_min_deg},
                     {"alpha_max_deg", s.alpha_max_deg},
                     {"eps_gamma", s.eps_gamma},
                     {"eps_gamma_dot", s.eps_gamma_dot},
                     {"eps_z_dot", s.eps_z_dot},
                     {"z_dot_des", s.z_dot_des},
                     {"gamma_des", s.gamma_des},
                     {"gamma_dot_des", s.gamma_dot_des},
                     {"max_iterations", s.max_iterations},
                     {"pitch", detail::weights_json(s.pitch)},
                     {"vertical", detail::weights_json(s.vertical)}};
  j["solver"] = {{"constraint_tolerance", c.solver.constraint_tolerance},
                 {"optimality_tolerance", c.solver.optimality_tolerance},
                 {"max_outer_iterations", c.solver.max_outer_iterations},
                 {"max_inner_iterations", c.solver.max_inner_iterations}};
  ordered_json sw = {{"omega0", c.sweep.omega0}};
  sw["vx0"] = c.sweep.vx0 ? ordered_json(*c.sweep.vx0) : ordered_json(nullptr);
  sw["vz0"] = c.sweep.vz0;
  sw["inertia_nd"] = c.sweep.inertia_nd;
  sw["alpha0_deg"] = c.sweep.alpha0_deg;
  sw["n_omega"] = c.sweep.n_omega;
  sw["n_vx"] = c.sweep.n_vx;
  sw["eta_vx"] = c.sweep.eta_vx;
  sw["vx_span"] = c.sweep.vx_span;
  j["sweep"] = sw;
  j["case"] = {{"omega0", c.landing_case.omega0},
               {"vx0", c.landing_case.vx0},
               {"vz0", c.landing_case.vz0},
               {"inertia_nd", c.landing_case.inertia_nd},
               {"alpha0_deg", c.landing_case.alpha0_deg}};
  j["capture"] = {{"nsteps", c.capture.nsteps},
                  {"step_time_nd", c.capture.step_time_nd},
                  {"reach", c.capture.reach ? ordered_json(*c.capture.reach) : ordered_json(nullptr)}};
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  return j;
}

inline std::string serialize_config(const RunConfig& c) { return config_json(c).dump(2) + "\n"; }

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-trip decimal; NaN becomes an empty field.
inline std::string format_number(double v) {
  if (std::isnan(v)) return {};
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Inverse of format_number. Empty fields read as NaN.
inline double parse_number(std::string_view s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidInput("malformed number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& names) { row_strings(names); }

  CsvWriter& field(double v) { return raw(format_number(v)); }
  CsvWriter& field(int v) { return raw(std::to_string(v)); }
  CsvWriter& field(std::size_t v) { return raw(std::to_string(v)); }
  CsvWriter& field(bool v) { return raw(v ? "1" : "0"); }
  CsvWriter& field(const char* s) { return raw(s); }
  CsvWriter& field(const std::string& s) { return raw(s); }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }
  void row_strings(const std::vector<std::string>& v) {
    for (const auto& s : v) raw(s);
    end_row();
  }

  std::ostream& os_;
  bool first_ = true;
};

inline const std::vector<std::string>& map_csv_columns() {
  static const std::vector<std::string> cols = {
      "index",  "omega0", "vx0",  "vz0",       "inertia_nd", "alpha0_deg", "success",
      "reason", "T_lb",   "T_ub", "T_vs_star", "min_Ffz",    "max_mu"};
  return cols;
}

/// One row per case; times in seconds, forces in m g. Diagnostics that do not
/// apply to a case are left empty.
inline void write_map_csv(std::ostream& os, const PerformanceMap& map) {
  CsvWriter w(os);
  w.header(map_csv_columns());
  for (std::size_t k = 0; k < map.cases.size(); ++k) {
    const auto& o = map.cases[k];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    w.field(k)
        .field(o.landing_case.omega0_nd)
        .field(o.landing_case.vx0_nd)
        .field(o.landing_case.vz0_nd)
        .field(o.landing_case.inertia_nd)
        .field(rad_to_deg(o.landing_case.alpha0))
        .field(o.success)
        .field(to_string(o.reason))
        .field(o.feasibility ? o.feasibility->T_lb : nan)
        .field(o.feasibility ? o.feasibility->T_ub : nan)
        .field(o.T_vs_star)
        .field(o.success ? o.grf.min_Ffz_nd : nan)
        .field(o.success ? o.grf.max_mu : nan);
    w.end_row();
  }
}

/// Row of a map CSV as read back for analysis.
struct MapRow {
  std::size_t index = 0;
  double omega0 = 0.0;
  double vx0 = 0.0;
  double vz0 = 0.0;
  double inertia_nd = 0.0;
  double alpha0_deg = 0.0;
  bool success = false;
  std::string reason;
  double T_lb = 0.0;
  double T_ub = 0.0;
  double T_vs_star = 0.0;
  double min_Ffz = 0.0;
  double max_mu = 0.0;
};

inline std::vector<MapRow> read_map_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("map file is empty");
  if (split_csv_line(line) != map_csv_columns()) throw InvalidInput("map file has wrong header");
  std::vector<MapRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != map_csv_columns().size()) {
      throw InvalidInput("map file line " + std::to_string(lineno) + " has wrong field count");
    }
    MapRow r;
    const double idx = parse_number(f[0]);
    if (!(idx >= 0.0) || idx != std::floor(idx)) throw InvalidInput("bad case index");
    r.index = static_cast<std::size_t>(idx);
    r.omega0 = parse_number(f[1]);
    r.vx0 = parse_number(f[2]);
    r.vz0 = parse_number(f[3]);
    r.inertia_nd = parse_number(f[4]);
    r.alpha0_deg = parse_number(f[5]);
    if (f[6] != "0" && f[6] != "1") throw InvalidInput("success field must be 0 or 1");
    r.success = f[6] == "1";
    r.reason = f[7];
    r.T_lb = parse_number(f[8]);
    r.T_ub = parse_number(f[9]);
    r.T_vs_star = parse_number(f[10]);
    r.min_Ffz = parse_number(f[11]);
    r.max_mu = parse_number(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::ordered_json boundary_json(const PerformanceMap& map) {
  nlohmann::ordered_json j;
  j["schema"] = kSchemaVersion;
  j["inertia_nd"] = map.spec.inertia_nd;
  j["vz0"] = map.spec.vz0;
  j["alpha0_deg"] = rad_to_deg(map.spec.alpha0);
  j["grid"] = {{"omega0", map.omega_values}, {"vx0", map.vx_values}};
  j["cases"] = map.cases.size();
  j["successes"] = map.success_count();
  j["neighbor_set"] = map.neighbor_set;
  if (map.boundary) {
    j["boundary"] = {{"slope", map.boundary->slope},
                     {"intercept", map.boundary->intercept},
                     {"r_squared", map.boundary->r_squared}};
  } else {
    j["boundary"] = nullptr;
  }
  j["monotonicity_flags"] = monotonicity_flags(map);
  return j;
}

}  // namespace pipf

#endif  // PIPF_IO_HPP

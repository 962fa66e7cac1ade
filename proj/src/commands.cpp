#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "pipf/io.hpp"
#include "pipf/lip_capturability.hpp"
#include "pipf/stabilizer.hpp"
#include "pipf/sweep.hpp"

namespace fs = std::filesystem;

namespace pipf::cli {
namespace {

struct Options {
  std::string config_path;
  std::optional<int> workers;
  std::optional<int> nsteps;
  std::vector<std::string> factors;
  std::optional<std::string> out_dir;
  std::vector<std::string> inputs;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.workers) c.workers = *o.workers;
  if (o.nsteps) c.capture.nsteps = *o.nsteps;
  if (o.out_dir) c.out_dir = *o.out_dir;
  c.validate();
  return c;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw InvalidInput("cannot create output directory " + dir);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InvalidInput("cannot write " + p.string());
  return f;
}

nlohmann::ordered_json phase_json(const PhaseResult& ph) {
  return {{"exit", to_string(ph.exit)},
          {"reason", to_string(ph.reason)},
          {"k1", ph.k1},
          {"iterations", ph.iterations},
          {"duration", ph.duration}};
}

/// JSON cannot hold NaN; absent values become null.
nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

void write_trajectory(std::ostream& os, const LandingOutcome& o, const ModelParams& params) {
  CsvWriter w(os);
  w.header({"phase", "t", "r", "beta", "gamma", "alpha", "r_dot", "beta_dot", "gamma_dot", "x",
            "z", "x_dot", "z_dot", "F", "tau", "F_fx", "F_fz", "mu_req"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto emit = [&](const PhaseResult& ph, const char* name) {
    for (std::size_t i = 0; i < ph.states.size(); ++i) {
      const auto& s = ph.states[i];
      const auto b = cartesian_body_state(s);
      w.field(name).field(s.t).field(s.r).field(s.beta).field(s.gamma).field(s.alpha());
      w.field(s.r_dot).field(s.beta_dot).field(s.gamma_dot);
      w.field(b.x).field(b.z).field(b.x_dot).field(b.z_dot);
      if (i < ph.controls.size()) {
        const auto& u = ph.controls[i];
        const auto grf = ground_reaction(s, u, params);
        w.field(u.F).field(u.tau).field(grf.F_fx).field(grf.F_fz).field(grf.mu_req);
      } else {
        for (int k = 0; k < 5; ++k) w.field(nan);
      }
      w.end_row();
    }
  };
  emit(o.pitch, "pitch");
  if (o.vertical) emit(*o.vertical, "vertical");
}

int cmd_simulate(const Options& opt, std::ostream& out) {
  const RunConfig cfg = resolve_config(opt);
  const LandingCase lc = cfg.case_spec();
  const ModelParams params = ModelParams::from_nondimensional_inertia(
      cfg.model.m, cfg.model.g, cfg.model.r0, lc.inertia_nd);
  const LandingOutcome o = first_stance_step(lc, cfg.stabilizer_config(), params);
  const fs::path dir = prepare_out(cfg.out_dir);

  {
    auto f = open_out(dir / "trajectory.csv");
    write_trajectory(f, o, params);
  }

  nlohmann::ordered_json j;
  j["schema"] = kSchemaVersion;
  j["case"] = {{"omega0", lc.omega0_nd},
               {"vx0", lc.vx0_nd},
               {"vz0", lc.vz0_nd},
               {"inertia_nd", lc.inertia_nd},
               {"alpha0_deg", rad_to_deg(lc.alpha0)}};
  j["success"] = o.success;
  j["reason"] = to_string(o.reason);
  j["diagnostic"] = o.diagnostic;
  j["pitch"] = phase_json(o.pitch);
  if (o.feasibility) {
    const auto& r = *o.feasibility;
    j["feasibility"] = {{"T_lb", number_or_null(r.T_lb)},
                        {"T_ub", number_or_null(r.T_ub)},
                        {"alpha_ub_vs_deg", rad_to_deg(r.alpha_ub_vs)},
                        {"alpha_ddot_lb_vs", r.alpha_ddot_lb_vs},
                        {"preconditions_met", r.preconditions_met},
                        {"feasible", r.feasible}};
  } else {
    j["feasibility"] = nullptr;
  }
  j["vertical"] = o.vertical ? phase_json(*o.vertical) : nlohmann::ordered_json(nullptr);
  j["T_vs_star"] = number_or_null(o.T_vs_star);
  j["grf"] = {{"min_Ffz", number_or_null(o.grf.min_Ffz_nd)},
              {"max_mu", number_or_null(o.grf.max_mu)}};
  const auto terminal = cartesian_body_state(o.terminal_state);
  j["terminal"] = {{"t", o.terminal_state.t},
                   {"x", terminal.x},
                   {"z", terminal.z},
                   {"x_dot", terminal.x_dot},
                   {"z_dot", terminal.z_dot},
                   {"gamma", o.terminal_state.gamma},
                   {"gamma_dot", o.terminal_state.gamma_dot}};

  if (cfg.capture.nsteps > 0 && o.success) {
    // Hand the terminal body state to the LIP with the stance foot at the origin.
    const LipState lip{terminal.x, terminal.x_dot, terminal.z};
    const StepPlan plan = n_step_capture(lip, cfg.capture.nsteps, cfg.capture_reach(),
                                         params.g(),
                                         cfg.capture.step_time_nd * params.time_constant(), 0.0);
    auto f = open_out(dir / "capture.csv");
    CsvWriter w(f);
    w.header({"step", "foot_x", "x", "x_dot", "residual_velocity"});
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < plan.steps.size(); ++k) {
      const auto& s = plan.steps[k];
      w.field(k + 1).field(s.foot_x).field(s.at_touchdown.x).field(s.at_touchdown.x_dot);
      w.field(s.residual_velocity);
      w.end_row();
      steps.push_back({{"foot_x", s.foot_x}, {"residual_velocity", s.residual_velocity}});
    }
    j["capture"] = {{"captured", plan.captured}, {"steps", steps}, {"reach", cfg.capture_reach()}};
  }

  {
    auto f = open_out(dir / "outcome.json");
    f << j.dump(2) << "\n";
  }
  out << (o.success ? "success" : "failure") << " (" << to_string(o.reason) << ")\n";
  return kOk;
}

struct FactorAxis {
  std::string key;
  std::vector<std::string> labels;
  std::vector<double> values;
};

std::vector<FactorAxis> parse_factors(const std::vector<std::string>& specs) {
  std::vector<FactorAxis> axes;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("factor must look like K=V,...");
    FactorAxis a;
    a.key = spec.substr(0, eq);
    if (a.key != "I" && a.key != "vz0" && a.key != "alpha0") {
      throw InvalidInput("unknown factor '" + a.key + "' (expected I, vz0 or alpha0)");
    }
    for (const auto& ax : axes) {
      if (ax.key == a.key) throw InvalidInput("factor '" + a.key + "' given twice");
    }
    std::stringstream ss(spec.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      a.labels.push_back(item);
      a.values.push_back(parse_number(item));
      if (!std::isfinite(a.values.back())) throw InvalidInput("factor values must be finite");
    }
    if (a.values.empty()) throw InvalidInput("factor '" + a.key + "' has no values");
    axes.push_back(std::move(a));
  }
  return axes;
}

void write_map_files(const fs::path& dir, const std::string& stem, const PerformanceMap& map) {
  {
    auto f = open_out(dir / (stem + ".csv"));
    write_map_csv(f, map);
  }
  auto f = open_out(dir / (stem + ".json"));
  f << boundary_json(map).dump(2) << "\n";
}

int cmd_sweep(const Options& opt, std::ostream& out) {
  const RunConfig cfg = resolve_config(opt);
  const auto axes = parse_factors(opt.factors);
  const StabilizerConfig scfg = cfg.stabilizer_config();
  const ModelParams params = cfg.model_params();
  const fs::path dir = prepare_out(cfg.out_dir);

  if (axes.empty()) {
    const PerformanceMap map = run_map(cfg.sweep_spec(), scfg, params, cfg.workers);
    write_map_files(dir, "map", map);
    out << map.success_count() << "/" << map.cases.size() << " successes\n";
    return kOk;
  }

  // Cartesian product of the factor axes, first axis outermost.
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  std::vector<std::size_t> pick(axes.size(), 0);
  while (true) {
    SweepSpec spec = cfg.sweep_spec();
    std::string stem = "map";
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = axes[a].values[pick[a]];
      if (axes[a].key == "I") spec.inertia_nd = v;
      if (axes[a].key == "vz0") spec.vz0 = v;
      if (axes[a].key == "alpha0") spec.alpha0 = deg_to_rad(v);
      stem += "_" + axes[a].key + axes[a].labels[pick[a]];
    }
    spec.validate();
    const PerformanceMap map = run_map(spec, scfg, params, cfg.workers);
    write_map_files(dir, stem, map);
    auto row = boundary_json(map);
    row["file"] = stem + ".csv";
    table.push_back(row);
    out << stem << ": " << map.success_count() << "/" << map.cases.size() << " successes\n";

    std::size_t a = axes.size();
    while (a-- > 0) {
      if (++pick[a] < axes[a].values.size()) break;
      pick[a] = 0;
    }
    if (a == static_cast<std::size_t>(-1)) break;
  }
  auto f = open_out(dir / "factors.json");
  nlohmann::ordered_json j;
  j["schema"] = kSchemaVersion;
  j["maps"] = table;
  f << j.dump(2) << "\n";
  return kOk;
}

/// Rebuilds enough of a performance map from CSV rows to refit the boundary.
/// Returns nothing when the rows do not form a complete lattice.
std::optional<PerformanceMap> map_from_rows(const std::vector<MapRow>& rows) {
  std::vector<double> ws, vs;
  for (const auto& r : rows) {
    ws.push_back(r.omega0);
    vs.push_back(r.vx0);
  }
  for (auto* v : {&ws, &vs}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  if (ws.size() < 2 || vs.size() < 2 || ws.size() * vs.size() != rows.size()) return std::nullopt;
  PerformanceMap map;
  map.omega_values = ws;
  map.vx_values = vs;
  map.cases.resize(rows.size());
  std::vector<bool> filled(rows.size(), false);
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>(std::lower_bound(ws.begin(), ws.end(), r.omega0) - ws.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(vs.begin(), vs.end(), r.vx0) - vs.begin());
    const std::size_t k = map.index(i, j);
    if (filled[k]) return std::nullopt;
    filled[k] = true;
    map.cases[k].success = r.success;
    map.cases[k].landing_case = {r.omega0, r.vx0, r.vz0, r.inertia_nd, deg_to_rad(r.alpha0_deg)};
  }
  attach_boundary(map);
  return map;
}

void write_histogram(CsvWriter& w, const char* name, const std::vector<double>& edges,
                     const std::vector<double>& values) {
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    const auto n = std::count_if(values.begin(), values.end(), [&](double v) {
      return v >= edges[b] && v < edges[b + 1];
    });
    w.field(name).field(edges[b]).field(edges[b + 1]).field(static_cast<std::size_t>(n));
    w.end_row();
  }
}

int cmd_analyze(const Options& opt, std::ostream& out) {
  if (opt.inputs.empty()) throw InvalidInput("analyze needs at least one map file");
  std::vector<std::pair<fs::path, std::vector<MapRow>>> maps;
  for (const auto& in : opt.inputs) {
    std::ifstream f(in, std::ios::binary);
    if (!f) throw InvalidInput("cannot read map file " + in);
    try {
      maps.emplace_back(fs::path(in), read_map_csv(f));
    } catch (const InvalidInput& e) {
      throw InvalidInput(in + ": " + e.what());
    }
  }
  const fs::path dir = prepare_out(opt.out_dir.value_or("out"));
  const double inf = std::numeric_limits<double>::infinity();

  for (const auto& [path, rows] : maps) {
    const std::string stem = path.stem().string();
    std::vector<const MapRow*> ok;
    for (const auto& r : rows) {
      if (r.success) ok.push_back(&r);
    }

    // Successes that went through a vertical phase carry both bounds.
    std::vector<const MapRow*> series;
    for (const auto* r : ok) {
      if (std::isfinite(r->T_lb) && std::isfinite(r->T_ub)) series.push_back(r);
    }
    std::stable_sort(series.begin(), series.end(),
                     [](const MapRow* a, const MapRow* b) { return a->T_lb < b->T_lb; });
    {
      auto f = open_out(dir / (stem + "_tvs.csv"));
      CsvWriter w(f);
      w.header({"rank", "index", "omega0", "vx0", "T_lb", "T_ub", "T_vs_star", "eta_T"});
      for (std::size_t k = 0; k < series.size(); ++k) {
        const auto* r = series[k];
        w.field(k).field(r->index).field(r->omega0).field(r->vx0).field(r->T_lb);
        w.field(r->T_ub).field(r->T_vs_star).field(r->T_ub / r->T_lb);
        w.end_row();
      }
    }
    {
      auto f = open_out(dir / (stem + "_grf_hist.csv"));
      CsvWriter w(f);
      w.header({"factor", "lo", "hi", "count"});
      std::vector<double> mu, fz;
      for (const auto* r : ok) {
        mu.push_back(r->max_mu);
        fz.push_back(r->min_Ffz);
      }
      write_histogram(w, "max_mu", {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, inf}, mu);
      write_histogram(w, "min_Ffz", {-inf, 0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, inf}, fz);
    }

    nlohmann::ordered_json j;
    j["schema"] = kSchemaVersion;
    j["source"] = path.filename().string();
    j["cases"] = rows.size();
    j["successes"] = ok.size();
    double min_eta = inf;
    for (const auto* r : series) min_eta = std::min(min_eta, r->T_ub / r->T_lb);
    j["min_eta_T"] = number_or_null(min_eta);
    const auto map = map_from_rows(rows);
    if (map && map->boundary) {
      j["boundary"] = {{"slope", map->boundary->slope},
                       {"intercept", map->boundary->intercept},
                       {"r_squared", map->boundary->r_squared}};
    } else {
      j["boundary"] = nullptr;
    }
    auto f = open_out(dir / (stem + "_report.json"));
    f << j.dump(2) << "\n";
    out << stem << ": " << ok.size() << " successes, " << series.size() << " with bounds\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PIPF landing evaluation"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON run configuration")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory");
  };
  auto* sim = app.add_subcommand("simulate", "run one landing case");
  add_common(sim);
  sim->add_option("--nsteps", opt.nsteps, "LIP follow-up steps")->check(CLI::NonNegativeNumber);

  auto* sweep = app.add_subcommand("sweep", "run a performance map");
  add_common(sweep);
  sweep->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--factors", opt.factors, "factor levels, e.g. I=0.04,0.08,0.12")
      ->take_all()
      ->allow_extra_args(false);

  auto* analyze = app.add_subcommand("analyze", "report on map CSV files");
  analyze->add_option("maps", opt.inputs, "map CSV files")->required();
  analyze->add_option("--out", opt.out_dir, "output directory");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  try {
    if (*sim) return cmd_simulate(opt, out);
    if (*sweep) return cmd_sweep(opt, out);
    return cmd_analyze(opt, out);
  } catch (const InvalidInput& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace pipf::cli

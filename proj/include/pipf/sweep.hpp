#ifndef PIPF_SWEEP_HPP
#define PIPF_SWEEP_HPP

// Initial-condition grids, parallel landing sweeps, performance maps and
// linear boundary regression.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pipf/errors.hpp"
#include "pipf/lip_capturability.hpp"
#include "pipf/stabilizer.hpp"

namespace pipf {

/// Non-dimensional inertia of a flywheel modelled as a uniform rod of length
/// eta_l r0 carrying the body mass.
inline double rod_inertia(double eta_l) {
  detail::require_positive(eta_l, "eta_l");
  return eta_l * eta_l / 12.0;
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SweepSpec {
  Range omega0{1.0, 5.0};
  /// Derived from the capture-point bound when absent.
  std::optional<Range> vx0;
  double vz0 = -0.3;
  double inertia_nd = 0.04;
  double alpha0 = deg_to_rad(60.0);
  /// Full-map resolution; desk-scale runs use 9 x 7.
  int n_omega = 21;
  int n_vx = 13;
  double eta_vx = 1.5;
  double vx_span = 1.2;

  void validate() const {
    const auto check = [](const Range& r, const char* name) {
      detail::require_finite(r.lo, name);
      detail::require_finite(r.hi, name);
      if (!(r.lo < r.hi)) throw InvalidInput(std::string(name) + " range must be nonempty");
    };
    check(omega0, "omega0");
    if (vx0) check(*vx0, "vx0");
    if (n_omega < 2 || n_vx < 2) throw InvalidInput("grid counts must be at least 2");
    detail::require_finite(vz0, "vz0");
    detail::require_positive(inertia_nd, "inertia_nd");
    detail::require_positive(vx_span, "vx_span");
    if (!(alpha0 > 0.0 && alpha0 < std::numbers::pi)) {
      throw InvalidInput("alpha0 must lie in (0, pi)");
    }
  }

  /// The printed spans of the capture-point bound are the formula cut to two
  /// decimals (0.80593 appears as 0.80), so the lower end is truncated too.
  Range vx0_range() const {
    if (vx0) return *vx0;
    const double lo = std::trunc(min_horizontal_speed(alpha0, eta_vx) * 100.0) / 100.0;
    return {lo, lo + vx_span};
  }

  std::vector<double> omega_values() const { return lattice(omega0, n_omega); }
  std::vector<double> vx_values() const { return lattice(vx0_range(), n_vx); }

  static std::vector<double> lattice(const Range& r, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    const double h = (r.hi - r.lo) / (n - 1);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = r.lo + h * i;
    v.back() = r.hi;
    return v;
  }
};

/// Row-major lattice: index = i_omega * n_vx + j_vx.
inline std::vector<LandingCase> build_grid(const SweepSpec& spec) {
  spec.validate();
  const auto omegas = spec.omega_values();
  const auto vxs = spec.vx_values();
  std::vector<LandingCase> cases;
  cases.reserve(omegas.size() * vxs.size());
  for (double w : omegas) {
    for (double vx : vxs) {
      cases.push_back({w, vx, spec.vz0, spec.inertia_nd, spec.alpha0});
    }
  }
  return cases;
}

/// Evaluates every case with first_stance_step on a fixed pool of workers.
/// Results are indexed like the input; an exception inside a case becomes a
/// failure tagged InternalError.
inline std::vector<LandingOutcome> run_sweep(const std::vector<LandingCase>& cases,
                                             const StabilizerConfig& cfg,
                                             const ModelParams& params, int worker_count) {
  if (cases.empty()) throw InvalidInput("sweep needs at least one case");
  if (worker_count < 1) throw InvalidInput("worker_count must be positive");
  cfg.validate();

  std::vector<LandingOutcome> out(cases.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        out[i] = first_stance_step(cases[i], cfg, params);
      } catch (const std::exception& e) {
        LandingOutcome o;
        o.landing_case = cases[i];
        o.reason = FailureReason::InternalError;
        o.diagnostic = e.what();
        out[i] = std::move(o);
      }
    }
  };
  const auto n = static_cast<std::size_t>(worker_count);
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < std::min(n, cases.size()); ++w) pool.emplace_back(work);
  work();
  pool.clear();
  return out;
}

struct BoundaryFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct PerformanceMap {
  SweepSpec spec;
  std::vector<double> omega_values;
  std::vector<double> vx_values;
  std::vector<LandingOutcome> cases;
  std::vector<std::size_t> neighbor_set;
  std::optional<BoundaryFit> boundary;

  std::size_t index(std::size_t i_omega, std::size_t j_vx) const {
    return i_omega * vx_values.size() + j_vx;
  }
  std::size_t success_count() const {
    return static_cast<std::size_t>(
        std::count_if(cases.begin(), cases.end(), [](const auto& c) { return c.success; }));
  }
};

/// Ordinary least squares of omega0 on vx0. Flat responses report R^2 = 0.
inline BoundaryFit fit_boundary(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw InvalidInput("boundary fit needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    detail::require_finite(x, "vx0");
    detail::require_finite(y, "omega0");
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) throw InvalidInput("boundary fit needs distinct vx0 values");
  BoundaryFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (const auto& [x, y] : points) {
      const double e = y - (f.slope * x + f.intercept);
      ss_res += e * e;
    }
    f.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return f;
}

/// Success frontier: per vx0 column with mixed outcomes, the success with the
/// largest omega0 that has a 4-neighbour failure.
inline std::vector<std::size_t> select_boundary_neighbors(const PerformanceMap& map) {
  const std::size_t rows = map.omega_values.size();
  const std::size_t cols = map.vx_values.size();
  if (map.cases.size() != rows * cols) throw InvalidInput("map size does not match its grid");
  const auto ok = [&](std::size_t i, std::size_t j) { return map.cases[map.index(i, j)].success; };

  std::vector<std::size_t> picked;
  for (std::size_t j = 0; j < cols; ++j) {
    bool any_ok = false, any_bad = false;
    for (std::size_t i = 0; i < rows; ++i) (ok(i, j) ? any_ok : any_bad) = true;
    if (!any_ok || !any_bad) continue;
    for (std::size_t i = rows; i-- > 0;) {
      if (!ok(i, j)) continue;
      const bool near_failure = (i + 1 < rows && !ok(i + 1, j)) || (i > 0 && !ok(i - 1, j)) ||
                                (j + 1 < cols && !ok(i, j + 1)) || (j > 0 && !ok(i, j - 1));
      if (near_failure) {
        picked.push_back(map.index(i, j));
        break;
      }
    }
  }
  return picked;
}

/// Fits the boundary through the frontier when it has enough distinct points.
inline void attach_boundary(PerformanceMap& map) {
  map.neighbor_set = select_boundary_neighbors(map);
  map.boundary.reset();
  if (map.neighbor_set.size() < 3) return;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k : map.neighbor_set) {
    pts.emplace_back(map.cases[k].landing_case.vx0_nd, map.cases[k].landing_case.omega0_nd);
  }
  try {
    map.boundary = fit_boundary(pts);
  } catch (const InvalidInput&) {
  }
}

inline PerformanceMap run_map(const SweepSpec& spec, const StabilizerConfig& cfg,
                              const ModelParams& params, int worker_count) {
  PerformanceMap map;
  map.spec = spec;
  map.omega_values = spec.omega_values();
  map.vx_values = spec.vx_values();
  map.cases = run_sweep(build_grid(spec), cfg, params, worker_count);
  attach_boundary(map);
  return map;
}

/// Successes sitting directly above a failure in the same column. Reported,
/// not enforced: maps are only roughly monotone in omega0.
inline std::vector<std::size_t> monotonicity_flags(const PerformanceMap& map) {
  std::vector<std::size_t> flags;
  for (std::size_t j = 0; j < map.vx_values.size(); ++j) {
    bool failed_below = false;
    for (std::size_t i = 0; i < map.omega_values.size(); ++i) {
      const auto& c = map.cases[map.index(i, j)];
      if (!c.success) failed_below = true;
      else if (failed_below) flags.push_back(map.index(i, j));
    }
  }
  return flags;
}

struct GrfFactorEntry {
  std::size_t index = 0;
  double min_Ffz_nd = 0.0;
  double max_mu = 0.0;
};

inline std::vector<GrfFactorEntry> grf_factor_summary(const PerformanceMap& map) {
  std::vector<GrfFactorEntry> out;
  for (std::size_t k = 0; k < map.cases.size(); ++k) {
    const auto& c = map.cases[k];
    if (c.success) out.push_back({k, c.grf.min_Ffz_nd, c.grf.max_mu});
  }
  return out;
}

struct FactorLevel {
  double inertia_nd = 0.0;
  double vz0 = 0.0;
  double alpha0 = 0.0;
};

struct FactorRow {
  FactorLevel level;
  PerformanceMap map;
};

/// One map per (I, vz0, alpha0) combination, in nested list order. A level
/// with alpha0 changed re-derives the vx0 span unless the base fixes it.
inline std::vector<FactorRow> factor_study(const SweepSpec& base, const std::vector<double>& I_levels,
                                           const std::vector<double>& vz0_levels,
                                           const std::vector<double>& alpha0_levels,
                                           const StabilizerConfig& cfg,
                                           const ModelParams& params, int worker_count) {
  if (I_levels.empty() || vz0_levels.empty() || alpha0_levels.empty()) {
    throw InvalidInput("factor levels must be nonempty");
  }
  std::vector<FactorRow> rows;
  for (double I : I_levels) {
    for (double vz : vz0_levels) {
      for (double a : alpha0_levels) {
        SweepSpec s = base;
        s.inertia_nd = I;
        s.vz0 = vz;
        s.alpha0 = a;
        rows.push_back({{I, vz, a}, run_map(s, cfg, params, worker_count)});
      }
    }
  }
  return rows;
}

}  // namespace pipf

#endif  // PIPF_SWEEP_HPP

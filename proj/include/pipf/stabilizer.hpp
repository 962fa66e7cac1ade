#ifndef PIPF_STABILIZER_HPP
#define PIPF_STABILIZER_HPP

// First stance step: iterative pitch stabilization, the vertical
// stabilization feasibility check at T_1, then iterative vertical
// stabilization. Each phase chains small-horizon solves, seeding every
// iteration with the final knot of the previous one.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pipf/dynamics.hpp"
#include "pipf/errors.hpp"
#include "pipf/trajopt.hpp"

namespace pipf {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// One touchdown condition, non-dimensional apart from the attack angle (rad).
struct LandingCase {
  double omega0_nd = 3.0;
  double vx0_nd = 1.2;
  double vz0_nd = -0.3;
  double inertia_nd = 0.04;
  double alpha0 = deg_to_rad(60.0);
};

struct PhaseWeights {
  std::vector<double> k1_ladder;
  double k2 = 0.0;
  double k3 = 0.0;
};

struct StabilizerConfig {
  double eta = 0.2;
  int knots = 20;
  double alpha_min = deg_to_rad(10.0);
  double alpha_max = deg_to_rad(170.0);
  double eps_gamma = 0.05;
  double eps_gamma_dot = 0.05;
  double eps_z_dot = 0.02;
  double z_dot_des = 0.01;
  double gamma_des = 0.0;
  double gamma_dot_des = 0.0;
  PhaseWeights pitch{{1.0, 10.0, 100.0, 1000.0}, 1e4, 1e5};
  PhaseWeights vertical{{1e6, 1e7, 1e8}, 1e3, 1e3};
  ConstraintConfig constraints{};
  int max_iterations = 50;
  TrajoptSettings solver{};

  void validate() const {
    const double half_pi = std::numbers::pi / 2;
    if (!(0.0 < alpha_min && alpha_min < half_pi && half_pi < alpha_max &&
          alpha_max < std::numbers::pi)) {
      throw InvalidInput("attack-angle window must satisfy 0 < min < pi/2 < max < pi");
    }
    if (!(eps_gamma > 0.0 && eps_gamma_dot > 0.0 && eps_z_dot > 0.0)) {
      throw InvalidInput("stabilization thresholds must be positive");
    }
    if (!(eta > 0.0) || knots < 2 || max_iterations < 1) {
      throw InvalidInput("eta, knots and max_iterations must be positive");
    }
    if (pitch.k1_ladder.empty() || vertical.k1_ladder.empty()) {
      throw InvalidInput("k1 ladders must not be empty");
    }
    constraints.validate();
  }

  CostConfig pitch_cost(double k1) const {
    CostConfig c;
    c.k1 = k1;
    c.k2 = pitch.k2;
    c.k3 = pitch.k3;
    c.z_dot_des = z_dot_des;
    c.gamma_des = gamma_des;
    c.gamma_dot_des = gamma_dot_des;
    c.z_dot_discount = c.gamma_discount = c.gamma_dot_discount = {DiscountKind::ReversedPoisson, 1.0};
    return c;
  }

  CostConfig vertical_cost(double k1) const {
    CostConfig c = pitch_cost(k1);
    c.k2 = vertical.k2;
    c.k3 = vertical.k3;
    c.gamma_discount = c.gamma_dot_discount = {DiscountKind::Uniform, 1.0};
    return c;
  }
};

enum class Phase { PitchStab, VerticalStab };
enum class PhaseExit { Success, Failure, Exhausted };

enum class FailureReason {
  None,
  AlphaInfeasible,
  SolverInfeasible,
  SolverNotConverged,
  IterationsExhausted,
  VerticalInfeasible,
  InternalError,
};

inline const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::AlphaInfeasible: return "alpha_infeasible";
    case FailureReason::SolverInfeasible: return "solver_infeasible";
    case FailureReason::SolverNotConverged: return "solver_not_converged";
    case FailureReason::IterationsExhausted: return "iterations_exhausted";
    case FailureReason::VerticalInfeasible: return "vertical_infeasible";
    case FailureReason::InternalError: return "internal_error";
  }
  return "unknown";
}

inline const char* to_string(PhaseExit e) {
  switch (e) {
    case PhaseExit::Success: return "success";
    case PhaseExit::Failure: return "failure";
    case PhaseExit::Exhausted: return "exhausted";
  }
  return "unknown";
}

struct PhaseResult {
  Phase phase = Phase::PitchStab;
  /// Concatenated knots; iteration seams appear once.
  std::vector<PipfState> states;
  /// controls[i] acts on [states[i], states[i + 1]].
  std::vector<ControlInput> controls;
  PhaseExit exit = PhaseExit::Failure;
  FailureReason reason = FailureReason::None;
  double duration = 0.0;
  int iterations = 0;
  double k1 = 0.0;
};

struct FeasibilityReport {
  double T_lb = std::numeric_limits<double>::quiet_NaN();  ///< s
  double T_ub = std::numeric_limits<double>::quiet_NaN();  ///< s
  double alpha_ub_vs = 0.0;                                ///< rad
  double alpha_ddot_lb_vs = 0.0;                           ///< rad/s^2
  bool preconditions_met = false;
  bool feasible = false;

  double bound_ratio() const { return T_ub / T_lb; }
};

struct GrfDiagnostics {
  double min_Ffz_nd = std::numeric_limits<double>::quiet_NaN();
  double max_mu = std::numeric_limits<double>::quiet_NaN();
};

struct LandingOutcome {
  LandingCase landing_case;
  bool success = false;
  FailureReason reason = FailureReason::None;
  std::string diagnostic;
  PhaseResult pitch;
  std::optional<FeasibilityReport> feasibility;
  std::optional<PhaseResult> vertical;
  double T_vs_star = std::numeric_limits<double>::quiet_NaN();  ///< s
  PipfState terminal_state;
  GrfDiagnostics grf;
};

/// Body state at touchdown for a landing case: r = r0, the given attack angle,
/// pitch equal to the incidence angle, foot at the origin.
inline PipfState touchdown_state(const LandingCase& c, const ModelParams& params) {
  detail::require_finite(c.omega0_nd, "omega0");
  detail::require_finite(c.vx0_nd, "vx0");
  detail::require_finite(c.vz0_nd, "vz0");
  if (!(c.alpha0 > 0.0 && c.alpha0 < std::numbers::pi)) {
    throw InvalidInput("touchdown attack angle must lie in (0, pi)");
  }
  const double v_ref = std::sqrt(params.g() * params.r0());
  const double w_ref = std::sqrt(params.g() / params.r0());
  const double vx = c.vx0_nd * v_ref;
  const double vz = c.vz0_nd * v_ref;
  const double theta0 = std::atan2(-c.vz0_nd, c.vx0_nd);
  const double a = c.alpha0;
  // Invert the velocity rows of the Cartesian map: v = r_dot e_r + r alpha_dot e_alpha
  // with e_r = (-cos a, sin a) and e_alpha = (sin a, cos a), an orthonormal pair.
  const double r_dot = -vx * std::cos(a) + vz * std::sin(a);
  const double alpha_dot = (vx * std::sin(a) + vz * std::cos(a)) / params.r0();
  PipfState s;
  s.r = params.r0();
  s.gamma = theta0;
  s.beta = a - theta0;
  s.r_dot = r_dot;
  s.gamma_dot = c.omega0_nd * w_ref;
  s.beta_dot = alpha_dot - s.gamma_dot;
  s.t = 0.0;
  return s;
}

/// Per-iteration horizon during pitch stabilization: eta T_C / vx0.
inline HorizonSpec pitch_horizon(double vx0_nd, double eta, const ModelParams& params,
                                 int knots = 20, double t0 = 0.0) {
  if (!(vx0_nd > 0.0) || !std::isfinite(vx0_nd)) {
    throw InvalidInput("pitch horizon needs a positive horizontal speed");
  }
  detail::require_positive(eta, "eta");
  return {eta / vx0_nd * params.time_constant(), knots, t0};
}

/// Closed-form bounds on the vertical stabilization duration from the state
/// at the end of pitch stabilization.
inline FeasibilityReport vertical_feasibility(const PipfState& x1, const ModelParams& params,
                                              double F_max_nd) {
  detail::require_finite_state(x1);
  detail::require_positive(F_max_nd, "F_max_nd");
  const double half_pi = std::numbers::pi / 2;
  const double alpha1 = x1.alpha();
  if (!(alpha1 > half_pi)) {
    throw PreconditionError("vertical feasibility requires alpha_1 > pi/2");
  }
  const double tc = params.time_constant();
  const auto body = cartesian_body_state(x1);
  const double vx1 = nondimensionalize(body.x_dot, QuantityKind::LinearVelocity, params);
  const double vz1 = nondimensionalize(body.z_dot, QuantityKind::LinearVelocity, params);
  const double alpha_dot1 = x1.alpha_dot() * tc;
  const double r1 = x1.r / params.r0();

  FeasibilityReport rep;
  rep.preconditions_met = vx1 > 0.0 && vz1 < 0.0 && alpha_dot1 > 0.0;
  rep.alpha_ub_vs = half_pi + std::acos(std::min(1.0, 1.0 / F_max_nd));
  const double alpha_ddot_lb_nd = -std::cos(alpha1) / (1.0 + params.inertia_nd()) * r1;
  rep.alpha_ddot_lb_vs = alpha_ddot_lb_nd / (tc * tc);

  const double net = F_max_nd * std::sin(alpha1) - 1.0;
  if (net > 0.0) rep.T_lb = -vz1 / net * tc;
  const double disc =
      alpha_dot1 * alpha_dot1 + 2.0 * alpha_ddot_lb_nd * (rep.alpha_ub_vs - alpha1);
  if (disc >= 0.0 && alpha_ddot_lb_nd != 0.0) {
    rep.T_ub = (-alpha_dot1 + std::sqrt(disc)) / alpha_ddot_lb_nd * tc;
  }
  const bool ordered = rep.T_lb < rep.T_ub && rep.T_lb > 0.0 && rep.T_ub > 0.0;
  rep.feasible = rep.preconditions_met && ordered;
  return rep;
}

/// Per-iteration horizon during vertical stabilization: eta T_lb.
inline HorizonSpec vertical_horizon(const FeasibilityReport& report, double eta, int knots = 20,
                                    double t0 = 0.0) {
  if (!report.feasible) throw PreconditionError("vertical horizon needs a feasible report");
  detail::require_positive(eta, "eta");
  return {eta * report.T_lb, knots, t0};
}

namespace detail {

inline double vertical_velocity_nd(const PipfState& s, const ModelParams& params) {
  return nondimensionalize(cartesian_body_state(s).z_dot, QuantityKind::LinearVelocity, params);
}

inline bool pitch_stabilized(const PipfState& s, const StabilizerConfig& cfg,
                             const ModelParams& params) {
  const double gamma_dot = nondimensionalize(s.gamma_dot, QuantityKind::AngularVelocity, params);
  return std::abs(s.gamma - cfg.gamma_des) < cfg.eps_gamma &&
         std::abs(gamma_dot - cfg.gamma_dot_des) < cfg.eps_gamma_dot;
}

inline bool vertical_stabilized(const PipfState& s, const StabilizerConfig& cfg,
                                const ModelParams& params) {
  return std::abs(vertical_velocity_nd(s, params) - cfg.z_dot_des) < cfg.eps_z_dot;
}

/// Shared iteration loop. `done` is evaluated on the final knot of each
/// iteration; any knot with alpha outside (alpha_lo, alpha_hi) ends the phase
/// with failure.
template <typename DonePredicate, typename HorizonFor>
PhaseResult iterate_phase(Phase phase, const PipfState& x_start, const CostConfig& cost_cfg,
                          double k1, double alpha_lo, double alpha_hi,
                          const StabilizerConfig& cfg, const ModelParams& params,
                          HorizonFor&& horizon_for, DonePredicate&& done) {
  PhaseResult out;
  out.phase = phase;
  out.k1 = k1;
  out.states.push_back(x_start);
  const double t_start = x_start.t;

  PipfState x = x_start;
  std::optional<IterationResult> previous;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    out.iterations = it;
    const HorizonSpec horizon = horizon_for(x.t);
    IterationResult sol = solve_iteration(x, horizon, cost_cfg, cfg.constraints, params,
                                          previous ? &*previous : nullptr, cfg.solver);
    if (sol.status == SolveStatus::Infeasible) {
      out.exit = PhaseExit::Failure;
      out.reason = FailureReason::SolverInfeasible;
      break;
    }
    if (sol.status != SolveStatus::Converged) {
      out.exit = PhaseExit::Failure;
      out.reason = FailureReason::SolverNotConverged;
      break;
    }
    out.states.insert(out.states.end(), sol.states.begin() + 1, sol.states.end());
    out.controls.insert(out.controls.end(), sol.controls.begin(), sol.controls.end());

    bool alpha_left = false;
    for (std::size_t n = 1; n < sol.states.size(); ++n) {
      const double a = sol.states[n].alpha();
      if (!(a > alpha_lo && a < alpha_hi)) {
        alpha_left = true;
        break;
      }
    }
    if (alpha_left) {
      out.exit = PhaseExit::Failure;
      out.reason = FailureReason::AlphaInfeasible;
      break;
    }
    x = sol.states.back();
    if (done(x)) {
      out.exit = PhaseExit::Success;
      out.reason = FailureReason::None;
      break;
    }
    out.exit = PhaseExit::Exhausted;
    out.reason = FailureReason::IterationsExhausted;
    previous = std::move(sol);
  }
  out.duration = out.states.back().t - t_start;
  return out;
}

}  // namespace detail

/// Pitch stabilization from touchdown. Succeeds once pitch and pitch rate are
/// within thresholds with alpha >= pi/2, before alpha leaves its window.
inline PhaseResult pitch_stabilize(const PipfState& x0, const StabilizerConfig& cfg,
                                   const ModelParams& params, std::optional<double> k1 = {}) {
  cfg.validate();
  const double weight = k1.value_or(cfg.pitch.k1_ladder.front());
  const double vx0_nd = nondimensionalize(cartesian_body_state(x0).x_dot,
                                          QuantityKind::LinearVelocity, params);
  const HorizonSpec base = pitch_horizon(vx0_nd, cfg.eta, params, cfg.knots);
  const auto horizon_for = [&](double t) { return HorizonSpec{base.T_h, base.p, t}; };
  const auto done = [&](const PipfState& s) {
    return detail::pitch_stabilized(s, cfg, params) && s.alpha() >= std::numbers::pi / 2;
  };
  return detail::iterate_phase(Phase::PitchStab, x0, cfg.pitch_cost(weight), weight,
                               cfg.alpha_min, cfg.alpha_max, cfg, params, horizon_for, done);
}

/// Vertical stabilization from T_1. The attack-angle window is additionally
/// capped at the zero-net-vertical-force angle of the report. A state that
/// already meets the vertical threshold succeeds with zero iterations.
inline PhaseResult vertical_stabilize(const PipfState& x1, const FeasibilityReport& report,
                                      const StabilizerConfig& cfg, const ModelParams& params,
                                      std::optional<double> k1 = {}) {
  cfg.validate();
  const double weight = k1.value_or(cfg.vertical.k1_ladder.front());
  if (detail::vertical_stabilized(x1, cfg, params)) {
    // Nothing left to stop; no horizon is needed.
    PhaseResult out;
    out.phase = Phase::VerticalStab;
    out.k1 = weight;
    out.states = {x1};
    out.exit = PhaseExit::Success;
    return out;
  }
  const HorizonSpec base = vertical_horizon(report, cfg.eta, cfg.knots);
  const auto horizon_for = [&](double t) { return HorizonSpec{base.T_h, base.p, t}; };
  const auto done = [&](const PipfState& s) {
    return detail::vertical_stabilized(s, cfg, params);
  };
  const double alpha_hi = std::min(cfg.alpha_max, report.alpha_ub_vs);
  return detail::iterate_phase(Phase::VerticalStab, x1, cfg.vertical_cost(weight), weight,
                               cfg.alpha_min, alpha_hi, cfg, params, horizon_for, done);
}

/// Minimum normal force (in m g) and maximum required friction ratio over the
/// control samples of the given phases.
inline GrfDiagnostics grf_diagnostics(const std::vector<const PhaseResult*>& phases,
                                      const ModelParams& params) {
  GrfDiagnostics d;
  double min_fz = std::numeric_limits<double>::infinity();
  double max_mu = 0.0;
  bool any = false;
  for (const PhaseResult* ph : phases) {
    for (std::size_t i = 0; i < ph->controls.size(); ++i) {
      const auto grf = ground_reaction(ph->states[i], ph->controls[i], params);
      min_fz = std::min(min_fz, grf.F_fz / (params.m() * params.g()));
      max_mu = std::max(max_mu, grf.mu_req);
      any = true;
    }
  }
  if (any) {
    d.min_Ffz_nd = min_fz;
    d.max_mu = max_mu;
  }
  return d;
}

/// Full first-stance-step workflow for one landing case. Candidate k1 values
/// are tried in ascending order in each phase and the first success is kept.
/// When the pitch phase ends with the vertical motion already stopped, the
/// step succeeds without a vertical phase (T_vs_star = 0).
inline LandingOutcome first_stance_step(const LandingCase& c, const StabilizerConfig& cfg,
                                        const ModelParams& base_params) {
  cfg.validate();
  const ModelParams params = ModelParams::from_nondimensional_inertia(
      base_params.m(), base_params.g(), base_params.r0(), c.inertia_nd);
  const PipfState x0 = touchdown_state(c, params);

  LandingOutcome best;
  best.landing_case = c;
  best.terminal_state = x0;
  int best_depth = -1;
  const auto keep = [&](LandingOutcome&& o, int depth) {
    if (depth > best_depth) {
      best = std::move(o);
      best_depth = depth;
    }
  };

  std::vector<double> pitch_ladder = cfg.pitch.k1_ladder;
  std::sort(pitch_ladder.begin(), pitch_ladder.end());
  std::vector<double> vertical_ladder = cfg.vertical.k1_ladder;
  std::sort(vertical_ladder.begin(), vertical_ladder.end());

  for (double k1p : pitch_ladder) {
    LandingOutcome o;
    o.landing_case = c;
    o.pitch = pitch_stabilize(x0, cfg, params, k1p);
    o.terminal_state = o.pitch.states.back();
    if (o.pitch.exit != PhaseExit::Success) {
      o.reason = o.pitch.reason;
      keep(std::move(o), 0);
      continue;
    }
    const PipfState x1 = o.pitch.states.back();
    FeasibilityReport report;
    try {
      report = vertical_feasibility(x1, params, cfg.constraints.max_force_nd());
    } catch (const PreconditionError& e) {
      o.reason = FailureReason::VerticalInfeasible;
      o.diagnostic = e.what();
      keep(std::move(o), 1);
      continue;
    }
    o.feasibility = report;
    if (detail::vertical_stabilized(x1, cfg, params)) {
      // Pitch stabilization also stopped the vertical motion, so the
      // vertical phase has nothing to do. The report is informational.
      o.vertical = vertical_stabilize(x1, report, cfg, params);
      o.success = true;
      o.T_vs_star = 0.0;
      o.grf = grf_diagnostics({&o.pitch}, params);
      return o;
    }
    if (!report.feasible) {
      o.reason = FailureReason::VerticalInfeasible;
      keep(std::move(o), 1);
      continue;
    }
    for (double k1v : vertical_ladder) {
      LandingOutcome v = o;
      v.vertical = vertical_stabilize(x1, report, cfg, params, k1v);
      v.terminal_state = v.vertical->states.back();
      if (v.vertical->exit == PhaseExit::Success) {
        v.success = true;
        v.reason = FailureReason::None;
        v.T_vs_star = v.vertical->duration;
        v.grf = grf_diagnostics({&v.pitch, &*v.vertical}, params);
        return v;
      }
      v.reason = v.vertical->reason;
      keep(std::move(v), 2);
    }
  }
  return best;
}

}  // namespace pipf

#endif  // PIPF_STABILIZER_HPP

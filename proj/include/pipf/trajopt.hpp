#ifndef PIPF_TRAJOPT_HPP
#define PIPF_TRAJOPT_HPP

// Direct transcription of one small-horizon landing subproblem.
//
// Decision variables are the p controls and the p free knots (the first knot
// is the fixed initial state). Consecutive knots are tied by RK4 defect
// constraints under a zero-order-hold control. Everything inside the solver
// is non-dimensional: lengths in r0, forces in m g, time in T_C.

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "pipf/al_solver.hpp"
#include "pipf/dynamics.hpp"
#include "pipf/errors.hpp"

namespace pipf {

enum class DiscountKind { Uniform, ReversedPoisson };

struct Discount {
  DiscountKind kind = DiscountKind::ReversedPoisson;
  double lambda = 1.0;
};

/// Per-step attention weights xi_1..xi_p.
///
/// Uniform gives 1/p everywhere. ReversedPoisson gives
/// xi_n = e^-lambda lambda^(p-n) / (p-n)!, largest at the final steps.
inline std::vector<double> discount_sequence(DiscountKind kind, int p, double lambda = 1.0) {
  if (p < 1) throw InvalidInput("discount sequence needs at least one step");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be positive");
  std::vector<double> xi(static_cast<std::size_t>(p));
  if (kind == DiscountKind::Uniform) {
    // last weight absorbs rounding so a left-to-right sum is exactly 1
    std::fill(xi.begin(), xi.end() - 1, 1.0 / p);
    double head = 0.0;
    for (auto it = xi.begin(); it != xi.end() - 1; ++it) head += *it;
    xi.back() = 1.0 - head;
    return xi;
  }
  // pmf(k) computed in log space; k = p - n
  for (int n = 1; n <= p; ++n) {
    const int k = p - n;
    xi[static_cast<std::size_t>(n - 1)] =
        std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0));
  }
  return xi;
}

inline std::vector<double> discount_sequence(const Discount& d, int p) {
  return discount_sequence(d.kind, p, d.lambda);
}

struct HorizonSpec {
  double T_h = 0.0;  ///< s
  int p = 20;
  double t0 = 0.0;  ///< s

  double T_s() const { return T_h / p; }

  void validate() const {
    if (!(T_h > 0.0) || !std::isfinite(T_h)) throw InvalidInput("horizon length must be positive");
    if (p < 2) throw InvalidInput("horizon needs at least two steps");
    detail::require_finite(t0, "t0");
  }
};

/// Weights and targets of the discounted tracking cost on (z_dot, gamma,
/// gamma_dot), all non-dimensional.
struct CostConfig {
  double k1 = 1.0;
  double k2 = 1e4;
  double k3 = 1e5;
  double z_dot_des = 0.01;
  double gamma_des = 0.0;
  double gamma_dot_des = 0.0;
  Discount z_dot_discount{};
  Discount gamma_discount{};
  Discount gamma_dot_discount{};

  void validate() const {
    if (!(k1 > 0.0 && k2 > 0.0 && k3 > 0.0)) throw InvalidInput("cost weights must be positive");
    detail::require_finite(z_dot_des, "z_dot_des");
    detail::require_finite(gamma_des, "gamma_des");
    detail::require_finite(gamma_dot_des, "gamma_dot_des");
  }
};

/// Box limits on [r, beta, gamma] and [F, tau], non-dimensional.
struct ConstraintConfig {
  Eigen::Vector3d Q_min{0.4, 0.0, -std::numbers::pi / 2};
  Eigen::Vector3d Q_max{1.0, std::numbers::pi, std::numbers::pi / 2};
  Eigen::Vector2d U_min{0.0, -1.0};
  Eigen::Vector2d U_max{2.0, 1.0};

  void validate() const {
    if (!Q_min.allFinite() || !Q_max.allFinite() || !U_min.allFinite() || !U_max.allFinite()) {
      throw InvalidInput("bounds must be finite");
    }
    if ((Q_min.array() > Q_max.array()).any() || (U_min.array() > U_max.array()).any()) {
      throw InvalidInput("lower bounds must not exceed upper bounds");
    }
  }

  double max_force_nd() const { return U_max[0]; }
};

enum class SolveStatus { Converged, MaxIterations, Infeasible };

struct IterationResult {
  std::vector<PipfState> states;        ///< p + 1 knots, dimensional
  std::vector<ControlInput> controls;   ///< p controls, dimensional
  double objective = 0.0;               ///< J = J_L + J_M
  SolveStatus status = SolveStatus::Infeasible;
  int solver_iterations = 0;            ///< outer augmented-Lagrangian iterations
  int inner_iterations = 0;
  double max_defect = 0.0;              ///< non-dimensional state units
  double optimality = 0.0;
  // Solver state kept for warm starts.
  Eigen::VectorXd multipliers;
  double penalty = 0.0;
};

namespace detail {

inline Eigen::Matrix<double, 6, 1> nd_vector(const PipfState& s, const ModelParams& p) {
  return nondimensionalize(s, p).vector();
}

struct TrackedWeights {
  std::vector<double> z_dot;
  std::vector<double> gamma;
  std::vector<double> gamma_dot;
};

inline TrackedWeights tracked_weights(const CostConfig& cfg, int p) {
  TrackedWeights w{discount_sequence(cfg.z_dot_discount, p),
                   discount_sequence(cfg.gamma_discount, p),
                   discount_sequence(cfg.gamma_dot_discount, p)};
  for (auto& v : w.z_dot) v *= cfg.k1;
  for (auto& v : w.gamma) v *= cfg.k2;
  for (auto& v : w.gamma_dot) v *= cfg.k3;
  return w;
}

}  // namespace detail

/// Discounted tracking cost J = J_L + J_M over knots 1..p of a trajectory
/// with p + 1 knots. Deviations are taken on non-dimensional Cartesian
/// vertical velocity, pitch and pitch rate.
inline double cost(const std::vector<PipfState>& states, const CostConfig& cfg, int p,
                   const ModelParams& params) {
  cfg.validate();
  if (p < 1 || states.size() != static_cast<std::size_t>(p) + 1) {
    throw InvalidInput("cost expects p + 1 states");
  }
  const auto w = detail::tracked_weights(cfg, p);
  double lagrange = 0.0;
  double mayer = 0.0;
  for (int n = 1; n <= p; ++n) {
    const auto x = detail::nd_vector(states[static_cast<std::size_t>(n)], params);
    const std::size_t i = static_cast<std::size_t>(n - 1);
    const double dz = cfg.z_dot_des - body_vertical_velocity<double>(x);
    const double dg = cfg.gamma_des - x[2];
    const double dgd = cfg.gamma_dot_des - x[5];
    const double term = w.z_dot[i] * dz * dz + w.gamma[i] * dg * dg + w.gamma_dot[i] * dgd * dgd;
    (n < p ? lagrange : mayer) += term;
  }
  return lagrange + mayer;
}

/// The transcribed subproblem in non-dimensional units. Variables are laid
/// out stage by stage as [u_0, x_1, u_1, x_2, ..., u_{p-1}, x_p].
class LandingTranscription {
 public:
  static constexpr int kStateDim = 6;
  static constexpr int kControlDim = 2;
  static constexpr int kStageDim = kStateDim + kControlDim;
  static constexpr int kTracked = 3;

  LandingTranscription(const Eigen::Matrix<double, 6, 1>& x0_nd, int p, double dt_nd,
                       double inertia_nd, const CostConfig& cost_cfg,
                       const ConstraintConfig& con_cfg)
      : x0_(x0_nd),
        p_(p),
        dt_(dt_nd),
        params_(ModelParams::unit(inertia_nd)),
        cfg_(cost_cfg) {
    const auto w = detail::tracked_weights(cost_cfg, p);
    // The solver sees J / max(k); the minimizer is unchanged.
    scale_ = 1.0 / std::max({cost_cfg.k1, cost_cfg.k2, cost_cfg.k3});
    sqrt_w_.resize(static_cast<std::size_t>(p));
    for (int n = 0; n < p; ++n) {
      const auto i = static_cast<std::size_t>(n);
      sqrt_w_[i] = {std::sqrt(scale_ * w.z_dot[i]), std::sqrt(scale_ * w.gamma[i]),
                    std::sqrt(scale_ * w.gamma_dot[i])};
    }
    const double inf = std::numeric_limits<double>::infinity();
    lo_.resize(num_variables());
    hi_.resize(num_variables());
    for (int n = 0; n < p; ++n) {
      const int o = kStageDim * n;
      lo_.segment<2>(o) = con_cfg.U_min;
      hi_.segment<2>(o) = con_cfg.U_max;
      lo_.segment<3>(o + 2) = con_cfg.Q_min;
      hi_.segment<3>(o + 2) = con_cfg.Q_max;
      lo_.segment<3>(o + 5).setConstant(-inf);
      hi_.segment<3>(o + 5).setConstant(inf);
    }
  }

  int num_variables() const { return kStageDim * p_; }
  int num_residuals() const { return kTracked * p_; }
  int num_constraints() const { return kStateDim * p_; }
  const Eigen::VectorXd& lower_bounds() const { return lo_; }
  const Eigen::VectorXd& upper_bounds() const { return hi_; }
  double objective_scale() const { return scale_; }
  int steps() const { return p_; }
  double step_length() const { return dt_; }
  const ModelParams& unit_params() const { return params_; }

  static int control_offset(int n) { return kStageDim * n; }
  /// Offset of knot n (1..p).
  static int state_offset(int n) { return kStageDim * (n - 1) + kControlDim; }

  Eigen::Matrix<double, 6, 1> knot(const Eigen::VectorXd& z, int n) const {
    if (n == 0) return x0_;
    return z.segment<6>(state_offset(n));
  }

  void evaluate(const Eigen::VectorXd& z, Eigen::VectorXd& res, Eigen::VectorXd& con,
                std::vector<Eigen::Triplet<double>>* jres,
                std::vector<Eigen::Triplet<double>>* jcon) const {
    using std::cos;
    using std::sin;
    res.resize(num_residuals());
    con.resize(num_constraints());
    if (jres) jres->reserve(jres->size() + static_cast<std::size_t>(p_) * 8);
    if (jcon) jcon->reserve(jcon->size() + static_cast<std::size_t>(p_) * 6 * 15);

    for (int n = 1; n <= p_; ++n) {
      const auto& w = sqrt_w_[static_cast<std::size_t>(n - 1)];
      const Eigen::Matrix<double, 6, 1> x = z.segment<6>(state_offset(n));
      const int row = kTracked * (n - 1);
      const int col = state_offset(n);
      res[row] = w[0] * (body_vertical_velocity<double>(x) - cfg_.z_dot_des);
      res[row + 1] = w[1] * (x[2] - cfg_.gamma_des);
      res[row + 2] = w[2] * (x[5] - cfg_.gamma_dot_des);
      if (jres) {
        const double a = x[1] + x[2];
        const double ad = x[4] + x[5];
        const double ca = cos(a);
        const double sa = sin(a);
        const double d_angle = x[3] * ca - x[0] * ad * sa;
        const double d_rate = x[0] * ca;
        jres->emplace_back(row, col + 0, w[0] * ad * ca);
        jres->emplace_back(row, col + 1, w[0] * d_angle);
        jres->emplace_back(row, col + 2, w[0] * d_angle);
        jres->emplace_back(row, col + 3, w[0] * sa);
        jres->emplace_back(row, col + 4, w[0] * d_rate);
        jres->emplace_back(row, col + 5, w[0] * d_rate);
        jres->emplace_back(row + 1, col + 2, w[1]);
        jres->emplace_back(row + 2, col + 5, w[2]);
      }
    }

    using Derivatives = Eigen::Matrix<double, kStageDim, 1>;
    using Dual = Eigen::AutoDiffScalar<Derivatives>;
    for (int n = 0; n < p_; ++n) {
      const Eigen::Matrix<double, 6, 1> x = knot(z, n);
      const int uo = control_offset(n);
      const int row = kStateDim * n;
      const Eigen::Matrix<double, 6, 1> next = z.segment<6>(state_offset(n + 1));
      if (!jcon) {
        const auto pred = rk4_step<double>(x, z[uo], z[uo + 1], dt_, params_);
        con.segment<6>(row) = next - pred;
        continue;
      }
      StateVector<Dual> xd;
      for (int i = 0; i < 6; ++i) xd[i] = Dual(x[i], kStageDim, i);
      const Dual force(z[uo], kStageDim, 6);
      const Dual torque(z[uo + 1], kStageDim, 7);
      const StateVector<Dual> pred = rk4_step<Dual>(xd, force, torque, dt_, params_);
      for (int i = 0; i < 6; ++i) {
        con[row + i] = next[i] - pred[i].value();
        const Derivatives& d = pred[i].derivatives();
        if (n > 0) {
          const int xo = state_offset(n);
          for (int j = 0; j < 6; ++j) {
            if (d[j] != 0.0) jcon->emplace_back(row + i, xo + j, -d[j]);
          }
        }
        jcon->emplace_back(row + i, uo, -d[6]);
        jcon->emplace_back(row + i, uo + 1, -d[7]);
        jcon->emplace_back(row + i, state_offset(n + 1) + i, 1.0);
      }
    }
  }

  /// Packs knots 1..p and controls 0..p-1 into a decision vector.
  Eigen::VectorXd pack(const std::vector<Eigen::Matrix<double, 6, 1>>& knots,
                       const std::vector<Eigen::Vector2d>& controls) const {
    Eigen::VectorXd z(num_variables());
    for (int n = 0; n < p_; ++n) {
      z.segment<2>(control_offset(n)) = controls[static_cast<std::size_t>(n)];
      z.segment<6>(state_offset(n + 1)) = knots[static_cast<std::size_t>(n + 1)];
    }
    return z;
  }

  /// Forward simulation of the given controls from x0, knots clamped to the
  /// configuration bounds.
  Eigen::VectorXd rollout(const std::vector<Eigen::Vector2d>& controls) const {
    std::vector<Eigen::Matrix<double, 6, 1>> knots{x0_};
    for (int n = 0; n < p_; ++n) {
      const auto& u = controls[static_cast<std::size_t>(n)];
      Eigen::Matrix<double, 6, 1> next = rk4_step<double>(knots.back(), u[0], u[1], dt_, params_);
      if (!next.allFinite()) next = knots.back();
      const int o = state_offset(n + 1);
      next = next.cwiseMax(lo_.segment<6>(o)).cwiseMin(hi_.segment<6>(o));
      knots.push_back(next);
    }
    return pack(knots, controls);
  }

 private:
  Eigen::Matrix<double, 6, 1> x0_;
  int p_;
  double dt_;
  ModelParams params_;
  CostConfig cfg_;
  double scale_ = 1.0;
  std::vector<std::array<double, 3>> sqrt_w_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
};

/// Non-dimensional controls that keep the leg length at rest for the given
/// state: F = sin(alpha) - r alpha_dot^2, tau = 0.
inline Eigen::Vector2d hover_control_nd(const Eigen::Matrix<double, 6, 1>& x_nd,
                                        const ConstraintConfig& con) {
  const double alpha = x_nd[1] + x_nd[2];
  const double alpha_dot = x_nd[4] + x_nd[5];
  Eigen::Vector2d u{std::sin(alpha) - x_nd[0] * alpha_dot * alpha_dot, 0.0};
  return u.cwiseMax(con.U_min).cwiseMin(con.U_max);
}

/// How the first iterate is built when no warm start is supplied.
enum class InitialGuess {
  /// Every knot equal to the initial state, hover controls.
  StateHold,
  /// Hover controls simulated forward from the initial state.
  HoverRollout,
};

struct TrajoptSettings {
  AlSettings solver{};
  InitialGuess initial_guess = InitialGuess::HoverRollout;
  double bound_tolerance = 1e-9;
};

namespace detail {

inline bool within_configuration_bounds(const Eigen::Matrix<double, 6, 1>& x,
                                        const ConstraintConfig& con, double tol) {
  for (int i = 0; i < 3; ++i) {
    if (x[i] < con.Q_min[i] - tol || x[i] > con.Q_max[i] + tol) return false;
  }
  return true;
}

inline bool same_state(const PipfState& a, const PipfState& b) {
  return a.r == b.r && a.beta == b.beta && a.gamma == b.gamma && a.r_dot == b.r_dot &&
         a.beta_dot == b.beta_dot && a.gamma_dot == b.gamma_dot;
}

}  // namespace detail

/// Solves one horizon of the landing problem from x0.
///
/// A warm start whose first knot is x0 and whose length matches the horizon
/// resumes from its primal and dual state. Any other warm start contributes
/// only its controls, which are re-simulated from x0.
inline IterationResult solve_iteration(const PipfState& x0, const HorizonSpec& horizon,
                                       const CostConfig& cost_cfg,
                                       const ConstraintConfig& con_cfg,
                                       const ModelParams& params,
                                       const IterationResult* warm_start = nullptr,
                                       const TrajoptSettings& settings = {}) {
  horizon.validate();
  cost_cfg.validate();
  con_cfg.validate();
  detail::require_finite_state(x0);

  const int p = horizon.p;
  const double tc = params.time_constant();
  const Eigen::Matrix<double, 6, 1> x0_nd = detail::nd_vector(x0, params);

  IterationResult out;
  if (!(x0.r > 0.0) ||
      !detail::within_configuration_bounds(x0_nd, con_cfg, settings.bound_tolerance)) {
    out.status = SolveStatus::Infeasible;
    out.states = {x0};
    return out;
  }

  LandingTranscription problem(x0_nd, p, horizon.T_s() / tc, params.inertia_nd(), cost_cfg,
                               con_cfg);

  AlStart start;
  const bool resumable = warm_start != nullptr && !warm_start->states.empty() &&
                         warm_start->controls.size() == static_cast<std::size_t>(p) &&
                         warm_start->states.size() == static_cast<std::size_t>(p) + 1;
  if (resumable && detail::same_state(warm_start->states.front(), x0)) {
    std::vector<Eigen::Matrix<double, 6, 1>> knots;
    std::vector<Eigen::Vector2d> controls;
    for (const auto& s : warm_start->states) knots.push_back(detail::nd_vector(s, params));
    for (const auto& u : warm_start->controls) {
      const auto nd = nondimensionalize(u, params);
      controls.emplace_back(nd.F, nd.tau);
    }
    start.z = problem.pack(knots, controls);
    start.multipliers = warm_start->multipliers;
    start.penalty = warm_start->penalty;
  } else if (resumable) {
    std::vector<Eigen::Vector2d> controls;
    for (const auto& u : warm_start->controls) {
      const auto nd = nondimensionalize(u, params);
      controls.emplace_back(nd.F, nd.tau);
    }
    start.z = problem.rollout(controls);
  } else {
    const Eigen::Vector2d hover = hover_control_nd(x0_nd, con_cfg);
    const std::vector<Eigen::Vector2d> controls(static_cast<std::size_t>(p), hover);
    if (settings.initial_guess == InitialGuess::HoverRollout) {
      start.z = problem.rollout(controls);
    } else {
      const std::vector<Eigen::Matrix<double, 6, 1>> knots(static_cast<std::size_t>(p) + 1, x0_nd);
      start.z = problem.pack(knots, controls);
    }
  }

  const AugmentedLagrangianSolver<LandingTranscription> solver(problem, settings.solver);
  const AlResult sol = solver.solve(start);

  switch (sol.status) {
    case AlStatus::Converged: out.status = SolveStatus::Converged; break;
    case AlStatus::Stalled: out.status = SolveStatus::Infeasible; break;
    case AlStatus::MaxIterations: out.status = SolveStatus::MaxIterations; break;
  }
  out.solver_iterations = sol.outer_iterations;
  out.inner_iterations = sol.inner_iterations;
  out.max_defect = sol.constraint_violation;
  out.optimality = sol.optimality;
  out.multipliers = sol.multipliers;
  out.penalty = sol.penalty;

  out.states.reserve(static_cast<std::size_t>(p) + 1);
  out.states.push_back(x0);
  for (int n = 1; n <= p; ++n) {
    PipfState s = PipfState::from_vector(problem.knot(sol.z, n), 0.0);
    s = dimensionalize(s, params);
    s.t = horizon.t0 + n * horizon.T_s();
    out.states.push_back(s);
  }
  for (int n = 0; n < p; ++n) {
    const int o = LandingTranscription::control_offset(n);
    out.controls.push_back(dimensionalize(ControlInput{sol.z[o], sol.z[o + 1]}, params));
  }
  out.objective = cost(out.states, cost_cfg, p, params);
  return out;
}

}  // namespace pipf

#endif  // PIPF_TRAJOPT_HPP

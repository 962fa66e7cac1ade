#ifndef PIPF_DYNAMICS_HPP
#define PIPF_DYNAMICS_HPP

// Planar inverted pendulum with flywheel: a massless prismatic leg pinned at
// a point foot, hip torque acting between leg and an inertial body.
//
// Generalized coordinates q = [r, beta, gamma], attack angle alpha = beta + gamma.
// The foot is at the origin during stance; the body center sits at
// (x_f - r cos(alpha), z_f + r sin(alpha)).

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "pipf/errors.hpp"

namespace pipf {

/// Physical constants of the template. T_C and the non-dimensional inertia
/// are derived on construction.
class ModelParams {
 public:
  ModelParams(double mass, double inertia, double gravity, double leg_length)
      : m_(mass), I_(inertia), g_(gravity), r0_(leg_length) {
    detail::require_positive(mass, "mass");
    detail::require_positive(inertia, "inertia");
    detail::require_positive(gravity, "gravity");
    detail::require_positive(leg_length, "leg_length");
  }

  /// Parameters for which every non-dimensional quantity equals its
  /// dimensional value (m = g = r0 = 1).
  static ModelParams unit(double inertia_nd) { return {1.0, inertia_nd, 1.0, 1.0}; }

  /// Builds parameters from (m, g, r0) and a non-dimensional inertia.
  static ModelParams from_nondimensional_inertia(double mass, double gravity, double leg_length,
                                                 double inertia_nd) {
    detail::require_positive(inertia_nd, "inertia_nd");
    return {mass, inertia_nd * mass * leg_length * leg_length, gravity, leg_length};
  }

  double m() const { return m_; }
  double I() const { return I_; }
  double g() const { return g_; }
  double r0() const { return r0_; }
  /// sqrt(r0 / g)
  double time_constant() const { return std::sqrt(r0_ / g_); }
  /// I / (m r0^2)
  double inertia_nd() const { return I_ / (m_ * r0_ * r0_); }

 private:
  double m_;
  double I_;
  double g_;
  double r0_;
};

struct PipfState {
  double r = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
  double r_dot = 0.0;
  double beta_dot = 0.0;
  double gamma_dot = 0.0;
  double t = 0.0;

  double alpha() const { return beta + gamma; }
  double alpha_dot() const { return beta_dot + gamma_dot; }

  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << r, beta, gamma, r_dot, beta_dot, gamma_dot;
    return v;
  }

  static PipfState from_vector(const Eigen::Matrix<double, 6, 1>& v, double time) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], time};
  }
};

struct ControlInput {
  double F = 0.0;
  double tau = 0.0;
};

struct FootState {
  double x_f = 0.0;
  double z_f = 0.0;
  double x_f_dot = 0.0;
  double z_f_dot = 0.0;
};

struct CartesianBodyState {
  double x = 0.0;
  double z = 0.0;
  double x_dot = 0.0;
  double z_dot = 0.0;

  double speed() const { return std::hypot(x_dot, z_dot); }
  /// Tilting-down angle of the velocity; positive while descending.
  double tilt_down_angle() const { return std::atan2(-z_dot, x_dot); }
};

struct GroundReaction {
  double F_fx = 0.0;
  double F_fz = 0.0;
  double mu_req = 0.0;
};

struct EomTerms {
  Eigen::Matrix3d mass;
  Eigen::Vector3d coriolis;
  Eigen::Vector3d gravity;
};

template <typename Scalar>
using StateVector = Eigen::Matrix<Scalar, 6, 1>;

namespace detail {

inline void require_finite_state(const PipfState& s) {
  require_finite(s.r, "r");
  require_finite(s.beta, "beta");
  require_finite(s.gamma, "gamma");
  require_finite(s.r_dot, "r_dot");
  require_finite(s.beta_dot, "beta_dot");
  require_finite(s.gamma_dot, "gamma_dot");
  require_finite(s.t, "t");
}

inline void require_finite_control(const ControlInput& u) {
  require_finite(u.F, "F");
  require_finite(u.tau, "tau");
}

}  // namespace detail

/// State derivative [q_dot, M^-1 (F(U) - b - g)] for any scalar type that
/// supports the usual arithmetic and sin/cos through ADL.
///
/// M is upper triangular, so the solve is a back substitution:
///   I gamma_dd                    = -tau
///   m r^2 (beta_dd + gamma_dd)    = tau - 2 m r r_dot alpha_dot - g m r cos(alpha)
///   m r_dd                        = F + m r alpha_dot^2 - g m sin(alpha)
template <typename Scalar>
StateVector<Scalar> state_derivative(const StateVector<Scalar>& x, const Scalar& force,
                                     const Scalar& torque, const ModelParams& p) {
  using std::cos;
  using std::sin;
  const Scalar& r = x[0];
  const Scalar alpha = x[1] + x[2];
  const Scalar alpha_dot = x[4] + x[5];
  const double m = p.m();
  const double g = p.g();

  const Scalar gamma_dd = -torque / p.I();
  const Scalar alpha_dd =
      (torque - 2.0 * m * r * x[3] * alpha_dot - g * m * r * cos(alpha)) / (m * r * r);
  const Scalar r_dd = (force + m * r * alpha_dot * alpha_dot - g * m * sin(alpha)) / m;

  StateVector<Scalar> dx;
  dx[0] = x[3];
  dx[1] = x[4];
  dx[2] = x[5];
  dx[3] = r_dd;
  dx[4] = alpha_dd - gamma_dd;
  dx[5] = gamma_dd;
  return dx;
}

/// One classical Runge-Kutta step with the control held constant.
template <typename Scalar>
StateVector<Scalar> rk4_step(const StateVector<Scalar>& x, const Scalar& force,
                             const Scalar& torque, double dt, const ModelParams& p) {
  const StateVector<Scalar> k1 = state_derivative<Scalar>(x, force, torque, p);
  const StateVector<Scalar> k2 =
      state_derivative<Scalar>(StateVector<Scalar>(x + (0.5 * dt) * k1), force, torque, p);
  const StateVector<Scalar> k3 =
      state_derivative<Scalar>(StateVector<Scalar>(x + (0.5 * dt) * k2), force, torque, p);
  const StateVector<Scalar> k4 =
      state_derivative<Scalar>(StateVector<Scalar>(x + dt * k3), force, torque, p);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Vertical body velocity with the foot pinned at rest.
template <typename Scalar>
Scalar body_vertical_velocity(const StateVector<Scalar>& x) {
  using std::cos;
  using std::sin;
  const Scalar alpha = x[1] + x[2];
  const Scalar alpha_dot = x[4] + x[5];
  return x[3] * sin(alpha) + x[0] * alpha_dot * cos(alpha);
}

/// Mass matrix, Coriolis-centrifugal and gravity vectors exactly as they
/// appear in M q_dd + b + g = F(U). M is kept in its upper-triangular form.
inline EomTerms eom_terms(const PipfState& s, const ModelParams& p) {
  detail::require_finite_state(s);
  if (!(s.r > 0.0)) {
    throw InvalidInput("eom_terms requires r > 0");
  }
  const double m = p.m();
  const double r = s.r;
  const double alpha_dot = s.alpha_dot();
  EomTerms terms;
  terms.mass << m, 0.0, 0.0,
                0.0, m * r * r, m * r * r,
                0.0, 0.0, p.I();
  terms.coriolis << -m * r * alpha_dot * alpha_dot,
                    2.0 * m * r * s.r_dot * alpha_dot,
                    0.0;
  terms.gravity << p.g() * m * std::sin(s.beta + s.gamma),
                   p.g() * (m * std::cos(s.beta) * std::cos(s.gamma) * r -
                            m * std::sin(s.beta) * std::sin(s.gamma) * r),
                   0.0;
  return terms;
}

/// Generalized force vector [F, tau, -tau].
inline Eigen::Vector3d generalized_force(const ControlInput& u) { return {u.F, u.tau, -u.tau}; }

inline Eigen::Matrix<double, 6, 1> forward_dynamics(const PipfState& s, const ControlInput& u,
                                                    const ModelParams& p) {
  detail::require_finite_state(s);
  detail::require_finite_control(u);
  if (!(s.r > 0.0)) {
    throw SingularityError("mass matrix is singular for r <= 0");
  }
  return state_derivative<double>(s.vector(), u.F, u.tau, p);
}

/// Body-center Cartesian state from the leg configuration and the foot state.
inline CartesianBodyState cartesian_body_state(const PipfState& s, const FootState& foot = {}) {
  const double a = s.alpha();
  const double ad = s.alpha_dot();
  const double ca = std::cos(a);
  const double sa = std::sin(a);
  return {foot.x_f - s.r * ca,
          foot.z_f + s.r * sa,
          foot.x_f_dot - (s.r_dot * ca - s.r * ad * sa),
          foot.z_f_dot + (s.r_dot * sa + s.r * ad * ca)};
}

/// Body-center Cartesian acceleration during stance (foot pinned).
inline Eigen::Vector2d body_acceleration(const PipfState& s, const ControlInput& u,
                                         const ModelParams& p) {
  const auto dx = forward_dynamics(s, u, p);
  const double r_dd = dx[3];
  const double alpha_dd = dx[4] + dx[5];
  const double a = s.alpha();
  const double ad = s.alpha_dot();
  const double ca = std::cos(a);
  const double sa = std::sin(a);
  const double x_dd = -(r_dd * ca - 2.0 * s.r_dot * ad * sa - s.r * alpha_dd * sa -
                        s.r * ad * ad * ca);
  const double z_dd =
      r_dd * sa + 2.0 * s.r_dot * ad * ca + s.r * alpha_dd * ca - s.r * ad * ad * sa;
  return {x_dd, z_dd};
}

/// Ground reaction at the pinned foot. With a massless leg the foot force is
/// the body's m * a plus its weight.
inline GroundReaction ground_reaction(const PipfState& s, const ControlInput& u,
                                      const ModelParams& p) {
  const Eigen::Vector2d acc = body_acceleration(s, u, p);
  GroundReaction grf;
  grf.F_fx = p.m() * acc[0];
  grf.F_fz = p.m() * (acc[1] + p.g());
  grf.mu_req = grf.F_fz != 0.0 ? std::abs(grf.F_fx / grf.F_fz)
                               : std::numeric_limits<double>::infinity();
  return grf;
}

struct StepResult {
  PipfState state;
  /// Leg length left (0, r0] at some stage of the step.
  bool leg_out_of_range = false;
};

/// Fixed-step RK4 with zero-order-hold control. Leaving the leg range is
/// reported, never clipped.
inline StepResult integrate_step(const PipfState& s, const ControlInput& u, double dt,
                                 const ModelParams& p) {
  detail::require_finite_state(s);
  detail::require_finite_control(u);
  detail::require_positive(dt, "dt");
  if (!(s.r > 0.0)) {
    throw SingularityError("mass matrix is singular for r <= 0");
  }
  const StateVector<double> x = s.vector();
  const auto in_range = [&](double r) { return r > 0.0 && r <= p.r0() * (1.0 + 1e-12); };

  const StateVector<double> k1 = state_derivative<double>(x, u.F, u.tau, p);
  const StateVector<double> x2 = x + (0.5 * dt) * k1;
  const StateVector<double> k2 = state_derivative<double>(x2, u.F, u.tau, p);
  const StateVector<double> x3 = x + (0.5 * dt) * k2;
  const StateVector<double> k3 = state_derivative<double>(x3, u.F, u.tau, p);
  const StateVector<double> x4 = x + dt * k3;
  const StateVector<double> k4 = state_derivative<double>(x4, u.F, u.tau, p);
  const StateVector<double> next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  StepResult out;
  out.state = PipfState::from_vector(next, s.t + dt);
  out.leg_out_of_range = !(in_range(x2[0]) && in_range(x3[0]) && in_range(x4[0]) &&
                           in_range(next[0]));
  if (!std::isfinite(next.sum())) {
    throw SingularityError("integration produced a non-finite state");
  }
  return out;
}

/// Mechanical energy 1/2 m v^2 + 1/2 I gamma_dot^2 + m g z with the foot at rest.
inline double mechanical_energy(const PipfState& s, const ModelParams& p,
                                const FootState& foot = {}) {
  const auto c = cartesian_body_state(s, foot);
  return 0.5 * p.m() * (c.x_dot * c.x_dot + c.z_dot * c.z_dot) +
         0.5 * p.I() * s.gamma_dot * s.gamma_dot + p.m() * p.g() * c.z;
}

// ---------------------------------------------------------------------------
// Non-dimensional scaling

enum class QuantityKind {
  Length,
  LinearVelocity,
  AngularVelocity,
  Force,
  Torque,
  Inertia,
  Angle,
  Time,
};

inline QuantityKind quantity_kind_from_string(std::string_view name) {
  if (name == "length") return QuantityKind::Length;
  if (name == "linear_velocity") return QuantityKind::LinearVelocity;
  if (name == "angular_velocity") return QuantityKind::AngularVelocity;
  if (name == "force") return QuantityKind::Force;
  if (name == "torque") return QuantityKind::Torque;
  if (name == "inertia") return QuantityKind::Inertia;
  if (name == "angle") return QuantityKind::Angle;
  if (name == "time") return QuantityKind::Time;
  throw InvalidInput("unknown quantity kind '" + std::string(name) + "'");
}

/// Reference scale so that nondimensional = dimensional / scale.
inline double reference_scale(QuantityKind kind, const ModelParams& p) {
  switch (kind) {
    case QuantityKind::Length:
      return p.r0();
    case QuantityKind::LinearVelocity:
      return std::sqrt(p.g() * p.r0());
    case QuantityKind::AngularVelocity:
      return std::sqrt(p.g() / p.r0());
    case QuantityKind::Force:
      return p.m() * p.g();
    case QuantityKind::Torque:
      return p.m() * p.g() * p.r0();
    case QuantityKind::Inertia:
      return p.m() * p.r0() * p.r0();
    case QuantityKind::Angle:
      return 1.0;
    case QuantityKind::Time:
      return p.time_constant();
  }
  throw InvalidInput("unknown quantity kind");
}

inline double nondimensionalize(double value, QuantityKind kind, const ModelParams& p) {
  return value / reference_scale(kind, p);
}

inline double dimensionalize(double value, QuantityKind kind, const ModelParams& p) {
  return value * reference_scale(kind, p);
}

/// State in units of (r0, rad, sqrt(g r0), rad / T_C); time in T_C.
inline PipfState nondimensionalize(const PipfState& s, const ModelParams& p) {
  const double v = reference_scale(QuantityKind::LinearVelocity, p);
  const double w = reference_scale(QuantityKind::AngularVelocity, p);
  return {s.r / p.r0(), s.beta, s.gamma, s.r_dot / v, s.beta_dot / w, s.gamma_dot / w,
          s.t / p.time_constant()};
}

inline PipfState dimensionalize(const PipfState& s, const ModelParams& p) {
  const double v = reference_scale(QuantityKind::LinearVelocity, p);
  const double w = reference_scale(QuantityKind::AngularVelocity, p);
  return {s.r * p.r0(), s.beta, s.gamma, s.r_dot * v, s.beta_dot * w, s.gamma_dot * w,
          s.t * p.time_constant()};
}

inline ControlInput nondimensionalize(const ControlInput& u, const ModelParams& p) {
  return {u.F / (p.m() * p.g()), u.tau / (p.m() * p.g() * p.r0())};
}

inline ControlInput dimensionalize(const ControlInput& u, const ModelParams& p) {
  return {u.F * p.m() * p.g(), u.tau * p.m() * p.g() * p.r0()};
}

}  // namespace pipf

#endif  // PIPF_DYNAMICS_HPP

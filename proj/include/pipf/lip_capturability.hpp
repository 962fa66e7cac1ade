#ifndef PIPF_LIP_CAPTURABILITY_HPP
#define PIPF_LIP_CAPTURABILITY_HPP

// Linear inverted pendulum capture point and a greedy N-step follower used
// after the first stance step.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "pipf/errors.hpp"

namespace pipf {

struct LipState {
  double x = 0.0;      ///< m
  double x_dot = 0.0;  ///< m/s
  double z = 1.0;      ///< constant pendulum height, m
};

struct CaptureSpec {
  double eta_vx = 1.5;
  double alpha0 = std::numbers::pi / 3;
  double reach = 1.0;  ///< m

  void validate() const {
    if (!(eta_vx > 1.0)) throw InvalidInput("eta_vx must exceed 1");
    detail::require_positive(reach, "reach");
    detail::require_finite(alpha0, "alpha0");
  }
};

inline double capture_point(const LipState& s, double g) {
  detail::require_positive(s.z, "LIP height");
  detail::require_positive(g, "g");
  detail::require_finite(s.x, "x");
  detail::require_finite(s.x_dot, "x_dot");
  return s.x + s.x_dot * std::sqrt(s.z / g);
}

/// Lowest non-dimensional touchdown speed whose capture point lies beyond the
/// foot placed at attack angle alpha0, amplified by eta_vx.
inline double min_horizontal_speed(double alpha0, double eta_vx) {
  if (!(alpha0 > 0.0 && alpha0 < std::numbers::pi / 2)) {
    throw InvalidInput("alpha0 must lie in (0, pi/2)");
  }
  detail::require_positive(eta_vx, "eta_vx");
  return eta_vx * std::cos(alpha0) / std::sqrt(std::sin(alpha0));
}

/// Closed-form LIP flow about a fixed foot: x'' = (g/z)(x - foot).
inline LipState lip_evolve(const LipState& s, double foot_x, double t, double g) {
  detail::require_positive(s.z, "LIP height");
  detail::require_positive(g, "g");
  const double w = std::sqrt(g / s.z);
  const double d = s.x - foot_x;
  const double ch = std::cosh(w * t);
  const double sh = std::sinh(w * t);
  return {foot_x + d * ch + s.x_dot / w * sh, d * w * sh + s.x_dot * ch, s.z};
}

struct StepPlacement {
  double foot_x = 0.0;  ///< m
  /// Body state when the foot lands.
  LipState at_touchdown;
  /// Velocity left when the next decision is made (or at capture).
  double residual_velocity = 0.0;
};

struct StepPlan {
  std::vector<StepPlacement> steps;
  bool captured = false;
};

/// Greedy stepping: step onto the capture point when it is within reach of
/// the body, otherwise step as far as allowed toward it, ride the LIP for
/// step_time and decide again. At most N steps. The initial support foot is
/// under the body unless given.
inline StepPlan n_step_capture(const LipState& s0, int N, double reach, double g,
                               double step_time, std::optional<double> support_x = {}) {
  if (N < 0) throw InvalidInput("N must be non-negative");
  detail::require_positive(reach, "reach");
  detail::require_positive(step_time, "step_time");
  StepPlan plan;
  LipState s = s0;
  const double foot0 = support_x.value_or(s0.x);

  // Already balanced: at rest over the support foot.
  if (s.x_dot == 0.0 && s.x == foot0) {
    capture_point(s, g);
    plan.captured = true;
    return plan;
  }

  for (int k = 0; k < N; ++k) {
    const double cp = capture_point(s, g);
    const double offset = cp - s.x;
    StepPlacement step;
    step.at_touchdown = s;
    if (std::abs(offset) <= reach) {
      step.foot_x = cp;
      step.residual_velocity = s.x_dot;
      plan.steps.push_back(step);
      plan.captured = true;
      return plan;
    }
    step.foot_x = s.x + std::copysign(reach, offset);
    s = lip_evolve(s, step.foot_x, step_time, g);
    step.residual_velocity = s.x_dot;
    plan.steps.push_back(step);
  }
  return plan;
}

}  // namespace pipf

#endif  // PIPF_LIP_CAPTURABILITY_HPP

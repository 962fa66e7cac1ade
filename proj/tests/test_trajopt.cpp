#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "pipf/stabilizer.hpp"
#include "pipf/trajopt.hpp"

using namespace pipf;

namespace {

const ModelParams kParams = ModelParams::from_nondimensional_inertia(80.0, 9.8, 1.0, 0.04);

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

CostConfig uniform_cost(double k) {
  CostConfig c;
  c.k1 = c.k2 = c.k3 = k;
  c.z_dot_des = 0.0;
  c.z_dot_discount = c.gamma_discount = c.gamma_dot_discount = {DiscountKind::Uniform, 1.0};
  return c;
}

// Leg vertical, body upright and at rest.
PipfState upright(double r) {
  PipfState s;
  s.r = r * kParams.r0();
  s.beta = std::numbers::pi / 2;
  return s;
}

PipfState prelim_touchdown() { return touchdown_state(LandingCase{}, kParams); }

// Worst RK4 defect across intervals, non-dimensional.
double max_defect(const IterationResult& res) {
  const double dt = res.states[1].t - res.states[0].t;
  double worst = 0.0;
  for (std::size_t n = 0; n < res.controls.size(); ++n) {
    const auto next = integrate_step(res.states[n], res.controls[n], dt, kParams).state;
    const auto a = nondimensionalize(next, kParams).vector();
    const auto b = nondimensionalize(res.states[n + 1], kParams).vector();
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return worst;
}

void expect_within_bounds(const IterationResult& res, const ConstraintConfig& con, double tol) {
  for (const auto& s : res.states) {
    const auto x = nondimensionalize(s, kParams);
    EXPECT_GE(x.r, con.Q_min[0] - tol);
    EXPECT_LE(x.r, con.Q_max[0] + tol);
    EXPECT_GE(x.beta, con.Q_min[1] - tol);
    EXPECT_LE(x.beta, con.Q_max[1] + tol);
    EXPECT_GE(x.gamma, con.Q_min[2] - tol);
    EXPECT_LE(x.gamma, con.Q_max[2] + tol);
  }
  for (const auto& u : res.controls) {
    const auto v = nondimensionalize(u, kParams);
    EXPECT_GE(v.F, con.U_min[0] - tol);
    EXPECT_LE(v.F, con.U_max[0] + tol);
    EXPECT_GE(v.tau, con.U_min[1] - tol);
    EXPECT_LE(v.tau, con.U_max[1] + tol);
  }
}

}  // namespace

TEST(Discount, UniformEqualWeights) {
  const auto xi = discount_sequence(DiscountKind::Uniform, 4);
  ASSERT_EQ(xi.size(), 4u);
  for (double v : xi) EXPECT_EQ(v, 0.25);
}

TEST(Discount, UniformSumsExactlyToOne) {
  for (int p = 1; p <= 200; ++p) {
    const auto xi = discount_sequence(DiscountKind::Uniform, p);
    EXPECT_EQ(sum(xi), 1.0) << "p = " << p;
    for (double v : xi) EXPECT_NEAR(v, 1.0 / p, 1e-13);
  }
}

TEST(Discount, ReversedPoissonHandValues) {
  const auto xi = discount_sequence(DiscountKind::ReversedPoisson, 3, 1.0);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(xi[0], e / 2.0, 1e-15);
  EXPECT_NEAR(xi[1], e, 1e-15);
  EXPECT_NEAR(xi[2], e, 1e-15);
  EXPECT_NEAR(xi[0], 0.18394, 1e-5);
  EXPECT_NEAR(xi[2], 0.36788, 1e-5);
}

TEST(Discount, ReversedPoissonPartialSums) {
  for (int p = 1; p <= 40; ++p) {
    const auto xi = discount_sequence(DiscountKind::ReversedPoisson, p, 1.0);
    const double s = sum(xi);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    for (std::size_t i = 1; i < xi.size(); ++i) EXPECT_GE(xi[i], xi[i - 1]);
  }
  EXPECT_GT(sum(discount_sequence(DiscountKind::ReversedPoisson, 20, 1.0)), 0.9999);
}

TEST(Discount, RejectsBadArguments) {
  EXPECT_THROW(discount_sequence(DiscountKind::Uniform, 0), InvalidInput);
  EXPECT_THROW(discount_sequence(DiscountKind::ReversedPoisson, 3, 0.0), InvalidInput);
}

TEST(Horizon, StepLength) {
  const HorizonSpec h{0.4, 20, 0.0};
  EXPECT_DOUBLE_EQ(h.T_s() * h.p, h.T_h);
  EXPECT_THROW((HorizonSpec{0.0, 20, 0.0}.validate()), InvalidInput);
  EXPECT_THROW((HorizonSpec{0.1, 1, 0.0}.validate()), InvalidInput);
}

TEST(Cost, ZeroAtTarget) {
  const std::vector<PipfState> states(5, upright(0.9));
  EXPECT_EQ(cost(states, uniform_cost(1.0), 4, kParams), 0.0);
}

TEST(Cost, SingleFinalDeviation) {
  // Final knot descends at z_dot = -0.2, so sigma^2 = 0.04 with xi_2 = 1/2.
  std::vector<PipfState> states(3, upright(0.9));
  states[2].r_dot = -0.2 * std::sqrt(kParams.g() * kParams.r0());
  EXPECT_NEAR(cost(states, uniform_cost(1.0), 2, kParams), 0.02, 1e-12);
  EXPECT_NEAR(cost(states, uniform_cost(10.0), 2, kParams), 0.2, 1e-12);
}

TEST(Cost, LengthMismatchThrows) {
  const std::vector<PipfState> states(4, upright(0.9));
  EXPECT_THROW(cost(states, uniform_cost(1.0), 4, kParams), InvalidInput);
}

TEST(SolveIteration, HoverEquilibrium) {
  const PipfState x0 = upright(0.9);
  const HorizonSpec h{0.1 * kParams.time_constant(), 20, 0.0};
  const auto res = solve_iteration(x0, h, uniform_cost(1.0), ConstraintConfig{}, kParams);
  ASSERT_EQ(res.status, SolveStatus::Converged);
  EXPECT_LT(res.objective, 1e-6);
  for (const auto& u : res.controls) {
    const auto v = nondimensionalize(u, kParams);
    EXPECT_NEAR(v.F, 1.0, 1e-3);
    EXPECT_NEAR(v.tau, 0.0, 1e-3);
  }
}

TEST(SolveIteration, DegenerateControlBoundsGiveRollout) {
  PipfState x0 = upright(0.9);
  x0.beta = std::numbers::pi * 80.0 / 180.0;
  x0.beta_dot = 0.3 / kParams.time_constant();
  ConstraintConfig con;
  const Eigen::Vector2d hover = hover_control_nd(nondimensionalize(x0, kParams).vector(), con);
  con.U_min = con.U_max = hover;
  const HorizonSpec h{0.1 * kParams.time_constant(), 20, 0.0};
  const auto res = solve_iteration(x0, h, uniform_cost(1.0), con, kParams);
  ASSERT_EQ(res.status, SolveStatus::Converged);

  std::vector<PipfState> sim{x0};
  const ControlInput u = dimensionalize(ControlInput{hover[0], hover[1]}, kParams);
  for (int n = 0; n < h.p; ++n) sim.push_back(integrate_step(sim.back(), u, h.T_s(), kParams).state);
  // Per-interval defects of 1e-6 may accumulate along the chain.
  EXPECT_LE(max_defect(res), 1e-6);
  for (std::size_t n = 0; n < sim.size(); ++n) {
    const auto a = nondimensionalize(sim[n], kParams).vector();
    const auto b = nondimensionalize(res.states[n], kParams).vector();
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 2.0 * h.p * 1e-6);
  }
  for (const auto& c : res.controls) {
    const auto v = nondimensionalize(c, kParams);
    EXPECT_EQ(v.F, hover[0]);
    EXPECT_EQ(v.tau, hover[1]);
  }
  EXPECT_NEAR(res.objective, cost(sim, uniform_cost(1.0), h.p, kParams), 1e-6);
}

TEST(SolveIteration, InfeasibleStartDoesNotIterate) {
  PipfState x0 = upright(1.2);
  const HorizonSpec h{0.1, 20, 0.0};
  const auto res = solve_iteration(x0, h, uniform_cost(1.0), ConstraintConfig{}, kParams);
  EXPECT_EQ(res.status, SolveStatus::Infeasible);
  EXPECT_EQ(res.solver_iterations, 0);
}

class PreliminaryIteration : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const StabilizerConfig cfg;
    cost_ = cfg.pitch_cost(1.0);
    horizon_ = pitch_horizon(LandingCase{}.vx0_nd, cfg.eta, kParams);
    result_ = solve_iteration(prelim_touchdown(), horizon_, cost_, ConstraintConfig{}, kParams);
  }
  static inline CostConfig cost_;
  static inline HorizonSpec horizon_;
  static inline IterationResult result_;
};

TEST_F(PreliminaryIteration, ConvergesWithinBounds) {
  ASSERT_EQ(result_.status, SolveStatus::Converged);
  ASSERT_EQ(result_.states.size(), 21u);
  ASSERT_EQ(result_.controls.size(), 20u);
  expect_within_bounds(result_, ConstraintConfig{}, 1e-6);
}

TEST_F(PreliminaryIteration, DefectsSmall) {
  EXPECT_LE(result_.max_defect, 1e-6);
  EXPECT_LE(max_defect(result_), 1e-6);
}

TEST_F(PreliminaryIteration, ObjectiveMatchesCost) {
  EXPECT_NEAR(result_.objective, cost(result_.states, cost_, horizon_.p, kParams), 1e-9);
}

TEST_F(PreliminaryIteration, KnotTimesFollowHorizon) {
  for (std::size_t n = 0; n < result_.states.size(); ++n) {
    EXPECT_NEAR(result_.states[n].t, n * horizon_.T_s(), 1e-12);
  }
}

TEST_F(PreliminaryIteration, WarmStartFinishesQuickly) {
  const auto warm = solve_iteration(prelim_touchdown(), horizon_, cost_, ConstraintConfig{},
                                    kParams, &result_);
  EXPECT_EQ(warm.status, SolveStatus::Converged);
  EXPECT_LE(warm.solver_iterations, 3);
  EXPECT_LT(std::abs(warm.objective - result_.objective), 1e-8);
}

TEST_F(PreliminaryIteration, Deterministic) {
  const auto again = solve_iteration(prelim_touchdown(), horizon_, cost_, ConstraintConfig{},
                                     kParams);
  EXPECT_EQ(again.status, result_.status);
  EXPECT_EQ(again.objective, result_.objective);
  EXPECT_EQ(again.solver_iterations, result_.solver_iterations);
}

TEST_F(PreliminaryIteration, WeightScalingKeepsMinimizer) {
  CostConfig scaled = cost_;
  scaled.k1 *= 10.0;
  scaled.k2 *= 10.0;
  scaled.k3 *= 10.0;
  const auto res = solve_iteration(prelim_touchdown(), horizon_, scaled, ConstraintConfig{},
                                   kParams);
  ASSERT_EQ(res.status, SolveStatus::Converged);
  EXPECT_NEAR(res.objective, 10.0 * result_.objective, 1e-6 * (1.0 + result_.objective));
  for (std::size_t n = 0; n < res.controls.size(); ++n) {
    EXPECT_NEAR(res.controls[n].F, result_.controls[n].F, 1e-6 * kParams.m() * kParams.g());
  }
}

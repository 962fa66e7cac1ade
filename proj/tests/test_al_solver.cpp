#include <gtest/gtest.h>

#include <cmath>

#include "pipf/al_solver.hpp"

using namespace pipf;
using Triplets = std::vector<Eigen::Triplet<double>>;

namespace {

// min (z0 - 2)^2 + (z1 - 1)^2  s.t.  z0 + z1 = 1,  0 <= z <= hi
struct Projection {
  double hi = 10.0;
  int num_variables() const { return 2; }
  int num_residuals() const { return 2; }
  int num_constraints() const { return 1; }
  Eigen::VectorXd lower_bounds() const { return Eigen::VectorXd::Zero(2); }
  Eigen::VectorXd upper_bounds() const { return Eigen::VectorXd::Constant(2, hi); }
  void evaluate(const Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::VectorXd& c, Triplets* jr,
                Triplets* jc) const {
    r << z[0] - 2.0, z[1] - 1.0;
    c << z[0] + z[1] - 1.0;
    if (jr) {
      jr->emplace_back(0, 0, 1.0);
      jr->emplace_back(1, 1, 1.0);
    }
    if (jc) {
      jc->emplace_back(0, 0, 1.0);
      jc->emplace_back(0, 1, 1.0);
    }
  }
};

// Rosenbrock as least squares, with an optional circle constraint.
struct Rosenbrock {
  bool constrained = false;
  int num_variables() const { return 2; }
  int num_residuals() const { return 2; }
  int num_constraints() const { return constrained ? 1 : 0; }
  Eigen::VectorXd lower_bounds() const { return Eigen::VectorXd::Constant(2, -5.0); }
  Eigen::VectorXd upper_bounds() const { return Eigen::VectorXd::Constant(2, 5.0); }
  void evaluate(const Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::VectorXd& c, Triplets* jr,
                Triplets* jc) const {
    r << 10.0 * (z[1] - z[0] * z[0]), 1.0 - z[0];
    if (jr) {
      jr->emplace_back(0, 0, -20.0 * z[0]);
      jr->emplace_back(0, 1, 10.0);
      jr->emplace_back(1, 0, -1.0);
    }
    if (constrained) {
      c << z[0] * z[0] + z[1] * z[1] - 1.0;
      if (jc) {
        jc->emplace_back(0, 0, 2.0 * z[0]);
        jc->emplace_back(0, 1, 2.0 * z[1]);
      }
    }
  }
};

}  // namespace

static_assert(LeastSquaresProblem<Projection>);
static_assert(LeastSquaresProblem<Rosenbrock>);

TEST(AugmentedLagrangian, EqualityConstrainedProjection) {
  const Projection prob;
  const auto res = AugmentedLagrangianSolver<Projection>(prob).solve({Eigen::Vector2d(0, 0)});
  ASSERT_EQ(res.status, AlStatus::Converged);
  EXPECT_NEAR(res.z[0], 1.0, 1e-6);
  EXPECT_NEAR(res.z[1], 0.0, 1e-6);
  EXPECT_LE(res.constraint_violation, 1e-6);
}

TEST(AugmentedLagrangian, ActiveUpperBound) {
  const Projection prob{0.8};
  const auto res = AugmentedLagrangianSolver<Projection>(prob).solve({Eigen::Vector2d(0, 0)});
  ASSERT_EQ(res.status, AlStatus::Converged);
  EXPECT_NEAR(res.z[0], 0.8, 1e-6);
  EXPECT_NEAR(res.z[1], 0.2, 1e-6);
  EXPECT_LE(res.z[0], 0.8);
}

TEST(AugmentedLagrangian, UnconstrainedRosenbrock) {
  const Rosenbrock prob;
  const auto res = AugmentedLagrangianSolver<Rosenbrock>(prob).solve({Eigen::Vector2d(-1.2, 1)});
  ASSERT_EQ(res.status, AlStatus::Converged);
  EXPECT_NEAR(res.z[0], 1.0, 1e-5);
  EXPECT_NEAR(res.z[1], 1.0, 1e-5);
}

TEST(AugmentedLagrangian, RosenbrockOnCircle) {
  // Known optimum of Rosenbrock restricted to the unit circle.
  const Rosenbrock prob{true};
  const auto res = AugmentedLagrangianSolver<Rosenbrock>(prob).solve({Eigen::Vector2d(0.5, 0)});
  ASSERT_EQ(res.status, AlStatus::Converged);
  EXPECT_NEAR(res.z[0], 0.7864, 1e-4);
  EXPECT_NEAR(res.z[1], 0.6177, 1e-4);
  EXPECT_NEAR(res.z.squaredNorm(), 1.0, 1e-6);
}

TEST(AugmentedLagrangian, WarmStartFinishesQuickly) {
  const Rosenbrock prob{true};
  const AugmentedLagrangianSolver<Rosenbrock> solver(prob);
  const auto cold = solver.solve({Eigen::Vector2d(0.5, 0)});
  ASSERT_EQ(cold.status, AlStatus::Converged);
  const auto warm = solver.solve({cold.z, cold.multipliers, cold.penalty});
  EXPECT_EQ(warm.status, AlStatus::Converged);
  EXPECT_LE(warm.outer_iterations, 3);
  EXPECT_LT(std::abs(warm.objective - cold.objective), 1e-8);
}

TEST(AugmentedLagrangian, Deterministic) {
  const Rosenbrock prob{true};
  const AugmentedLagrangianSolver<Rosenbrock> solver(prob);
  const auto a = solver.solve({Eigen::Vector2d(0.5, 0)});
  const auto b = solver.solve({Eigen::Vector2d(0.5, 0)});
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.outer_iterations, b.outer_iterations);
}

TEST(AugmentedLagrangian, DegenerateBoxPinsVariables) {
  struct Pinned : Projection {
    Eigen::VectorXd lower_bounds() const { return Eigen::Vector2d(0.3, 0.0); }
    Eigen::VectorXd upper_bounds() const { return Eigen::Vector2d(0.3, 10.0); }
  };
  const Pinned prob;
  const auto res = AugmentedLagrangianSolver<Pinned>(prob).solve({Eigen::Vector2d(0, 0)});
  ASSERT_EQ(res.status, AlStatus::Converged);
  EXPECT_EQ(res.z[0], 0.3);
  EXPECT_NEAR(res.z[1], 0.7, 1e-6);
}

TEST(AugmentedLagrangian, InfeasibleConstraintsStall) {
  // z0 + z1 = 1 cannot hold with both variables pinned at zero.
  struct Impossible : Projection {
    Eigen::VectorXd upper_bounds() const { return Eigen::VectorXd::Zero(2); }
  };
  const Impossible prob;
  const auto res = AugmentedLagrangianSolver<Impossible>(prob).solve({Eigen::Vector2d(0, 0)});
  EXPECT_EQ(res.status, AlStatus::Stalled);
  EXPECT_NEAR(res.constraint_violation, 1.0, 1e-12);
}

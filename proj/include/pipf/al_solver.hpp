#ifndef PIPF_AL_SOLVER_HPP
#define PIPF_AL_SOLVER_HPP

// Bound-constrained augmented Lagrangian solver for problems of the form
//
//   min ||r(z)||^2   s.t.  c(z) = 0,  lo <= z <= hi
//
// The outer loop updates equality multipliers and the penalty. Each inner
// subproblem is itself a sum of squares,
//
//   ||r(z)||^2 + (rho / 2) ||c(z) + lambda / rho||^2,
//
// and is minimized by a projected Levenberg-Marquardt iteration on sparse
// Gauss-Newton normal equations. Bounds are enforced exactly by projection.

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pipf {

struct AlSettings {
  double constraint_tolerance = 1e-6;
  double optimality_tolerance = 1e-5;
  int max_outer_iterations = 200;
  int max_inner_iterations = 80;
  double initial_penalty = 10.0;
  double max_penalty = 1e10;
  double penalty_growth = 10.0;
  /// Required contraction of the constraint violation between outer
  /// iterations before the penalty is left unchanged.
  double violation_contraction = 0.25;
};

/// Stalled: the constraint violation stopped shrinking at the penalty cap,
/// the usual signature of a locally infeasible problem.
enum class AlStatus { Converged, MaxIterations, Stalled };

struct AlResult {
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;
  double penalty = 0.0;
  AlStatus status = AlStatus::MaxIterations;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double objective = 0.0;
  double constraint_violation = 0.0;
  double optimality = 0.0;
};

/// Warm-start data for a solve: primal point plus optional multiplier and
/// penalty state from an earlier run on the same problem.
struct AlStart {
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;
  double penalty = 0.0;
};

/// Requirements on a problem type used with AugmentedLagrangianSolver.
///
/// evaluate() fills residuals and constraint values; when the Jacobian
/// pointers are non-null it also appends triplets (row, col, value) with
/// rows indexed within the residual and constraint blocks respectively.
template <typename P>
concept LeastSquaresProblem =
    requires(const P& p, const Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::VectorXd& c,
             std::vector<Eigen::Triplet<double>>* jr, std::vector<Eigen::Triplet<double>>* jc) {
      { p.num_variables() } -> std::convertible_to<int>;
      { p.num_residuals() } -> std::convertible_to<int>;
      { p.num_constraints() } -> std::convertible_to<int>;
      { p.lower_bounds() } -> std::convertible_to<Eigen::VectorXd>;
      { p.upper_bounds() } -> std::convertible_to<Eigen::VectorXd>;
      p.evaluate(z, r, c, jr, jc);
    };

template <LeastSquaresProblem Problem>
class AugmentedLagrangianSolver {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double>;
  using Triplet = Eigen::Triplet<double>;

  AugmentedLagrangianSolver(const Problem& problem, AlSettings settings = {})
      : problem_(problem),
        settings_(settings),
        n_(problem.num_variables()),
        nr_(problem.num_residuals()),
        nc_(problem.num_constraints()),
        lo_(problem.lower_bounds()),
        hi_(problem.upper_bounds()) {}

  AlResult solve(const AlStart& start) const {
    AlResult out;
    Eigen::VectorXd z = project(start.z);
    Eigen::VectorXd lambda = start.multipliers.size() == nc_
                                 ? start.multipliers
                                 : Eigen::VectorXd::Zero(nc_).eval();
    double rho = start.penalty > 0.0 ? start.penalty : settings_.initial_penalty;
    // A warm start arrives with converged multipliers, so the first
    // subproblem is solved straight to the final tolerance.
    double inner_tol = start.penalty > 0.0 ? 0.1 * settings_.optimality_tolerance : 1e-2;
    double previous_violation = std::numeric_limits<double>::infinity();
    int stalled = 0;

    Eigen::VectorXd r(nr_), c(nc_);
    if (start.multipliers.size() == nc_) {
      // A start that already satisfies the KKT tolerances is returned as is.
      problem_.evaluate(z, r, c, nullptr, nullptr);
      const double violation = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
      const double optimality = lagrangian_optimality(z, lambda);
      if (violation <= settings_.constraint_tolerance &&
          optimality <= settings_.optimality_tolerance) {
        out.status = AlStatus::Converged;
        out.z = z;
        out.multipliers = lambda;
        out.penalty = rho;
        out.objective = r.squaredNorm();
        out.constraint_violation = violation;
        out.optimality = optimality;
        return out;
      }
    }
    for (int outer = 1; outer <= settings_.max_outer_iterations; ++outer) {
      out.inner_iterations += minimize_subproblem(z, lambda, rho, inner_tol);
      out.outer_iterations = outer;

      problem_.evaluate(z, r, c, nullptr, nullptr);
      const double violation = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
      const Eigen::VectorXd updated = lambda + rho * c;
      const double optimality = lagrangian_optimality(z, updated);

      lambda = updated;
      out.constraint_violation = violation;
      out.optimality = optimality;
      if (violation <= settings_.constraint_tolerance &&
          optimality <= settings_.optimality_tolerance) {
        out.status = AlStatus::Converged;
        break;
      }

      if (violation > settings_.violation_contraction * previous_violation &&
          violation > settings_.constraint_tolerance) {
        if (rho >= settings_.max_penalty) {
          if (++stalled >= 3) {
            out.status = AlStatus::Stalled;
            break;
          }
        }
        rho = std::min(rho * settings_.penalty_growth, settings_.max_penalty);
      }
      previous_violation = violation;
      inner_tol = std::max(0.1 * settings_.optimality_tolerance, 0.1 * inner_tol);
    }

    problem_.evaluate(z, r, c, nullptr, nullptr);
    out.z = z;
    out.multipliers = lambda;
    out.penalty = rho;
    out.objective = r.squaredNorm();
    return out;
  }

 private:
  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    return z.cwiseMax(lo_).cwiseMin(hi_);
  }

  /// Infinity norm of the projected gradient, z - P(z - g).
  double projected_gradient_norm(const Eigen::VectorXd& z, const Eigen::VectorXd& grad) const {
    return (z - project(z - grad)).cwiseAbs().maxCoeff();
  }

  double lagrangian_optimality(const Eigen::VectorXd& z, const Eigen::VectorXd& lambda) const {
    Eigen::VectorXd r(nr_), c(nc_);
    std::vector<Triplet> jr, jc;
    problem_.evaluate(z, r, c, &jr, &jc);
    SparseMatrix Jr(nr_, n_), Jc(nc_, n_);
    Jr.setFromTriplets(jr.begin(), jr.end());
    Jc.setFromTriplets(jc.begin(), jc.end());
    const Eigen::VectorXd grad = 2.0 * (Jr.transpose() * r) + Jc.transpose() * lambda;
    return projected_gradient_norm(z, grad);
  }

  struct Linearization {
    Eigen::VectorXd residual;
    SparseMatrix jacobian;
    double merit = 0.0;
  };

  double merit(const Eigen::VectorXd& z, const Eigen::VectorXd& lambda, double rho) const {
    Eigen::VectorXd r(nr_), c(nc_);
    problem_.evaluate(z, r, c, nullptr, nullptr);
    return r.squaredNorm() + 0.5 * rho * (c + lambda / rho).squaredNorm();
  }

  Linearization linearize(const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                          double rho) const {
    Eigen::VectorXd r(nr_), c(nc_);
    std::vector<Triplet> jr, jc;
    problem_.evaluate(z, r, c, &jr, &jc);
    const double s = std::sqrt(0.5 * rho);
    Linearization lin;
    lin.residual.resize(nr_ + nc_);
    lin.residual << r, s * (c + lambda / rho);
    std::vector<Triplet> all;
    all.reserve(jr.size() + jc.size());
    all.insert(all.end(), jr.begin(), jr.end());
    for (const auto& t : jc) all.emplace_back(nr_ + t.row(), t.col(), s * t.value());
    lin.jacobian.resize(nr_ + nc_, n_);
    lin.jacobian.setFromTriplets(all.begin(), all.end());
    lin.merit = lin.residual.squaredNorm();
    return lin;
  }

  /// Projected Levenberg-Marquardt on the augmented merit. Returns the number
  /// of linearizations performed.
  int minimize_subproblem(Eigen::VectorXd& z, const Eigen::VectorXd& lambda, double rho,
                          double tolerance) const {
    constexpr double kActiveGap = 1e-12;
    Linearization lin = linearize(z, lambda, rho);
    double mu = -1.0;
    double nu = 2.0;
    int iterations = 0;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;

    for (; iterations < settings_.max_inner_iterations; ++iterations) {
      const Eigen::VectorXd half_grad = lin.jacobian.transpose() * lin.residual;
      if (projected_gradient_norm(z, 2.0 * half_grad) <= tolerance) break;

      SparseMatrix H = SparseMatrix(lin.jacobian.transpose()) * lin.jacobian;
      if (mu < 0.0) mu = 1e-6 * std::max(1.0, H.diagonal().maxCoeff());

      // Variables pinned at a bound with the gradient pushing outward stay put.
      Eigen::VectorXd rhs = -half_grad;
      std::vector<bool> active(n_, false);
      for (int i = 0; i < n_; ++i) {
        const bool at_lo = z[i] <= lo_[i] + kActiveGap && half_grad[i] > 0.0;
        const bool at_hi = z[i] >= hi_[i] - kActiveGap && half_grad[i] < 0.0;
        if (at_lo || at_hi || lo_[i] == hi_[i]) {
          active[i] = true;
          rhs[i] = 0.0;
        }
      }

      bool accepted = false;
      while (!accepted && mu < 1e20) {
        SparseMatrix A = H;
        for (int i = 0; i < n_; ++i) {
          A.coeffRef(i, i) += active[i] ? 1e12 * (1.0 + H.coeff(i, i)) : mu;
        }
        ldlt.analyzePattern(A);
        ldlt.factorize(A);
        if (ldlt.info() != Eigen::Success) {
          mu *= nu;
          nu *= 2.0;
          continue;
        }
        const Eigen::VectorXd delta = ldlt.solve(rhs);
        const Eigen::VectorXd trial = project(z + delta);
        const Eigen::VectorXd step = trial - z;
        if (step.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + z.cwiseAbs().maxCoeff())) {
          return iterations + 1;
        }
        const double predicted = lin.merit - (lin.residual + lin.jacobian * step).squaredNorm();
        const double trial_merit = merit(trial, lambda, rho);
        const double actual = lin.merit - trial_merit;
        if (predicted > 0.0 && actual > 1e-4 * predicted) {
          z = trial;
          const double ratio = actual / predicted;
          mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * ratio - 1.0, 3));
          nu = 2.0;
          accepted = true;
        } else {
          mu *= nu;
          nu *= 2.0;
        }
      }
      if (!accepted) break;
      lin = linearize(z, lambda, rho);
    }
    return iterations;
  }

  const Problem& problem_;
  AlSettings settings_;
  int n_;
  int nr_;
  int nc_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
};

}  // namespace pipf

#endif  // PIPF_AL_SOLVER_HPP

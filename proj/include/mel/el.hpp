#pragma once

#include <cassert>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mel/errors.hpp"

namespace mel {

enum class ElStatus { kConverged, kInfeasibleHull, kMaxIterations };

/// Dual empirical-likelihood problem: maximize sum_l log(1 + lambda'v_l)
/// over lambda, for n value vectors v_l in R^d stored as the rows of
/// `values`. The gradient stop is scale-aware: convergence is declared at
/// ||gradient|| <= tolerance * max(1, max_l ||v_l||).
struct ELProblem {
  Eigen::MatrixXd values;
  double tolerance = 1e-9;
  int max_iterations = 100;
};

struct ELSolution {
  Eigen::VectorXd lambda;
  Eigen::VectorXd weights;  // w_l = 1 / (n (1 + lambda'v_l))
  double statistic = 0.0;   // 2 * sum_l log(1 + lambda'v_l)
  ElStatus status = ElStatus::kConverged;
  int iterations = 0;
};

/// Value reported for a statistic whose dual is unbounded (the origin lies
/// outside the convex hull of the values). Any finite chi-square threshold
/// rejects it, which is exactly how confidence-set inversion should treat
/// an infeasible candidate point.
inline constexpr double kRejectedStatistic =
    std::numeric_limits<double>::infinity();

namespace el_detail {

inline double log_objective(const Eigen::MatrixXd& values,
                            const Eigen::VectorXd& lambda,
                            Eigen::VectorXd& units) {
  units.noalias() = values * lambda;
  units.array() += 1.0;
  if (units.minCoeff() <= 0.0) return -std::numeric_limits<double>::infinity();
  return units.array().log().sum();
}

}  // namespace el_detail

/// Damped Newton ascent on the concave dual objective, starting from
/// lambda = 0, with step halving to keep every 1 + lambda'v_l above a
/// small feasibility margin. Accepted steps never decrease the recorded
/// objective. Unboundedness (origin outside the hull) is detected by the
/// statistic passing a cap, by a fully backtracked boundary-limited step
/// making no progress, or by the maximizer running away to infinity, in
/// which case the weights stop summing to one.
inline ELSolution solve_dual(const ELProblem& problem) {
  const Eigen::MatrixXd& v = problem.values;
  const int n = int(v.rows());
  const int d = int(v.cols());

  if (n == 0 || d == 0) throw DataError("empty EL problem");
  if (!v.allFinite()) throw DataError("EL values must be finite");

  ELSolution out;
  out.lambda = Eigen::VectorXd::Zero(d);
  out.weights = Eigen::VectorXd::Constant(n, 1.0 / n);

  const double vmax = v.rowwise().norm().maxCoeff();
  if (vmax == 0.0) {
    // Hull is the origin itself: equal weights are optimal, statistic zero.
    return out;
  }
  // A bounded interior solution needs at least d+1 points, and for d = 1
  // the hull condition is just a sign straddle.
  bool infeasible = n < d + 1;
  if (!infeasible && d == 1) {
    infeasible = !(v.col(0).minCoeff() < 0.0 && v.col(0).maxCoeff() > 0.0);
  }
  if (infeasible) {
    out.status = ElStatus::kInfeasibleHull;
    out.statistic = kRejectedStatistic;
    return out;
  }

  const double gradient_tol = problem.tolerance * std::max(1.0, vmax);
  // Feasibility margin on 1 + lambda'v_l, scaled by the value magnitude.
  const double margin = std::min(1e-6, 1e-10 * std::max(1.0, vmax));
  const double statistic_cap = 1e3 * double(n);
  const double lambda_cap = 1e15 / vmax;

  Eigen::VectorXd units(n), trial_units(n), gradient(d), step(d), trial(d);
  Eigen::MatrixXd hessian(d, d);
  double objective = 0.0;
  units.setOnes();

  for (int iter = 1; iter <= problem.max_iterations; ++iter) {
    out.iterations = iter;
    gradient.setZero();
    hessian.setZero();
    for (int l = 0; l < n; ++l) {
      const double inv_unit = 1.0 / units[l];
      gradient.noalias() += v.row(l).transpose() * inv_unit;
      hessian.noalias() +=
          (v.row(l).transpose() * v.row(l)) * (inv_unit * inv_unit);
    }

    if (gradient.norm() <= gradient_tol) {
      const double weight_sum = units.cwiseInverse().sum() / double(n);
      // The first-order condition forces the weights to sum to one, so a
      // gross deviation at a tiny gradient means the maximizer ran away.
      if (std::abs(weight_sum - 1.0) <= 1e-10) {
        out.weights = units.cwiseInverse() / double(n);
        out.statistic = 2.0 * objective;
        out.status = ElStatus::kConverged;
        return out;
      }
      if (std::abs(weight_sum - 1.0) > 1e-3 ||
          out.lambda.norm() > lambda_cap) {
        out.status = ElStatus::kInfeasibleHull;
        out.statistic = kRejectedStatistic;
        return out;
      }
      // Otherwise keep polishing: quadratic convergence drives the
      // first-order condition to machine precision in a step or two.
    }

    Eigen::LLT<Eigen::MatrixXd> llt(hessian);
    if (llt.info() != Eigen::Success) {
      // Near-collinear values: ridge keeps the ascent direction defined.
      const double ridge = 1e-10 * hessian.trace() / double(d);
      hessian.diagonal().array() += std::max(ridge, 1e-300);
      llt.compute(hessian);
      if (llt.info() != Eigen::Success) {
        out.status = ElStatus::kInfeasibleHull;
        out.statistic = kRejectedStatistic;
        return out;
      }
    }
    step = llt.solve(gradient);

    // Largest step fraction keeping every unit above the margin.
    double alpha = 1.0;
    const Eigen::VectorXd dv = v * step;
    for (int l = 0; l < n; ++l) {
      if (dv[l] < 0.0) {
        alpha = std::min(alpha, 0.99 * (units[l] - margin) / (-dv[l]));
      }
    }
    const bool boundary_limited = alpha < 1.0;
    if (!(alpha > 0.0)) {
      out.status = ElStatus::kInfeasibleHull;
      out.statistic = kRejectedStatistic;
      return out;
    }

    // Objective increments smaller than this are below double resolution.
    const double fp_noise = 1e-12 * std::max(1.0, std::abs(objective));
    bool accepted = false;
    for (int halving = 0; halving < 20; ++halving) {
      trial = out.lambda + alpha * step;
      const double trial_objective =
          el_detail::log_objective(v, trial, trial_units);
      const bool feasible = trial_units.minCoeff() > 0.0;
      const bool strict_increase =
          feasible && trial_objective > objective + fp_noise;
      // A full, interior Newton step whose objective change saturates at
      // floating-point resolution is the converged regime; take it so the
      // gradient test can fire on the next pass.
      const bool saturated = feasible && halving == 0 && !boundary_limited &&
                             std::abs(trial_objective - objective) <= fp_noise;
      if (strict_increase || saturated) {
        out.lambda = trial;
        units = trial_units;
        objective = std::max(objective, trial_objective);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.status = ElStatus::kInfeasibleHull;
      out.statistic = kRejectedStatistic;
      return out;
    }

    if (2.0 * objective > statistic_cap || out.lambda.norm() > lambda_cap) {
      out.status = ElStatus::kInfeasibleHull;
      out.statistic = kRejectedStatistic;
      return out;
    }
  }

  out.statistic = 2.0 * objective;
  out.weights = units.cwiseInverse() / double(n);
  out.status = ElStatus::kMaxIterations;
  return out;
}

/// Statistic-only wrapper: kRejectedStatistic on hull infeasibility,
/// MaxIterationsError if the iteration budget runs out.
inline double el_statistic(const Eigen::MatrixXd& values,
                           double tolerance = 1e-9, int max_iterations = 100) {
  ELProblem problem;
  problem.values = values;
  problem.tolerance = tolerance;
  problem.max_iterations = max_iterations;
  const ELSolution solution = solve_dual(problem);
  switch (solution.status) {
    case ElStatus::kConverged:
      return solution.statistic;
    case ElStatus::kInfeasibleHull:
      return kRejectedStatistic;
    case ElStatus::kMaxIterations:
    default:
      throw MaxIterationsError("EL dual did not converge in " +
                               std::to_string(max_iterations) + " iterations");
  }
}

}  // namespace mel

#pragma once

// Test-only primal oracle for the empirical-likelihood statistic: maximizes
// sum log(n w_l) over the weight simplex subject to sum w_l v_l = 0 by
// gradient ascent on the constraint nullspace. The log terms act as their
// own barrier, so a feasible interior start plus backtracking ascent
// reaches the global optimum of this strictly concave problem without ever
// touching the dual formulation. Scalar values only.

#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace mel_testing {

inline double primal_statistic_oracle(const Eigen::VectorXd& v) {
  const int n = int(v.size());

  // Interior feasible start: balance positive and negative values.
  double sum_pos = 0.0, sum_neg = 0.0;
  int zeros = 0, n_pos = 0, n_neg = 0;
  for (int l = 0; l < n; ++l) {
    if (v[l] > 0.0) {
      sum_pos += v[l];
      ++n_pos;
    } else if (v[l] < 0.0) {
      sum_neg -= v[l];
      ++n_neg;
    } else {
      ++zeros;
    }
  }
  if (!(sum_pos > 0.0 && sum_neg > 0.0)) {
    throw std::invalid_argument("oracle needs values straddling zero");
  }
  const double budget = 1.0 - double(zeros) / n;
  const double t = budget / (n_pos / sum_pos + n_neg / sum_neg);
  Eigen::VectorXd w(n);
  for (int l = 0; l < n; ++l) {
    if (v[l] > 0.0) w[l] = t / sum_pos;
    else if (v[l] < 0.0) w[l] = t / sum_neg;
    else w[l] = 1.0 / n;
  }

  Eigen::MatrixXd constraints(2, n);
  constraints.row(0).setOnes();
  constraints.row(1) = v.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(constraints);
  const Eigen::MatrixXd nullspace = lu.kernel();  // n x (n-2)

  auto objective = [&](const Eigen::VectorXd& weights) {
    if (weights.minCoeff() <= 0.0) {
      return -std::numeric_limits<double>::infinity();
    }
    return (weights.array() * double(n)).log().sum();
  };

  double f = objective(w);
  for (int iter = 0; iter < 20000; ++iter) {
    const Eigen::VectorXd grad_u = nullspace.transpose() * w.cwiseInverse();
    if (grad_u.norm() < 1e-11 * n) break;
    double alpha = 1.0 / std::max(1.0, grad_u.norm());
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Eigen::VectorXd w_trial = w + alpha * (nullspace * grad_u);
      const double f_trial = objective(w_trial);
      if (f_trial > f) {
        w = w_trial;
        f = f_trial;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  return -2.0 * f;
}

}  // namespace mel_testing

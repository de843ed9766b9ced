#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mel/el.hpp"
#include "mel/rng.hpp"

#include "primal_oracle.hpp"

namespace {

using mel_testing::primal_statistic_oracle;

Eigen::MatrixXd column(std::initializer_list<double> values) {
  Eigen::MatrixXd m(values.size(), 1);
  int r = 0;
  for (double v : values) m(r++, 0) = v;
  return m;
}

}  // namespace

TEST_CASE("balanced values solve at lambda zero") {
  mel::ELProblem problem;
  problem.values = column({-3.0, 3.0, -1.5, 1.5});
  const auto solution = mel::solve_dual(problem);
  REQUIRE(solution.status == mel::ElStatus::kConverged);
  CHECK(solution.lambda.norm() == 0.0);
  CHECK(solution.statistic == 0.0);
  for (int l = 0; l < 4; ++l) CHECK(solution.weights[l] == Catch::Approx(0.25));
}

TEST_CASE("origin outside the hull is infeasible") {
  mel::ELProblem problem;
  problem.values = column({1.0, 2.0, 3.0});
  const auto solution = mel::solve_dual(problem);
  CHECK(solution.status == mel::ElStatus::kInfeasibleHull);
  CHECK(mel::el_statistic(problem.values) == mel::kRejectedStatistic);
}

TEST_CASE("two-dimensional half-plane values are infeasible") {
  Eigen::MatrixXd values(5, 2);
  values << 1.0, 0.1, 2.0, -0.3, 0.5, 0.2, 1.5, -0.1, 0.7, 0.4;
  const auto solution = mel::solve_dual({values});
  CHECK(solution.status == mel::ElStatus::kInfeasibleHull);
}

TEST_CASE("identical nonzero values give the rejection sentinel") {
  CHECK(mel::el_statistic(column({2.0, 2.0, 2.0, 2.0})) ==
        mel::kRejectedStatistic);
}

TEST_CASE("all-zero values are the degenerate optimum") {
  const auto solution = mel::solve_dual({column({0.0, 0.0, 0.0})});
  REQUIRE(solution.status == mel::ElStatus::kConverged);
  CHECK(solution.statistic == 0.0);
}

TEST_CASE("mean-zero values give statistic zero") {
  CHECK(mel::el_statistic(column({-2.0, -1.0, 3.0})) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("dual statistic matches the primal oracle on fixtures") {
  const Eigen::MatrixXd a = column({-1.0, 0.5, 0.5, 2.0});
  CHECK(mel::el_statistic(a) ==
        Catch::Approx(primal_statistic_oracle(a.col(0))).margin(1e-6));

  const Eigen::MatrixXd b = column({-0.5, -0.5, 1.0});
  CHECK(mel::el_statistic(b) ==
        Catch::Approx(primal_statistic_oracle(b.col(0))).margin(1e-6));
}

TEST_CASE("dual-primal agreement on random straddling instances") {
  mel::rng::Stream stream(2024, mel::rng::make_stream_id(0, 7));
  int done = 0;
  while (done < 60) {
    const int n = 3 + int(stream.uniform() * 6);  // 3..8
    Eigen::VectorXd v(n);
    for (int l = 0; l < n; ++l) v[l] = 2.0 * stream.uniform() - 1.0 + 0.3 * stream.normal();
    if (!(v.minCoeff() < -1e-3 && v.maxCoeff() > 1e-3)) continue;
    const double dual = mel::el_statistic(v);
    if (dual == mel::kRejectedStatistic) continue;
    const double primal = primal_statistic_oracle(v);
    CHECK(std::abs(dual - primal) <= 1e-6);
    ++done;
  }
}

TEST_CASE("statistic is invariant to nonsingular linear maps of the values") {
  mel::rng::Stream stream(77, mel::rng::make_stream_id(1, 7));
  Eigen::MatrixXd values(7, 2);
  for (int l = 0; l < values.rows(); ++l) {
    values(l, 0) = stream.normal();
    values(l, 1) = stream.normal();
  }
  values.row(6) = -values.topRows(6).colwise().sum();  // ensure straddle

  const double base = mel::el_statistic(values);
  REQUIRE(std::isfinite(base));

  Eigen::Matrix2d map;
  map << 1.7, 0.4, -0.3, 0.9;
  const double mapped = mel::el_statistic(values * map.transpose());
  CHECK(mapped == Catch::Approx(base).margin(1e-8));
}

TEST_CASE("weights sum to one and balance the values at convergence") {
  mel::rng::Stream stream(5150, mel::rng::make_stream_id(2, 7));
  Eigen::MatrixXd values(9, 2);
  for (int l = 0; l < values.rows(); ++l) {
    values(l, 0) = stream.normal() + 0.2;
    values(l, 1) = stream.normal() - 0.1;
  }
  values.row(8) = -values.topRows(8).colwise().sum();

  mel::ELProblem problem;
  problem.values = values;
  const auto solution = mel::solve_dual(problem);
  REQUIRE(solution.status == mel::ElStatus::kConverged);
  CHECK(std::abs(solution.weights.sum() - 1.0) <= 1e-10);
  const Eigen::VectorXd balance = values.transpose() * solution.weights;
  CHECK(balance.norm() <=
        10.0 * problem.tolerance * std::max(1.0, values.rowwise().norm().maxCoeff()));
  for (int l = 0; l < values.rows(); ++l) {
    CHECK(1.0 + solution.lambda.dot(values.row(l)) > 0.0);
  }
  CHECK(solution.statistic >= 0.0);
}

TEST_CASE("exhausted iteration budget is reported as an error") {
  mel::ELProblem problem;
  problem.values = column({-1.0, 0.4, 0.9});
  problem.tolerance = 0.0;  // unreachable
  problem.max_iterations = 3;
  const auto solution = mel::solve_dual(problem);
  CHECK(solution.status == mel::ElStatus::kMaxIterations);
  CHECK_THROWS_AS(mel::el_statistic(problem.values, 0.0, 3),
                  mel::MaxIterationsError);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/Dense>

#include "mel/dgp.hpp"
#include "mel/rng.hpp"
#include "mel/variance.hpp"

namespace {

mel::TwoWayArray two_by_two() {
  mel::TwoWayArray a(2, 2, 1);
  a.at(0, 0) = 1.0;
  a.at(0, 1) = 2.0;
  a.at(1, 0) = 3.0;
  a.at(1, 1) = 4.0;
  return a;
}

// Direct triple-sum implementation of the two-way cluster-robust variance.
Eigen::MatrixXd naive_eww(const mel::TwoWayArray& a, const Eigen::VectorXd& hat) {
  const int N = a.rows(), M = a.cols(), d = a.dim();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      for (int j1 = 0; j1 < M; ++j1) {
        sigma += (a.cell(i, j) - hat) * (a.cell(i, j1) - hat).transpose();
      }
    }
  }
  for (int i = 0; i < N; ++i) {
    for (int i1 = 0; i1 < N; ++i1) {
      for (int j = 0; j < M; ++j) {
        sigma += (a.cell(i, j) - hat) * (a.cell(i1, j) - hat).transpose();
      }
    }
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      sigma -= (a.cell(i, j) - hat) * (a.cell(i, j) - hat).transpose();
    }
  }
  return sigma / (double(N) * N * double(M) * M);
}

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd out(1);
  out[0] = v;
  return out;
}

}  // namespace

TEST_CASE("eww variance of constant arrays is zero") {
  mel::TwoWayArray a(3, 5, 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) a.at(i, j) = 42.0;
  }
  const auto v = mel::eww_variance(a, scalar(42.0));
  CHECK(v.matrix.cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(v.positive_semidefinite);
}

TEST_CASE("eww variance of the 2x2 fixture equals the triple sum") {
  const auto a = two_by_two();
  const auto v = mel::eww_variance(a, scalar(2.5));
  CHECK(v.matrix(0, 0) == Catch::Approx(0.3125).margin(1e-15));
  CHECK(v.matrix(0, 0) ==
        Catch::Approx(naive_eww(a, scalar(2.5))(0, 0)).margin(1e-15));
}

TEST_CASE("eww sufficient-statistic form equals the naive oracle") {
  mel::rng::Stream stream(515, mel::rng::make_stream_id(0, 21));
  for (int N = 2; N <= 6; ++N) {
    for (int M = 2; M <= 6; M += 2) {
      for (int d : {1, 2}) {
        mel::TwoWayArray a(N, M, d);
        for (int i = 0; i < N; ++i) {
          for (int j = 0; j < M; ++j) {
            for (int k = 0; k < d; ++k) a.at(i, j, k) = stream.normal();
          }
        }
        const Eigen::VectorXd hat = mel::full_mean(a);
        const auto fast = mel::eww_variance(a, hat);
        const Eigen::MatrixXd slow = naive_eww(a, hat);
        REQUIRE((fast.matrix - slow).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }
}

TEST_CASE("variances are shift invariant and scale equivariant") {
  mel::rng::Stream stream(626, mel::rng::make_stream_id(0, 21));
  mel::TwoWayArray a(5, 4, 1);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) a.at(i, j) = stream.normal();
  }
  mel::TwoWayArray shifted(5, 4, 1), scaled(5, 4, 1);
  const double c = 3.5;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) {
      shifted.at(i, j) = a.at(i, j) + 11.0;
      scaled.at(i, j) = c * a.at(i, j);
    }
  }
  const auto spec = mel::EstimatorSpec::mean();
  const Eigen::VectorXd hat = mel::full_mean(a);
  const Eigen::VectorXd hat_shift = mel::full_mean(shifted);
  const Eigen::VectorXd hat_scale = mel::full_mean(scaled);

  const double eww = mel::eww_variance(a, hat).matrix(0, 0);
  const double iid = mel::iid_variance(a, hat).matrix(0, 0);
  const double mmw = mel::mmw_variance(a, spec).matrix(0, 0);

  CHECK(mel::eww_variance(shifted, hat_shift).matrix(0, 0) ==
        Catch::Approx(eww).margin(1e-12));
  CHECK(mel::iid_variance(shifted, hat_shift).matrix(0, 0) ==
        Catch::Approx(iid).margin(1e-12));
  CHECK(mel::mmw_variance(shifted, spec).matrix(0, 0) ==
        Catch::Approx(mmw).margin(1e-12));

  CHECK(mel::eww_variance(scaled, hat_scale).matrix(0, 0) ==
        Catch::Approx(c * c * eww).margin(1e-10));
  CHECK(mel::iid_variance(scaled, hat_scale).matrix(0, 0) ==
        Catch::Approx(c * c * iid).margin(1e-10));
  CHECK(mel::mmw_variance(scaled, spec).matrix(0, 0) ==
        Catch::Approx(c * c * mmw).margin(1e-10));
}

TEST_CASE("iid variance of the 2x2 fixture") {
  const auto v = mel::iid_variance(two_by_two(), scalar(2.5));
  CHECK(v.matrix(0, 0) == Catch::Approx((5.0 / 3.0) / 4.0).margin(1e-15));
}

TEST_CASE("iid variance is near 1/NM for standard normal cells") {
  mel::RandomEffectDGP dgp;
  dgp.sigma2 = 0.0;
  dgp.theta = 0.0;
  dgp.rows = 120;
  dgp.cols = 90;
  const auto a = mel::generate(dgp, 77, 0);
  const auto v = mel::iid_variance(a, mel::full_mean(a));
  CHECK(v.matrix(0, 0) == Catch::Approx(1.0 / (120.0 * 90.0)).epsilon(0.1));
}

TEST_CASE("eww scalar variance matches the iid target on independent cells") {
  // Degenerate case: cells i.i.d. N(0,1), NM * EWW should be close to one
  // on average.
  mel::RandomEffectDGP dgp;
  dgp.sigma2 = 0.0;
  dgp.theta = 0.0;
  dgp.rows = 100;
  dgp.cols = 100;
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto a = mel::generate(dgp, 909, r);
    total += mel::eww_variance(a, mel::full_mean(a)).matrix(0, 0);
  }
  const double scaled = (total / reps) * 100.0 * 100.0;
  CHECK(std::abs(scaled - 1.0) <= 0.15);
}

TEST_CASE("mmw variance of the 2x2 fixture matches the hand assembly") {
  // n^-1 sum V^2 = 22.5 / 4, n^-1 sum Q^2 = 1.25 / 4, difference / n.
  const auto v = mel::mmw_variance(two_by_two(), mel::EstimatorSpec::mean());
  CHECK(v.matrix(0, 0) == Catch::Approx(1.328125).margin(1e-12));
  CHECK(v.positive_semidefinite);
}

TEST_CASE("mmw variance of constant arrays fails positive definiteness") {
  mel::TwoWayArray a(3, 3, 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a.at(i, j) = 1.0;
  }
  CHECK_THROWS_AS(mel::mmw_variance(a, mel::EstimatorSpec::mean()),
                  mel::CorrectionNotPdError);
}

TEST_CASE("wald statistic basics") {
  mel::VarianceEstimate v;
  v.matrix = Eigen::MatrixXd::Constant(1, 1, 4.0);
  v.kind = mel::VarianceKind::kIid;
  CHECK(mel::wald_statistic(scalar(3.0), scalar(3.0), v) == Catch::Approx(0.0));
  CHECK(mel::wald_statistic(scalar(3.0), scalar(1.0), v) == Catch::Approx(1.0));

  mel::VarianceEstimate singular;
  singular.matrix = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(mel::wald_statistic(scalar(1.0), scalar(0.0), singular),
                  mel::SingularVarianceError);
}

TEST_CASE("negative eww variance invalidates the wald interval") {
  mel::TwoWayArray a(2, 2, 1);
  a.at(0, 0) = 0.0;
  a.at(0, 1) = 1.0;
  a.at(1, 0) = 1.0;
  a.at(1, 1) = 0.0;
  const auto v = mel::eww_variance(a, scalar(0.5));
  CHECK(v.matrix(0, 0) < 0.0);
  CHECK_FALSE(v.positive_semidefinite);
  const auto ci = mel::wald_interval(0.5, v.matrix(0, 0), 0.95);
  CHECK_FALSE(ci.valid);
}

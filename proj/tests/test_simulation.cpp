#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mel/dgp.hpp"
#include "mel/edgeworth.hpp"
#include "mel/experiment.hpp"
#include "mel/rng.hpp"

TEST_CASE("degenerate random-effect draws have no row or column effects") {
  mel::RandomEffectDGP dgp;
  dgp.sigma2 = 0.0;
  dgp.rows = 10;
  dgp.cols = 6;
  mel::HoeffdingOracle oracle;
  const auto a = mel::generate(dgp, 123, 0, &oracle);
  CHECK(oracle.row_effects.cwiseAbs().maxCoeff() == 0.0);
  CHECK(oracle.col_effects.cwiseAbs().maxCoeff() == 0.0);
  CHECK(oracle.var_L_row == 0.0);
  CHECK(oracle.sigma_L2() == 0.0);
  CHECK(a.all_finite());
}

TEST_CASE("hoeffding reconstruction is exact for both designs") {
  mel::RandomEffectDGP re;
  re.sigma2 = 0.7;
  re.rows = 7;
  re.cols = 9;
  mel::HoeffdingOracle oracle;
  const auto a = mel::generate(re, 55, 3, &oracle);
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      REQUIRE(a.at(i, j) == Catch::Approx(oracle.reconstruct(i, j)).margin(1e-12));
    }
  }

  mel::BipartiteSBMDGP sbm;
  sbm.theta = 0.1;
  sbm.rows = 8;
  sbm.cols = 11;
  mel::HoeffdingOracle sbm_oracle;
  const auto b = mel::generate(sbm, 56, 4, &sbm_oracle);
  for (int i = 0; i < b.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      REQUIRE(b.at(i, j) ==
              Catch::Approx(sbm_oracle.reconstruct(i, j)).margin(1e-12));
      REQUIRE((b.at(i, j) == 0.0 || b.at(i, j) == 1.0));
    }
  }
}

TEST_CASE("sbm scaling and the scale error") {
  mel::BipartiteSBMDGP dgp;
  dgp.theta = 0.5;
  CHECK(dgp.base_mean() == Catch::Approx(0.494).margin(1e-15));
  CHECK(dgp.scale() == Catch::Approx(0.5 / 0.494).margin(1e-12));

  mel::BipartiteSBMDGP too_dense = dgp;
  too_dense.theta = 0.8;  // scale * max(S) = 1.133 > 1
  CHECK_THROWS_AS(mel::generate(too_dense, 1, 0), mel::SbmScaleError);
}

TEST_CASE("row-mean variance matches the random-effect moments") {
  // Pooled across replications, Var(row mean) = sigma2 + (sigma2 + 1)/M.
  mel::RandomEffectDGP dgp;
  dgp.sigma2 = 1.0;
  dgp.rows = 100;
  dgp.cols = 10;
  const int reps = 100;
  double sum = 0.0, sum2 = 0.0;
  int count = 0;
  for (int r = 0; r < reps; ++r) {
    const auto a = mel::generate(dgp, 2468, r);
    for (int i = 0; i < a.rows(); ++i) {
      double m = 0.0;
      for (int j = 0; j < a.cols(); ++j) m += a.at(i, j);
      m /= a.cols();
      sum += m;
      sum2 += m * m;
      ++count;
    }
  }
  const double mean = sum / count;
  const double var = sum2 / count - mean * mean;
  const double target = dgp.sigma2 + (dgp.sigma2 + 1.0) / dgp.cols;
  CHECK(std::abs(var - target) <= 0.05 * target);
}

TEST_CASE("realized component variances approach the population values") {
  mel::RandomEffectDGP dgp;
  dgp.sigma2 = 1.0;
  dgp.rows = 200;
  dgp.cols = 200;
  const int seeds = 100;
  double row_var = 0.0, resid_var = 0.0;
  for (int s = 0; s < seeds; ++s) {
    mel::HoeffdingOracle oracle;
    (void)mel::generate(dgp, 1357, s, &oracle);
    const double rm = oracle.row_effects.mean();
    row_var += (oracle.row_effects.array() - rm).square().sum() /
               (oracle.row_effects.size() - 1);
    const double em = oracle.residual.mean();
    resid_var += (oracle.residual.array() - em).square().sum() /
                 (oracle.residual.size() - 1.0);
  }
  CHECK(std::abs(row_var / seeds - dgp.sigma2) <= 0.05 * dgp.sigma2);
  CHECK(std::abs(resid_var / seeds - 1.0) <= 0.05);

  // sigma_L^2 closed form for this design.
  mel::HoeffdingOracle oracle;
  (void)mel::generate(dgp, 1357, 0, &oracle);
  const double n = dgp.rows + dgp.cols;
  CHECK(oracle.sigma_L2() ==
        Catch::Approx(n * (dgp.sigma2 / dgp.rows + dgp.sigma2 / dgp.cols))
            .margin(1e-12));
  CHECK(oracle.sigma_R2() == 1.0);
}

TEST_CASE("edgeworth corrections vanish in the limit and on fixtures") {
  const auto tiny = mel::edgeworth_terms(1000000, 1000000, 1.96);
  CHECK(std::abs(tiny.wald) <= 1e-4);
  CHECK(std::abs(tiny.mmel) <= 1e-4);
  CHECK(std::abs(tiny.mmel_no_c) <= 1e-4);

  // Frozen closed-form evaluations at N = M = 50, t = 1.96.
  const auto at50 = mel::edgeworth_terms(50, 50, 1.96);
  CHECK(at50.wald == Catch::Approx(0.01567331893826827).margin(1e-15));
  CHECK(at50.mmel == Catch::Approx(0.005832544206263264).margin(1e-15));
  CHECK(at50.mmel_no_c == Catch::Approx(0.010414314242005859).margin(1e-15));
}

TEST_CASE("modified corrections dominate the wald correction on the grid") {
  for (int N : {5, 10, 20, 50, 100, 200}) {
    for (int M : {5, 10, 20, 50, 100, 200}) {
      for (double t : {1.64, 1.96, 2.58}) {
        const auto terms = mel::edgeworth_terms(N, M, t);
        REQUIRE(std::abs(terms.mmel) < std::abs(terms.wald));
        REQUIRE(std::abs(terms.mmel_no_c) < std::abs(terms.wald));
      }
    }
  }
}

TEST_CASE("experiment config parsing") {
  std::stringstream config(
      "# coverage experiment\n"
      "dgp = random_effect\n"
      "N = 50\n"
      "M = 5, 10\n"
      "sigma2 = 1, 0\n"
      "methods = mel, mmel, eww\n"
      "level = 0.95\n"
      "replications = 12\n"
      "seed = 777\n"
      "output = smoke\n");
  const auto parsed = mel::parse_experiment_config(config);
  CHECK(parsed.rows == 50);
  CHECK(parsed.cols_list == std::vector<int>{5, 10});
  CHECK(parsed.params == std::vector<double>{1.0, 0.0});
  CHECK(parsed.methods.size() == 3);
  CHECK(parsed.seed == 777);

  std::stringstream bad("dgp = random_effect\nbogus = 1\n");
  try {
    mel::parse_experiment_config(bad);
    FAIL("expected ConfigError");
  } catch (const mel::ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("zero replications give an empty report with zero counts") {
  mel::ExperimentConfig config;
  config.replications = 0;
  config.cols_list = {5};
  config.params = {1.0};
  const auto report = mel::run_experiment(config);
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].replications == 0);
  for (const auto& m : report.cells[0].methods) {
    CHECK(m.covered == 0);
    CHECK(m.failures() == 0);
  }
}

TEST_CASE("reports are identical across worker counts and reruns") {
  mel::ExperimentConfig config;
  config.dgp = mel::DgpKind::kRandomEffect;
  config.rows = 20;
  config.cols_list = {6};
  config.params = {1.0, 0.0};
  config.replications = 60;
  config.seed = 13131;

  auto render = [](const mel::CoverageReport& report) {
    std::stringstream out;
    report.write_csv(out);
    return out.str();
  };

  config.workers = 1;
  const std::string serial = render(mel::run_experiment(config));
  config.workers = 4;
  const std::string parallel = render(mel::run_experiment(config));
  const std::string again = render(mel::run_experiment(config));
  CHECK(serial == parallel);
  CHECK(parallel == again);
}

TEST_CASE("smoke coverage is in a plausible range") {
  mel::ExperimentConfig config;
  config.dgp = mel::DgpKind::kRandomEffect;
  config.rows = 25;
  config.cols_list = {10};
  config.params = {1.0};
  config.methods = {mel::Method::kMmel, mel::Method::kIid};
  config.replications = 150;
  config.seed = 99;
  const auto report = mel::run_experiment(config);
  REQUIRE(report.cells.size() == 1);
  const auto& cell = report.cells[0];
  const double mmel_cov = cell.methods[0].coverage(cell.replications);
  const double iid_cov = cell.methods[1].coverage(cell.replications);
  CHECK(mmel_cov >= 0.80);
  CHECK(iid_cov <= 0.70);  // iid badly undercovers under strong effects
}

TEST_CASE("coverage csv round trips through the table reader") {
  mel::ExperimentConfig config;
  config.rows = 10;
  config.cols_list = {4};
  config.params = {0.0};
  config.methods = {mel::Method::kMel, mel::Method::kEww};
  config.replications = 20;
  const auto report = mel::run_experiment(config);

  std::stringstream csv;
  report.write_csv(csv);
  const auto back = mel::read_coverage_csv(csv);
  REQUIRE(back.cells.size() == report.cells.size());
  CHECK(back.cells[0].methods.size() == 2);
  CHECK(back.cells[0].methods[0].covered == report.cells[0].methods[0].covered);

  std::stringstream table;
  back.write_table(table);
  CHECK(table.str().find("coverage") != std::string::npos);
}

// Command-line surface for multiway empirical likelihood inference:
//   ci        confidence sets / intervals from a CSV data file
//   simulate  Monte Carlo coverage experiments from a config file
//   table     render a coverage CSV as a text table
//
// Exit codes: 0 success, 2 data or configuration error, 3 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mel/edgeworth.hpp"
#include "mel/experiment.hpp"
#include "mel/io.hpp"
#include "mel/mel.hpp"
#include "mel/threeway.hpp"
#include "mel/variance.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDataError = 2;
constexpr int kExitNumericalFailure = 3;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CiOptions {
  std::string data_path;
  std::string estimator = "mean";
  std::string methods = "mmel";
  double level = 0.95;
  bool clip_correction = false;
  std::string format = "text";
  int covariates = 1;
  int ht_y_col = 0;
  int ht_w_col = 1;
};

mel::EstimatorSpec make_estimator_spec(const CiOptions& opt) {
  if (opt.estimator == "mean") return mel::EstimatorSpec::mean();
  if (opt.estimator == "ht") {
    mel::HTSettings ht;
    ht.y_component = opt.ht_y_col;
    ht.weight_component = opt.ht_w_col;
    return mel::EstimatorSpec::horvitz_thompson(ht);
  }
  if (opt.estimator == "logit") {
    mel::LogitSettings logit;
    logit.covariate_dimension = opt.covariates;
    return mel::EstimatorSpec::composite_logit(logit);
  }
  auto gee = [&](mel::GeeFamily family) {
    mel::GEESettings s;
    s.family = family;
    s.covariate_dimension = opt.covariates;
    return mel::EstimatorSpec::gee_function(s);
  };
  if (opt.estimator == "gee-gaussian") return gee(mel::GeeFamily::kIdentityGaussian);
  if (opt.estimator == "gee-logit") return gee(mel::GeeFamily::kLogitBernoulli);
  if (opt.estimator == "gee-poisson") return gee(mel::GeeFamily::kLogPoisson);
  throw mel::ConfigError("unknown estimator '" + opt.estimator + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct MethodReport {
  std::string method;
  bool ok = false;
  std::string status;
  double lower = 0.0, upper = 0.0;
  double statistic_at_estimate = 0.0;
  bool has_interval = false;
  bool non_interval_flag = false;
  bool clipped = false;
};

void print_report(const std::vector<double>& estimate,
                  const std::vector<MethodReport>& reports, double level,
                  const std::string& format) {
  if (format == "json-lines") {
    {
      nlohmann::json line;
      line["estimate"] = estimate;
      std::cout << line.dump() << "\n";
    }
    for (const auto& r : reports) {
      nlohmann::json line;
      line["method"] = r.method;
      line["level"] = level;
      line["status"] = r.status;
      if (r.has_interval) {
        line["lower"] = r.lower;
        line["upper"] = r.upper;
      }
      if (r.ok) line["statistic_at_estimate"] = r.statistic_at_estimate;
      if (r.non_interval_flag) line["possibly_non_interval"] = true;
      if (r.clipped) line["clipped_correction"] = true;
      std::cout << line.dump() << "\n";
    }
    return;
  }
  std::cout << "estimate";
  for (double v : estimate) std::cout << ' ' << fmt17(v);
  std::cout << "\n";
  for (const auto& r : reports) {
    std::cout << "method=" << r.method << " level=" << fmt17(level);
    if (r.has_interval) {
      std::cout << " lower=" << fmt17(r.lower) << " upper=" << fmt17(r.upper);
    }
    std::cout << " status=" << r.status;
    if (r.non_interval_flag) std::cout << " possibly-non-interval";
    if (r.clipped) std::cout << " clipped-correction";
    std::cout << "\n";
  }
}

int run_ci_two_way(const CiOptions& opt, const mel::TwoWayArray& array) {
  const mel::EstimatorSpec spec = make_estimator_spec(opt);
  const auto policy = opt.clip_correction
                          ? mel::CorrectionPolicy::kClipEigenvalues
                          : mel::CorrectionPolicy::kStrict;
  const auto methods = split_list(opt.methods);
  if (methods.empty()) throw mel::ConfigError("no methods requested");

  bool need_pairs = false;
  for (const auto& m : methods) {
    need_pairs |= (m == "mmel" || m == "mmel-noc" || m == "mmw");
  }
  mel::TwoWayMelEngine engine(spec, array, need_pairs);
  const Eigen::VectorXd theta_hat = engine.point_estimate();
  const int d = engine.dim();

  std::vector<MethodReport> reports;
  int successes = 0;
  for (const auto& name : methods) {
    MethodReport report;
    report.method = name;
    try {
      if (name == "mel" || name == "mmel" || name == "mmel-noc") {
        if (d != 1) {
          throw mel::DataError(
              "interval inversion requires a scalar parameter (d = " +
              std::to_string(d) + ")");
        }
        const auto kind = name == "mel" ? mel::StatisticKind::kMel
                          : name == "mmel" ? mel::StatisticKind::kMmel
                                           : mel::StatisticKind::kMmelNoC;
        const auto set =
            mel::invert_confidence_interval(spec, array, opt.level, kind, policy);
        report.lower = set.lower;
        report.upper = set.upper;
        report.has_interval = true;
        report.non_interval_flag = set.possibly_non_interval;
        report.statistic_at_estimate = 0.0;
        report.ok = true;
        report.status = "ok";
      } else if (name == "mmw" || name == "eww" || name == "iid") {
        mel::VarianceEstimate variance;
        if (name == "mmw") {
          variance = mel::mmw_variance_from_engine(engine, true, policy);
          report.clipped = variance.clipped;
        } else if (name == "eww") {
          variance = mel::eww_variance(array, theta_hat);
        } else {
          variance = mel::iid_variance(array, theta_hat);
        }
        if (d != 1) {
          // Componentwise intervals for vector parameters.
          report.status = "ok (componentwise)";
          report.ok = true;
          std::cout << "method=" << name << " componentwise intervals:\n";
          for (int k = 0; k < d; ++k) {
            const auto ci = mel::wald_interval(theta_hat[k],
                                               variance.matrix(k, k), opt.level);
            std::cout << "  component " << (k + 1) << ": ";
            if (ci.valid) {
              std::cout << fmt17(ci.lower) << " .. " << fmt17(ci.upper) << "\n";
            } else {
              std::cout << "invalid (non-positive variance)\n";
            }
          }
          ++successes;
          reports.push_back(report);
          continue;
        }
        const auto ci =
            mel::wald_interval(theta_hat[0], variance.matrix(0, 0), opt.level);
        if (!ci.valid) {
          report.status = "failed: non-positive variance estimate";
        } else {
          report.lower = ci.lower;
          report.upper = ci.upper;
          report.has_interval = true;
          report.ok = true;
          report.status = variance.positive_semidefinite ? "ok" : "ok (non-psd)";
        }
      } else {
        throw mel::ConfigError("unknown method '" + name + "'");
      }
    } catch (const mel::ConfigError&) {
      throw;
    } catch (const mel::Error& e) {
      report.status = std::string("failed: ") + e.what();
    }
    if (report.ok) ++successes;
    reports.push_back(report);
  }

  std::vector<double> estimate(theta_hat.data(), theta_hat.data() + d);
  print_report(estimate, reports, opt.level, opt.format);
  return successes > 0 ? kExitOk : kExitNumericalFailure;
}

int run_ci_three_way(const CiOptions& opt, const mel::ThreeWayArray& array) {
  if (opt.estimator != "mean") {
    throw mel::ConfigError("three-way data supports the mean estimator only");
  }
  const auto methods = split_list(opt.methods);
  mel::ThreeWayMelEngine engine(array);
  const Eigen::VectorXd theta_hat = engine.point_estimate();
  const int d = engine.dim();
  const double threshold = mel::stats::chi_squared_quantile(d, opt.level);

  std::vector<MethodReport> reports;
  int successes = 0;
  for (const auto& name : methods) {
    MethodReport report;
    report.method = name;
    try {
      if (name != "mel" && name != "mmel") {
        throw mel::ConfigError("three-way data supports methods mel and mmel");
      }
      if (d != 1) throw mel::DataError("three-way intervals require d = 1");
      auto stat = [&](double x) {
        Eigen::VectorXd theta(1);
        theta[0] = x;
        return name == "mel" ? engine.mel(theta) : engine.mmel(theta);
      };
      // Bracket on the pseudo-value second moment scale, then bisect.
      const double scale = std::sqrt(std::max(
          engine.pseudo_value_second_moment()(0, 0) /
              engine.pseudo_value_count(),
          1e-24));
      auto crossing = [&](int direction) {
        double step = 8.0 * scale;
        double inside = theta_hat[0];
        double outside = inside + direction * step;
        int doublings = 0;
        while (stat(outside) <= threshold) {
          inside = outside;
          step *= 2.0;
          outside = theta_hat[0] + direction * step;
          if (++doublings > 60) {
            throw mel::BracketFailureError("no crossing within 60 doublings");
          }
        }
        const double tol = 1e-8 * std::max(1.0, std::abs(theta_hat[0]));
        while (std::abs(outside - inside) > tol) {
          const double mid = 0.5 * (inside + outside);
          (stat(mid) <= threshold ? inside : outside) = mid;
        }
        return 0.5 * (inside + outside);
      };
      report.upper = crossing(+1);
      report.lower = crossing(-1);
      report.has_interval = true;
      report.ok = true;
      report.status = "ok";
    } catch (const mel::ConfigError&) {
      throw;
    } catch (const mel::Error& e) {
      report.status = std::string("failed: ") + e.what();
    }
    if (report.ok) ++successes;
    reports.push_back(report);
  }

  std::vector<double> estimate(theta_hat.data(), theta_hat.data() + d);
  print_report(estimate, reports, opt.level, opt.format);
  return successes > 0 ? kExitOk : kExitNumericalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiway empirical likelihood inference"};
  app.require_subcommand(1);

  CiOptions ci;
  auto* ci_cmd = app.add_subcommand("ci", "confidence sets from a data file");
  ci_cmd->add_option("--data", ci.data_path, "CSV data file (i,j[,t],v1..vd)")
      ->required();
  ci_cmd->add_option("--estimator", ci.estimator,
                     "mean | ht | logit | gee-gaussian | gee-logit | gee-poisson");
  ci_cmd->add_option("--method", ci.methods,
                     "comma list of mel,mmel,mmel-noc,mmw,eww,iid");
  ci_cmd->add_option("--level", ci.level, "coverage level in (0,1)");
  ci_cmd->add_flag("--clip-correction", ci.clip_correction,
                   "floor the corrected spectrum instead of failing");
  ci_cmd->add_option("--format", ci.format, "text | json-lines");
  ci_cmd->add_option("--covariates", ci.covariates,
                     "covariate count for logit / gee estimators");
  ci_cmd->add_option("--ht-y-col", ci.ht_y_col, "HT outcome component (0-based)");
  ci_cmd->add_option("--ht-w-col", ci.ht_w_col, "HT weight component (0-based)");

  std::string sim_config, sim_out = ".";
  int sim_replications = -1;
  long long sim_seed = -1;
  int sim_workers = -1;
  auto* sim_cmd = app.add_subcommand("simulate", "run a coverage experiment");
  sim_cmd->add_option("--config", sim_config, "experiment config file")->required();
  sim_cmd->add_option("--out", sim_out, "output directory");
  sim_cmd->add_option("--replications", sim_replications, "override replications");
  sim_cmd->add_option("--seed", sim_seed, "override master seed");
  sim_cmd->add_option("--workers", sim_workers, "worker threads (1 = serial)");

  std::string table_in, table_style = "paper";
  auto* table_cmd = app.add_subcommand("table", "render a coverage CSV");
  table_cmd->add_option("--in", table_in, "coverage CSV file")->required();
  table_cmd->add_option("--style", table_style, "table style (paper)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ci_cmd->parsed()) {
      if (!(ci.level > 0.0 && ci.level < 1.0)) {
        throw mel::ConfigError("level must be in (0,1)");
      }
      const int indices = mel::csv_index_count(ci.data_path);
      if (indices == 2) {
        return run_ci_two_way(ci, mel::read_two_way_csv_file(ci.data_path));
      }
      return run_ci_three_way(ci, mel::read_three_way_csv_file(ci.data_path));
    }

    if (sim_cmd->parsed()) {
      mel::ExperimentConfig config = mel::parse_experiment_config_file(sim_config);
      if (sim_replications >= 0) config.replications = sim_replications;
      if (sim_seed >= 0) {
        config.seed = std::uint64_t(sim_seed);
      } else if (const char* env_seed = std::getenv("MEL_SEED")) {
        config.seed = std::stoull(env_seed);
      }
      if (sim_workers >= 0) config.workers = sim_workers;

      const mel::CoverageReport report = mel::run_experiment(config);
      std::filesystem::create_directories(sim_out);
      const auto base = std::filesystem::path(sim_out) / config.output_name;
      {
        std::ofstream csv(base.string() + ".csv", std::ios::binary);
        if (!csv) throw mel::DataError("cannot write " + base.string() + ".csv");
        report.write_csv(csv);
      }
      {
        std::ofstream txt(base.string() + ".txt", std::ios::binary);
        if (!txt) throw mel::DataError("cannot write " + base.string() + ".txt");
        report.write_table(txt);
      }
      report.write_table(std::cout);
      return kExitOk;
    }

    if (table_cmd->parsed()) {
      if (table_style != "paper") {
        throw mel::ConfigError("unknown table style '" + table_style + "'");
      }
      std::ifstream in(table_in);
      if (!in) throw mel::DataError("cannot open '" + table_in + "'");
      const auto report = mel::read_coverage_csv(in);
      report.write_table(std::cout);
      return kExitOk;
    }
  } catch (const mel::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const mel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const mel::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalFailure;
  }
  return kExitOk;
}

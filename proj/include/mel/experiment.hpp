#pragma once

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mel/dgp.hpp"
#include "mel/errors.hpp"
#include "mel/mel.hpp"
#include "mel/stats.hpp"
#include "mel/threeway.hpp"
#include "mel/variance.hpp"

namespace mel {

enum class Method { kMel, kMmel, kMmelNoC, kMmw, kEww, kIid };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kMel: return "mel";
    case Method::kMmel: return "mmel";
    case Method::kMmelNoC: return "mmel-noc";
    case Method::kMmw: return "mmw";
    case Method::kEww: return "eww";
    case Method::kIid: return "iid";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  if (name == "mel") return Method::kMel;
  if (name == "mmel") return Method::kMmel;
  if (name == "mmel-noc") return Method::kMmelNoC;
  if (name == "mmw") return Method::kMmw;
  if (name == "eww") return Method::kEww;
  if (name == "iid") return Method::kIid;
  throw ConfigError("unknown method '" + name + "'");
}

enum class DgpKind { kRandomEffect, kSbm, kThreeWayRandomEffect };

inline const char* dgp_name(DgpKind kind) {
  switch (kind) {
    case DgpKind::kRandomEffect: return "random_effect";
    case DgpKind::kSbm: return "sbm";
    case DgpKind::kThreeWayRandomEffect: return "threeway_random_effect";
  }
  return "?";
}

/// One coverage experiment: a DGP, an N, a list of M values, a parameter
/// grid (sigma2 for the random-effect designs, theta for the block model),
/// the methods to compare, and the Monte Carlo controls.
struct ExperimentConfig {
  DgpKind dgp = DgpKind::kRandomEffect;
  int rows = 50;
  std::vector<int> cols_list{5};
  int slabs = 40;  // three-way only
  std::vector<double> params{1.0};
  double mean = 1.0;            // true mean of the random-effect designs
  double sigma2_pair = 0.0;     // three-way pairwise interaction variance
  std::vector<Method> methods{Method::kMel, Method::kMmel, Method::kMmw,
                              Method::kEww, Method::kIid};
  double level = 0.95;
  int replications = 2000;
  std::uint64_t seed = 20240817;
  int workers = 0;  // 0: hardware concurrency
  std::string output_name = "coverage";
};

struct MethodCoverage {
  Method method = Method::kMel;
  int covered = 0;
  int fail_not_pd = 0;
  int fail_nonconvergence = 0;
  int fail_other = 0;

  int failures() const { return fail_not_pd + fail_nonconvergence + fail_other; }
  double coverage(int replications) const {
    return replications > 0 ? double(covered) / replications : 0.0;
  }
};

struct CoverageCell {
  DgpKind dgp = DgpKind::kRandomEffect;
  int rows = 0, cols = 0, slabs = 0;
  double param = 0.0;
  double level = 0.95;
  int replications = 0;
  std::vector<MethodCoverage> methods;

  /// A cell is flagged when any method failed on more than 1% of
  /// replications.
  bool flagged() const {
    for (const auto& m : methods) {
      if (replications > 0 && m.failures() > replications / 100) return true;
    }
    return false;
  }
};

struct CoverageReport {
  std::vector<CoverageCell> cells;

  void write_csv(std::ostream& out) const {
    out << "dgp,N,M,T,param,level,method,replications,covered,coverage,"
           "mc_se,fail_not_pd,fail_nonconvergence,fail_other,flagged\n";
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    for (const auto& cell : cells) {
      for (const auto& m : cell.methods) {
        const double p = m.coverage(cell.replications);
        out << dgp_name(cell.dgp) << ',' << cell.rows << ',' << cell.cols << ','
            << cell.slabs << ',' << num(cell.param) << ',' << num(cell.level)
            << ',' << method_name(m.method) << ',' << cell.replications << ','
            << m.covered << ',' << num(p) << ','
            << num(stats::proportion_se(p, cell.replications)) << ','
            << m.fail_not_pd << ',' << m.fail_nonconvergence << ','
            << m.fail_other << ',' << (cell.flagged() ? 1 : 0) << "\n";
      }
    }
  }

  /// Text table in the usual coverage-table layout: one row per (M, param)
  /// pair, one column per method, three decimals.
  void write_table(std::ostream& out) const {
    if (cells.empty()) {
      out << "(empty report)\n";
      return;
    }
    out << "coverage, dgp=" << dgp_name(cells.front().dgp)
        << ", N=" << cells.front().rows;
    if (cells.front().dgp == DgpKind::kThreeWayRandomEffect) {
      out << ", T=" << cells.front().slabs;
    }
    out << ", level=" << std::fixed << std::setprecision(2)
        << cells.front().level << "\n";
    out << std::setw(6) << "M" << std::setw(10) << "param";
    for (const auto& m : cells.front().methods) {
      out << std::setw(10) << method_name(m.method);
    }
    out << "\n";
    for (const auto& cell : cells) {
      std::ostringstream param;
      param << cell.param;
      out << std::setw(6) << cell.cols << std::setw(10) << param.str();
      for (const auto& m : cell.methods) {
        out << std::setw(10) << std::fixed << std::setprecision(3)
            << m.coverage(cell.replications);
      }
      if (cell.flagged()) out << "  *";
      out << "\n";
    }
    out << "(* = some method failed on more than 1% of replications)\n";
  }
};

/// Reads back a coverage CSV produced by CoverageReport::write_csv.
inline CoverageReport read_coverage_csv(std::istream& in) {
  CoverageReport report;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty coverage csv");
  int line_number = 1;
  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    return fields;
  };
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() < 15) {
      throw DataError("coverage csv line " + std::to_string(line_number) +
                      ": expected 15 fields");
    }
    DgpKind dgp;
    if (f[0] == "random_effect") dgp = DgpKind::kRandomEffect;
    else if (f[0] == "sbm") dgp = DgpKind::kSbm;
    else if (f[0] == "threeway_random_effect") dgp = DgpKind::kThreeWayRandomEffect;
    else throw DataError("coverage csv line " + std::to_string(line_number) +
                         ": unknown dgp '" + f[0] + "'");
    try {
      const int rows = std::stoi(f[1]);
      const int cols = std::stoi(f[2]);
      const int slabs = std::stoi(f[3]);
      const double param = std::stod(f[4]);
      const double level = std::stod(f[5]);
      MethodCoverage mc;
      mc.method = parse_method(f[6]);
      const int replications = std::stoi(f[7]);
      mc.covered = std::stoi(f[8]);
      mc.fail_not_pd = std::stoi(f[11]);
      mc.fail_nonconvergence = std::stoi(f[12]);
      mc.fail_other = std::stoi(f[13]);

      CoverageCell* cell = nullptr;
      if (!report.cells.empty()) {
        auto& last = report.cells.back();
        if (last.dgp == dgp && last.rows == rows && last.cols == cols &&
            last.slabs == slabs && last.param == param && last.level == level) {
          cell = &last;
        }
      }
      if (cell == nullptr) {
        CoverageCell fresh;
        fresh.dgp = dgp;
        fresh.rows = rows;
        fresh.cols = cols;
        fresh.slabs = slabs;
        fresh.param = param;
        fresh.level = level;
        fresh.replications = replications;
        report.cells.push_back(fresh);
        cell = &report.cells.back();
      }
      cell->methods.push_back(mc);
    } catch (const std::invalid_argument&) {
      throw DataError("coverage csv line " + std::to_string(line_number) +
                      ": bad numeric field");
    }
  }
  return report;
}

/// Key = value configuration file. Lists are comma separated; '#' starts a
/// comment. Unknown keys are an error, named in the message.
inline ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig config;
  bool saw_methods = false, saw_params = false;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto trim = [](const std::string& s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto parse_doubles = [&](const std::string& v) {
      std::vector<double> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          out.push_back(std::stod(trim(item)));
        } catch (const std::exception&) {
          throw ConfigError("config key '" + key + "': bad number '" +
                            trim(item) + "'");
        }
      }
      if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
      return out;
    };
    auto parse_one_int = [&](const std::string& v) {
      try {
        return std::stoi(trim(v));
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
      }
    };

    if (key == "dgp") {
      if (value == "random_effect") config.dgp = DgpKind::kRandomEffect;
      else if (value == "sbm") config.dgp = DgpKind::kSbm;
      else if (value == "threeway_random_effect")
        config.dgp = DgpKind::kThreeWayRandomEffect;
      else throw ConfigError("unknown dgp '" + value + "'");
    } else if (key == "N") {
      config.rows = parse_one_int(value);
    } else if (key == "M") {
      config.cols_list.clear();
      for (double v : parse_doubles(value)) config.cols_list.push_back(int(v));
    } else if (key == "T") {
      config.slabs = parse_one_int(value);
    } else if (key == "sigma2" || key == "theta") {
      config.params = parse_doubles(value);
      saw_params = true;
    } else if (key == "sigma2_pair") {
      config.sigma2_pair = parse_doubles(value).front();
    } else if (key == "mean") {
      config.mean = parse_doubles(value).front();
    } else if (key == "methods") {
      config.methods.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        config.methods.push_back(parse_method(trim(item)));
      }
      saw_methods = true;
    } else if (key == "level") {
      config.level = parse_doubles(value).front();
    } else if (key == "replications") {
      config.replications = parse_one_int(value);
    } else if (key == "seed") {
      try {
        config.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw ConfigError("config key 'seed': bad integer '" + value + "'");
      }
    } else if (key == "workers") {
      config.workers = parse_one_int(value);
    } else if (key == "output") {
      config.output_name = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (config.dgp == DgpKind::kThreeWayRandomEffect) {
    if (!saw_methods) config.methods = {Method::kMel, Method::kMmel};
    for (Method m : config.methods) {
      if (m != Method::kMel && m != Method::kMmel) {
        throw ConfigError(std::string("method '") + method_name(m) +
                          "' is not available for three-way experiments");
      }
    }
  }
  if (!saw_params && config.dgp == DgpKind::kSbm) config.params = {0.5};
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw ConfigError("level must be in (0,1)");
  }
  if (config.replications < 0) throw ConfigError("replications must be >= 0");
  if (config.rows < 2) throw ConfigError("N must be at least 2");
  return config;
}

inline ExperimentConfig parse_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_experiment_config(in);
}

namespace experiment_detail {

struct ReplicationOutcome {
  bool covered = false;
  int fail_kind = 0;  // 0 ok, 1 not-pd, 2 nonconvergence, 3 other
};

template <class MakeArray>
void run_cell(const std::vector<Method>& methods, int replications,
              int workers, double level, double theta_true,
              MakeArray&& make_engine_inputs, CoverageCell* cell) {
  cell->methods.clear();
  for (Method m : methods) {
    MethodCoverage mc;
    mc.method = m;
    cell->methods.push_back(mc);
  }
  cell->replications = replications;
  if (replications == 0) return;

  const double chi2_threshold = stats::chi_squared_quantile(1, level);
  const int thread_count =
      workers > 0 ? workers
                  : std::max(1u, std::thread::hardware_concurrency());

  std::vector<std::vector<MethodCoverage>> tallies(
      thread_count, cell->methods);
  std::atomic<int> next{0};

  auto worker = [&](int slot) {
    auto& local = tallies[slot];
    Eigen::VectorXd theta(1);
    theta[0] = theta_true;
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= replications) break;
      make_engine_inputs(rep, theta, chi2_threshold, local);
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(thread_count);
  for (int w = 0; w < thread_count; ++w) pool.emplace_back(worker, w);
  for (auto& t : pool) t.join();

  for (const auto& local : tallies) {
    for (std::size_t k = 0; k < local.size(); ++k) {
      cell->methods[k].covered += local[k].covered;
      cell->methods[k].fail_not_pd += local[k].fail_not_pd;
      cell->methods[k].fail_nonconvergence += local[k].fail_nonconvergence;
      cell->methods[k].fail_other += local[k].fail_other;
    }
  }
}

inline void tally_failure(MethodCoverage* mc, const Error& error) {
  if (dynamic_cast<const CorrectionNotPdError*>(&error) != nullptr) {
    ++mc->fail_not_pd;
  } else if (dynamic_cast<const MaxIterationsError*>(&error) != nullptr ||
             dynamic_cast<const LogitMaxIterationsError*>(&error) != nullptr) {
    ++mc->fail_nonconvergence;
  } else {
    ++mc->fail_other;
  }
}

/// Coverage of one two-way replication for every requested method.
inline void evaluate_two_way(const TwoWayArray& array,
                             const Eigen::VectorXd& theta_true,
                             double chi2_threshold, double level,
                             const std::vector<Method>& methods,
                             std::vector<MethodCoverage>* tally) {
  bool need_pairs = false;
  for (Method m : methods) {
    need_pairs |= (m == Method::kMmel || m == Method::kMmelNoC ||
                   m == Method::kMmw);
  }
  TwoWayMelEngine engine(EstimatorSpec::mean(), array, need_pairs);
  const double theta_hat = engine.point_estimate()[0];
  const double t0 = theta_true[0];

  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodCoverage* mc = &(*tally)[k];
    try {
      switch (methods[k]) {
        case Method::kMel:
          if (engine.mel(theta_true) <= chi2_threshold) ++mc->covered;
          break;
        case Method::kMmel:
          if (engine.mmel(theta_true, true) <= chi2_threshold) ++mc->covered;
          break;
        case Method::kMmelNoC:
          if (engine.mmel(theta_true, false) <= chi2_threshold) ++mc->covered;
          break;
        case Method::kMmw: {
          const Eigen::MatrixXd m = engine.corrected_second_moment_at_hat(true);
          if (!(m(0, 0) > 0.0)) {
            throw CorrectionNotPdError("corrected variance not positive");
          }
          const auto ci = wald_interval(
              theta_hat, m(0, 0) / engine.pseudo_value_count(), level);
          if (ci.valid && ci.lower <= t0 && t0 <= ci.upper) ++mc->covered;
          break;
        }
        case Method::kEww: {
          const auto var = eww_variance(array, engine.point_estimate());
          const auto ci = wald_interval(theta_hat, var.matrix(0, 0), level);
          if (!ci.valid) {
            ++mc->fail_other;  // negative variance, counted not clamped
          } else if (ci.lower <= t0 && t0 <= ci.upper) {
            ++mc->covered;
          }
          break;
        }
        case Method::kIid: {
          const auto var = iid_variance(array, engine.point_estimate());
          const auto ci = wald_interval(theta_hat, var.matrix(0, 0), level);
          if (ci.valid && ci.lower <= t0 && t0 <= ci.upper) ++mc->covered;
          break;
        }
      }
    } catch (const Error& error) {
      tally_failure(mc, error);
    }
  }
}

inline void evaluate_three_way(const ThreeWayArray& array,
                               const Eigen::VectorXd& theta_true,
                               double chi2_threshold,
                               const std::vector<Method>& methods,
                               std::vector<MethodCoverage>* tally) {
  ThreeWayMelEngine engine(array);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodCoverage* mc = &(*tally)[k];
    try {
      switch (methods[k]) {
        case Method::kMel:
          if (engine.mel(theta_true) <= chi2_threshold) ++mc->covered;
          break;
        case Method::kMmel:
          if (engine.mmel(theta_true) <= chi2_threshold) ++mc->covered;
          break;
        default:
          ++mc->fail_other;
      }
    } catch (const Error& error) {
      tally_failure(mc, error);
    }
  }
}

}  // namespace experiment_detail

/// Runs the full coverage experiment. Replications are deterministic
/// functions of (seed, replication index), and per-method tallies are
/// integer counts, so the report is identical for any worker count.
inline CoverageReport run_experiment(const ExperimentConfig& config) {
  CoverageReport report;
  for (int cols : config.cols_list) {
    for (double param : config.params) {
      CoverageCell cell;
      cell.dgp = config.dgp;
      cell.rows = config.rows;
      cell.cols = cols;
      cell.slabs = config.dgp == DgpKind::kThreeWayRandomEffect ? config.slabs : 0;
      cell.param = param;
      cell.level = config.level;

      switch (config.dgp) {
        case DgpKind::kRandomEffect: {
          RandomEffectDGP dgp;
          dgp.theta = config.mean;
          dgp.sigma2 = param;
          dgp.rows = config.rows;
          dgp.cols = cols;
          experiment_detail::run_cell(
              config.methods, config.replications, config.workers, config.level,
              dgp.theta,
              [&](int rep, const Eigen::VectorXd& theta, double threshold,
                  std::vector<MethodCoverage>& tally) {
                const TwoWayArray array = generate(dgp, config.seed, rep);
                experiment_detail::evaluate_two_way(array, theta, threshold,
                                                    config.level,
                                                    config.methods, &tally);
              },
              &cell);
          break;
        }
        case DgpKind::kSbm: {
          BipartiteSBMDGP dgp;
          dgp.theta = param;
          dgp.rows = config.rows;
          dgp.cols = cols;
          experiment_detail::run_cell(
              config.methods, config.replications, config.workers, config.level,
              dgp.theta,
              [&](int rep, const Eigen::VectorXd& theta, double threshold,
                  std::vector<MethodCoverage>& tally) {
                const TwoWayArray array = generate(dgp, config.seed, rep);
                experiment_detail::evaluate_two_way(array, theta, threshold,
                                                    config.level,
                                                    config.methods, &tally);
              },
              &cell);
          break;
        }
        case DgpKind::kThreeWayRandomEffect: {
          ThreeWayRandomEffectDGP dgp;
          dgp.theta = config.mean;
          dgp.sigma2_main = param;
          dgp.sigma2_pair = config.sigma2_pair;
          dgp.rows = config.rows;
          dgp.cols = cols;
          dgp.slabs = config.slabs;
          experiment_detail::run_cell(
              config.methods, config.replications, config.workers, config.level,
              dgp.theta,
              [&](int rep, const Eigen::VectorXd& theta, double threshold,
                  std::vector<MethodCoverage>& tally) {
                const ThreeWayArray array = generate(dgp, config.seed, rep);
                experiment_detail::evaluate_three_way(array, theta, threshold,
                                                      config.methods, &tally);
              },
              &cell);
          break;
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace mel

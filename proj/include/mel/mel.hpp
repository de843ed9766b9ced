#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mel/array.hpp"
#include "mel/el.hpp"
#include "mel/errors.hpp"
#include "mel/estimators.hpp"
#include "mel/stats.hpp"

namespace mel {

/// Finite-sample adjustment C(N, M) = (N-1)(M-1)n / (NM(n-2)) applied to
/// the leave-row-and-column-out correction term.
inline double c_factor(int rows, int cols) {
  const double n = double(rows) + double(cols);
  return (double(rows - 1) * double(cols - 1) * n) /
         (double(rows) * double(cols) * (n - 2.0));
}

/// Pseudo values V_l(theta) = n S(theta) - (n-1) S_l(theta) for one
/// evaluation point, stored as matrix rows: leave-row-out values first
/// (l = 0..N-1), then leave-column-out (l = N..N+M-1).
struct PseudoValueSet {
  Eigen::VectorXd theta;
  Eigen::VectorXd S;
  Eigen::MatrixXd S_l;  // n x d
  Eigen::MatrixXd V_l;  // n x d
  int rows = 0;
  int cols = 0;
};

enum class CorrectionPolicy { kStrict, kClipEigenvalues };

/// Correction pieces of the modified statistic: the leave-out grid Q, the
/// closed-form C factor, and the lower-triangular factors with
/// gamma_hat gamma_hat' = n^-1 sum V_l(theta_hat) V_l(theta_hat)' and
/// gamma_tilde gamma_tilde' = n^-1 sum V_l(theta) V_l(theta)'
///                            - n^-1 sum_ll1 Q_ll1 Q_ll1'.
struct CorrectionTerms {
  Eigen::MatrixXd Q;  // (N*M) x d, row index l * M + l1
  double C_factor = 0.0;
  Eigen::MatrixXd gamma_hat;
  Eigen::MatrixXd gamma_tilde;
  bool clipped = false;
};

namespace mel_detail {

/// S-value table at one theta: full value, n single leave-outs, and
/// optionally the N*M pair leave-outs.
struct SValueTable {
  Eigen::VectorXd S;
  Eigen::MatrixXd single;  // n x d
  Eigen::MatrixXd pair;    // (N*M) x d when requested
  bool has_pairs = false;
};

inline SValueTable to_s_values(const LeaveOutEstimates& est,
                               const Eigen::VectorXd& theta) {
  SValueTable out;
  out.S = est.full - theta;
  out.single = est.single.rowwise() - theta.transpose();
  if (est.has_pairs) {
    out.pair = est.pair.rowwise() - theta.transpose();
    out.has_pairs = true;
  }
  return out;
}

inline SValueTable s_values(const EstimatorSpec& spec, const TwoWayArray& array,
                            const Eigen::VectorXd& theta, bool with_pairs) {
  if (spec.moment_style()) {
    const LeaveOutEstimates values =
        gee_leave_out_values(spec.gee, array, theta, with_pairs);
    SValueTable out;
    out.S = values.full;
    out.single = values.single;
    out.pair = values.pair;
    out.has_pairs = values.has_pairs;
    return out;
  }
  return to_s_values(leave_out_estimates(spec, array, with_pairs), theta);
}

inline Eigen::MatrixXd pseudo_value_matrix(const SValueTable& table) {
  const double n = double(table.single.rows());
  return (n * table.S.transpose()).replicate(table.single.rows(), 1) -
         (n - 1.0) * table.single;
}

/// Raw correction grid (no C factor): row (l, l1) holds
/// n S - (n-1)(S_l + S_{N+l1}) + (n-2) S_{l,l1}.
inline Eigen::MatrixXd raw_q_grid(const SValueTable& table, int rows, int cols) {
  if (!table.has_pairs) throw DataError("q grid requires pair leave-outs");
  const double n = double(rows + cols);
  const int d = int(table.S.size());
  Eigen::MatrixXd q(std::int64_t(rows) * cols, d);
  for (int l = 0; l < rows; ++l) {
    for (int l1 = 0; l1 < cols; ++l1) {
      const std::int64_t r = std::int64_t(l) * cols + l1;
      q.row(r) = n * table.S.transpose() -
                 (n - 1.0) * (table.single.row(l) + table.single.row(rows + l1)) +
                 (n - 2.0) * table.pair.row(r);
    }
  }
  return q;
}

/// Lower factor of a positive semidefinite matrix; falls back to the
/// symmetric eigendecomposition square root when the Cholesky pivot
/// degenerates (singular but valid limits, e.g. a constant array).
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& m) {
  const int d = int(m.rows());
  if (m.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd::Zero(d, d);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * values.cwiseSqrt().asDiagonal();
}

/// Lower factor of a matrix required to be positive definite. Under the
/// strict policy an eigenvalue <= 0 raises CorrectionNotPdError; the clip
/// policy floors eigenvalues at 1e-12 * trace and marks the result.
inline Eigen::MatrixXd pd_factor(const Eigen::MatrixXd& m,
                                 CorrectionPolicy policy, bool* clipped) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd lower = llt.matrixL();
    if (lower.diagonal().minCoeff() > 0.0) return lower;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig > 0.0) {
    // Positive definite but badly conditioned; use the eigen square root.
    return eig.eigenvectors() *
           eig.eigenvalues().cwiseSqrt().asDiagonal();
  }
  if (policy == CorrectionPolicy::kStrict) {
    throw CorrectionNotPdError(
        "corrected second-moment matrix is not positive definite "
        "(min eigenvalue " +
        std::to_string(min_eig) + "); the correction over-subtracted at this "
        "sample size");
  }
  double floor = 1e-12 * std::max(m.trace(), 0.0);
  if (!(floor > 0.0)) {
    // Trace-based floor degenerates when the whole spectrum is negative;
    // fall back to the absolute eigenvalue scale.
    floor = 1e-12 * std::max(eig.eigenvalues().cwiseAbs().sum(), 1e-100);
  }
  if (clipped != nullptr) *clipped = true;
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * values.cwiseSqrt().asDiagonal();
}

/// Solve gamma_tilde * y = delta for y given the lower factor.
inline Eigen::MatrixXd apply_correction_map(const Eigen::MatrixXd& gamma_hat,
                                            const Eigen::MatrixXd& gamma_tilde,
                                            const Eigen::MatrixXd& delta_rows) {
  // delta_rows is n x d; returns n x d rows of gamma_hat gamma_tilde^-1 delta.
  Eigen::MatrixXd y =
      gamma_tilde.triangularView<Eigen::Lower>().solve(delta_rows.transpose());
  return (gamma_hat * y).transpose();
}

}  // namespace mel_detail

/// Leave-out pseudo values at theta. Estimator failures on a leave-out
/// view propagate with the failing index attached.
inline PseudoValueSet pseudo_values(const EstimatorSpec& spec,
                                    const TwoWayArray& array,
                                    const Eigen::VectorXd& theta) {
  const mel_detail::SValueTable table =
      mel_detail::s_values(spec, array, theta, false);
  PseudoValueSet out;
  out.theta = theta;
  out.S = table.S;
  out.S_l = table.single;
  out.V_l = mel_detail::pseudo_value_matrix(table);
  out.rows = array.rows();
  out.cols = array.cols();
  return out;
}

/// Full N x M grid of correction terms Q_{l,l1} at theta (row index
/// l * M + l1), with the finite-sample C factor applied unless disabled.
inline Eigen::MatrixXd q_terms(const EstimatorSpec& spec,
                               const TwoWayArray& array,
                               const Eigen::VectorXd& theta,
                               bool use_c_factor = true) {
  const mel_detail::SValueTable table =
      mel_detail::s_values(spec, array, theta, true);
  Eigen::MatrixXd q = mel_detail::raw_q_grid(table, array.rows(), array.cols());
  if (use_c_factor) q *= c_factor(array.rows(), array.cols());
  return q;
}

/// Multiway EL statistic: the EL dual evaluated on the pseudo values at
/// theta. Returns kRejectedStatistic when the hull condition fails.
inline double mel_statistic(const EstimatorSpec& spec, const TwoWayArray& array,
                            const Eigen::VectorXd& theta,
                            double el_tolerance = 1e-9,
                            int el_max_iterations = 100) {
  return el_statistic(pseudo_values(spec, array, theta).V_l, el_tolerance,
                      el_max_iterations);
}

/// Precomputed leave-out machinery for one array and estimator, so that
/// repeated statistic evaluations (confidence-set inversion, coverage
/// experiments) do not redo the leave-out fits. All evaluation methods are
/// const and safe to call concurrently. The referenced array must outlive
/// the engine.
class TwoWayMelEngine {
 public:
  TwoWayMelEngine(EstimatorSpec spec, const TwoWayArray& array,
                  bool with_pairs = true, double el_tolerance = 1e-9,
                  int el_max_iterations = 100)
      : spec_(std::move(spec)),
        array_(&array),
        with_pairs_(with_pairs),
        el_tolerance_(el_tolerance),
        el_max_iterations_(el_max_iterations),
        n_(array.leave_out_count()),
        c_factor_(array.rows() >= 2 && array.cols() >= 2
                      ? c_factor(array.rows(), array.cols())
                      : 1.0) {
    if (spec_.moment_style()) {
      theta_hat_ = gee_point_estimate(spec_.gee, *array_);
      hat_table_ = mel_detail::s_values(spec_, *array_, theta_hat_, false);
    } else {
      estimates_ = leave_out_estimates(spec_, *array_, with_pairs_);
      theta_hat_ = estimates_.full;
      hat_table_ = mel_detail::to_s_values(estimates_, theta_hat_);
      if (with_pairs_) {
        raw_q_ = mel_detail::raw_q_grid(hat_table_, array.rows(), array.cols());
        sum_qq_raw_ = raw_q_.transpose() * raw_q_;
      }
    }
    v_hat_ = mel_detail::pseudo_value_matrix(hat_table_);
    second_moment_hat_ = v_hat_.transpose() * v_hat_ / double(n_);
  }

  int dim() const { return int(theta_hat_.size()); }
  int pseudo_value_count() const { return n_; }
  const Eigen::VectorXd& point_estimate() const { return theta_hat_; }
  const TwoWayArray& array() const { return *array_; }
  const EstimatorSpec& estimator() const { return spec_; }

  Eigen::MatrixXd pseudo_value_matrix(const Eigen::VectorXd& theta) const {
    if (spec_.moment_style()) {
      return mel_detail::pseudo_value_matrix(
          mel_detail::s_values(spec_, *array_, theta, false));
    }
    // Plug-in estimators: V_l(theta) = [n theta_hat - (n-1) theta_hat^(l)] - theta.
    return v_hat_.rowwise() + (theta_hat_ - theta).transpose();
  }

  double mel(const Eigen::VectorXd& theta) const {
    return el_statistic(pseudo_value_matrix(theta), el_tolerance_,
                        el_max_iterations_);
  }

  /// Modified statistic at theta. The strict policy raises
  /// CorrectionNotPdError when the corrected second moment fails positive
  /// definiteness; the clip policy floors its spectrum and reports it.
  double mmel(const Eigen::VectorXd& theta, bool use_c_factor = true,
              CorrectionPolicy policy = CorrectionPolicy::kStrict,
              bool* clipped = nullptr) const {
    require_pairs();
    const double c = use_c_factor ? c_factor_ : 1.0;

    Eigen::MatrixXd v_theta;        // V_l(theta) rows
    Eigen::MatrixXd second_moment;  // n^-1 sum V_l(theta) V_l(theta)'
    Eigen::MatrixXd sum_qq;
    if (spec_.moment_style()) {
      const mel_detail::SValueTable table =
          mel_detail::s_values(spec_, *array_, theta, true);
      v_theta = mel_detail::pseudo_value_matrix(table);
      const Eigen::MatrixXd raw_q =
          mel_detail::raw_q_grid(table, array_->rows(), array_->cols());
      sum_qq = raw_q.transpose() * raw_q;
      second_moment = v_theta.transpose() * v_theta / double(n_);
    } else {
      v_theta = v_hat_.rowwise() + (theta_hat_ - theta).transpose();
      sum_qq = sum_qq_raw_;
      second_moment = v_theta.transpose() * v_theta / double(n_);
    }

    const Eigen::MatrixXd corrected =
        second_moment - (c * c / double(n_)) * sum_qq;
    const Eigen::MatrixXd gamma_hat = mel_detail::psd_factor(second_moment_hat_);
    const Eigen::MatrixXd gamma_tilde =
        mel_detail::pd_factor(corrected, policy, clipped);

    const Eigen::MatrixXd delta = v_hat_ - v_theta;  // V_l(theta_hat) - V_l(theta)
    const Eigen::MatrixXd modified =
        v_hat_ - mel_detail::apply_correction_map(gamma_hat, gamma_tilde, delta);
    return el_statistic(modified, el_tolerance_, el_max_iterations_);
  }

  /// Corrected second-moment matrix at theta = theta_hat (the modified
  /// multiway variance target before the 1/n scaling).
  Eigen::MatrixXd corrected_second_moment_at_hat(bool use_c_factor = true) const {
    require_pairs();
    if (spec_.moment_style()) {
      const mel_detail::SValueTable table =
          mel_detail::s_values(spec_, *array_, theta_hat_, true);
      const Eigen::MatrixXd raw_q =
          mel_detail::raw_q_grid(table, array_->rows(), array_->cols());
      const double c = use_c_factor ? c_factor_ : 1.0;
      return second_moment_hat_ -
             (c * c / double(n_)) * (raw_q.transpose() * raw_q);
    }
    const double c = use_c_factor ? c_factor_ : 1.0;
    return second_moment_hat_ - (c * c / double(n_)) * sum_qq_raw_;
  }

  /// Correction bundle at theta (grid, C factor, both triangular factors).
  CorrectionTerms correction_terms(const Eigen::VectorXd& theta,
                                   bool use_c_factor = true,
                                   CorrectionPolicy policy =
                                       CorrectionPolicy::kStrict) const {
    require_pairs();
    CorrectionTerms out;
    out.C_factor = c_factor_;
    const double c = use_c_factor ? c_factor_ : 1.0;

    Eigen::MatrixXd second_moment;
    if (spec_.moment_style()) {
      const mel_detail::SValueTable table =
          mel_detail::s_values(spec_, *array_, theta, true);
      const Eigen::MatrixXd v_theta = mel_detail::pseudo_value_matrix(table);
      out.Q = c * mel_detail::raw_q_grid(table, array_->rows(), array_->cols());
      second_moment = v_theta.transpose() * v_theta / double(n_);
    } else {
      const Eigen::MatrixXd v_theta =
          v_hat_.rowwise() + (theta_hat_ - theta).transpose();
      out.Q = c * raw_q_;
      second_moment = v_theta.transpose() * v_theta / double(n_);
    }
    const Eigen::MatrixXd corrected =
        second_moment - out.Q.transpose() * out.Q / double(n_);
    out.gamma_hat = mel_detail::psd_factor(second_moment_hat_);
    out.gamma_tilde = mel_detail::pd_factor(corrected, policy, &out.clipped);
    return out;
  }

 private:
  void require_pairs() const {
    if (!spec_.moment_style() && !with_pairs_) {
      throw DataError("engine was built without pair leave-outs");
    }
  }

  EstimatorSpec spec_;
  const TwoWayArray* array_;
  bool with_pairs_;
  double el_tolerance_;
  int el_max_iterations_;
  int n_;
  double c_factor_;
  LeaveOutEstimates estimates_;
  mel_detail::SValueTable hat_table_;
  Eigen::VectorXd theta_hat_;
  Eigen::MatrixXd v_hat_;             // V_l(theta_hat) rows
  Eigen::MatrixXd second_moment_hat_; // n^-1 sum V_l(theta_hat) V_l(theta_hat)'
  Eigen::MatrixXd raw_q_;             // C-free correction grid (plug-in path)
  Eigen::MatrixXd sum_qq_raw_;
};

/// Correction bundle computed from scratch (convenience wrapper).
inline CorrectionTerms correction_terms(
    const EstimatorSpec& spec, const TwoWayArray& array,
    const Eigen::VectorXd& theta, bool use_c_factor = true,
    CorrectionPolicy policy = CorrectionPolicy::kStrict) {
  return TwoWayMelEngine(spec, array).correction_terms(theta, use_c_factor,
                                                       policy);
}

/// Modified multiway EL statistic at theta (convenience wrapper).
inline double mmel_statistic(const EstimatorSpec& spec, const TwoWayArray& array,
                             const Eigen::VectorXd& theta,
                             bool use_c_factor = true,
                             CorrectionPolicy policy = CorrectionPolicy::kStrict) {
  return TwoWayMelEngine(spec, array).mmel(theta, use_c_factor, policy);
}

enum class StatisticKind { kMel, kMmel, kMmelNoC };

inline const char* statistic_kind_name(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::kMel:
      return "mel";
    case StatisticKind::kMmel:
      return "mmel";
    case StatisticKind::kMmelNoC:
    default:
      return "mmel-noc";
  }
}

/// One-dimensional confidence interval from inverting an EL-type statistic;
/// for d > 1 use ConfidenceSetFunction, which is the membership predicate.
struct ConfidenceSet {
  int dimension = 1;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  double level = 0.95;
  StatisticKind kind = StatisticKind::kMmel;
  double threshold = 0.0;  // chi-square quantile used for the cut
  bool possibly_non_interval = false;
  Eigen::VectorXd point_estimate;
};

/// Membership predicate {theta : statistic(theta) <= chi^2_{d, alpha}} for
/// any dimension, with an optional rectangular grid evaluation.
class ConfidenceSetFunction {
 public:
  ConfidenceSetFunction(const EstimatorSpec& spec, const TwoWayArray& array,
                        StatisticKind kind, double level,
                        CorrectionPolicy policy = CorrectionPolicy::kStrict)
      : engine_(spec, array, kind != StatisticKind::kMel),
        kind_(kind),
        policy_(policy),
        level_(level),
        threshold_(stats::chi_squared_quantile(engine_.dim(), level)) {}

  double statistic(const Eigen::VectorXd& theta) const {
    switch (kind_) {
      case StatisticKind::kMel:
        return engine_.mel(theta);
      case StatisticKind::kMmel:
        return engine_.mmel(theta, true, policy_);
      case StatisticKind::kMmelNoC:
      default:
        return engine_.mmel(theta, false, policy_);
    }
  }

  bool contains(const Eigen::VectorXd& theta) const {
    return statistic(theta) <= threshold_;
  }

  double threshold() const { return threshold_; }
  double level() const { return level_; }
  const TwoWayMelEngine& engine() const { return engine_; }

  /// Evaluates membership over the tensor grid spanned by per-axis points;
  /// returns flags in row-major order over the axes.
  std::vector<char> grid_trace(const std::vector<Eigen::VectorXd>& axes) const {
    const int d = engine_.dim();
    if (int(axes.size()) != d) throw DataError("grid axes must match dimension");
    std::vector<std::int64_t> strides(axes.size());
    std::int64_t total = 1;
    for (int k = d - 1; k >= 0; --k) {
      strides[k] = total;
      total *= axes[k].size();
    }
    std::vector<char> flags(total, 0);
    Eigen::VectorXd point(d);
    for (std::int64_t idx = 0; idx < total; ++idx) {
      std::int64_t rest = idx;
      for (int k = 0; k < d; ++k) {
        point[k] = axes[k][int(rest / strides[k])];
        rest %= strides[k];
      }
      flags[idx] = contains(point) ? 1 : 0;
    }
    return flags;
  }

 private:
  TwoWayMelEngine engine_;
  StatisticKind kind_;
  CorrectionPolicy policy_;
  double level_;
  double threshold_;
};

namespace mel_detail {

/// One-sided crossing search: expands a bracket outward from theta_hat by
/// doubling, then bisects to the threshold crossing. `direction` is +1 or -1.
inline double find_crossing(const ConfidenceSetFunction& fn, double center,
                            double initial_step, int direction,
                            double threshold, bool* non_interval) {
  auto stat_at = [&](double x) {
    Eigen::VectorXd point(1);
    point[0] = x;
    return fn.statistic(point);
  };

  double step = initial_step;
  double inside = center;
  double outside = center + direction * step;
  int doublings = 0;
  while (stat_at(outside) <= threshold) {
    inside = outside;
    step *= 2.0;
    outside = center + direction * step;
    if (++doublings > 60) {
      throw BracketFailureError(
          "no threshold crossing within 60 bracket doublings");
    }
  }

  const double tol = 1e-8 * std::max(1.0, std::abs(center));
  while (std::abs(outside - inside) > tol) {
    const double mid = 0.5 * (inside + outside);
    if (stat_at(mid) <= threshold) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  double crossing = 0.5 * (inside + outside);

  // The statistic is monotone away from theta_hat in regular problems but
  // that is not assumed: probe interior points and, if one already exceeds
  // the threshold, report the innermost crossing and flag the set.
  for (int k = 1; k <= 8; ++k) {
    const double probe = center + (crossing - center) * double(k) / 9.0;
    if (stat_at(probe) > threshold) {
      if (non_interval != nullptr) *non_interval = true;
      double lo = center, hi = probe;
      while (std::abs(hi - lo) > tol) {
        const double mid = 0.5 * (lo + hi);
        if (stat_at(mid) <= threshold) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      crossing = 0.5 * (lo + hi);
      break;
    }
  }
  return crossing;
}

}  // namespace mel_detail

/// Inverts the requested statistic into a confidence interval for scalar
/// parameters. The bracket starts at 8 modified-multiway standard errors
/// (falling back to a cellwise-variance scale when that correction is
/// unavailable) and doubles outward until the statistic crosses the
/// chi-square threshold.
inline ConfidenceSet invert_confidence_interval(
    const EstimatorSpec& spec, const TwoWayArray& array, double level,
    StatisticKind kind, CorrectionPolicy policy = CorrectionPolicy::kStrict) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must be in (0,1)");
  ConfidenceSetFunction fn(spec, array, kind, level, policy);
  if (fn.engine().dim() != 1) {
    throw DataError("interval inversion requires a scalar parameter; use "
                    "ConfidenceSetFunction for d > 1");
  }
  const double center = fn.engine().point_estimate()[0];

  double se = 0.0;
  if (kind != StatisticKind::kMel) {
    try {
      const Eigen::MatrixXd m = fn.engine().corrected_second_moment_at_hat(
          kind != StatisticKind::kMmelNoC);
      const double var = m(0, 0) / double(fn.engine().pseudo_value_count());
      if (var > 0.0) se = std::sqrt(var);
    } catch (const CorrectionNotPdError&) {
      se = 0.0;
    }
  }
  if (se <= 0.0) {
    // Scale fallback: uncorrected pseudo-value second moment.
    const Eigen::MatrixXd v = fn.engine().pseudo_value_matrix(
        fn.engine().point_estimate());
    const double m2 = (v.transpose() * v)(0, 0) /
                      double(fn.engine().pseudo_value_count());
    se = std::sqrt(std::max(m2, 0.0)) /
         std::sqrt(double(fn.engine().pseudo_value_count()));
  }
  if (!(se > 0.0)) se = 1e-12 * std::max(1.0, std::abs(center));

  ConfidenceSet out;
  out.dimension = 1;
  out.level = level;
  out.kind = kind;
  out.threshold = fn.threshold();
  out.point_estimate = fn.engine().point_estimate();
  out.upper = mel_detail::find_crossing(fn, center, 8.0 * se, +1, fn.threshold(),
                                        &out.possibly_non_interval);
  out.lower = mel_detail::find_crossing(fn, center, 8.0 * se, -1, fn.threshold(),
                                        &out.possibly_non_interval);
  return out;
}

}  // namespace mel

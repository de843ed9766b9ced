#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "mel/array.hpp"
#include "mel/errors.hpp"

namespace mel {

enum class EstimatorKind { kMean, kHorvitzThompson, kCompositeLogit, kGeeFunction };

/// Horvitz-Thompson ratio over a view: sum(w y) / sum(w), with the
/// inverse-inclusion weight w_ij = row_scale_i * cell[weight_component].
/// Any constant factor common to all weights cancels in the ratio, so a
/// population-level scale never needs to be supplied.
struct HTSettings {
  int y_component = 0;
  int weight_component = 1;
  Eigen::VectorXd row_scales;  // optional, one per row; empty means all ones
};

/// Composite logistic likelihood: cells hold (Y, Z_1..Z_p) and the fitted
/// parameter is (alpha, beta) of P(Y=1|Z) = logistic(alpha + Z'beta).
struct LogitSettings {
  int y_component = 0;
  int covariate_offset = 1;
  int covariate_dimension = 1;
  double tolerance = 1e-10;     // stop on composite score norm
  int max_iterations = 100;
  double divergence_norm = 1e3;  // parameter norm treated as separation
};

enum class GeeFamily { kIdentityGaussian, kLogitBernoulli, kLogPoisson };

/// Estimating function X_ij(theta) = Z (Y - a'(Z'theta)) for the canonical
/// link of the chosen family, averaged with an independence working
/// correlation. Cells hold (Y, Z_1..Z_p); theta has dimension p.
struct GEESettings {
  GeeFamily family = GeeFamily::kIdentityGaussian;
  int y_component = 0;
  int covariate_offset = 1;
  int covariate_dimension = 1;
  double dispersion = 1.0;
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kMean;
  HTSettings ht;
  LogitSettings logit;
  GEESettings gee;

  static EstimatorSpec mean() { return {}; }
  static EstimatorSpec horvitz_thompson(HTSettings settings = {}) {
    EstimatorSpec spec;
    spec.kind = EstimatorKind::kHorvitzThompson;
    spec.ht = std::move(settings);
    return spec;
  }
  static EstimatorSpec composite_logit(LogitSettings settings) {
    EstimatorSpec spec;
    spec.kind = EstimatorKind::kCompositeLogit;
    spec.logit = std::move(settings);
    return spec;
  }
  static EstimatorSpec gee_function(GEESettings settings) {
    EstimatorSpec spec;
    spec.kind = EstimatorKind::kGeeFunction;
    spec.gee = std::move(settings);
    return spec;
  }

  /// True when S(theta) is the averaged moment function itself rather
  /// than estimate(view) - theta.
  bool moment_style() const { return kind == EstimatorKind::kGeeFunction; }
};

/// Dimension of the estimate / estimating function.
inline int estimate_dimension(const EstimatorSpec& spec, const TwoWayArray& array) {
  switch (spec.kind) {
    case EstimatorKind::kMean:
      return array.dim();
    case EstimatorKind::kHorvitzThompson:
      return 1;
    case EstimatorKind::kCompositeLogit:
      return spec.logit.covariate_dimension + 1;
    case EstimatorKind::kGeeFunction:
    default:
      return spec.gee.covariate_dimension;
  }
}

namespace est_detail {

inline double logistic(double eta) {
  if (eta >= 0.0) {
    const double e = std::exp(-eta);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double log1p_exp(double eta) {
  // log(1 + e^eta), stable for large |eta|
  return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

inline double ht_row_scale(const HTSettings& s, int i) {
  return s.row_scales.size() > 0 ? s.row_scales[i] : 1.0;
}

/// Newton-Raphson for the composite Bernoulli log-likelihood, with step
/// halving only when a full step would lower the likelihood. Throws
/// LogitSeparationError when the fit diverges or the information matrix
/// degenerates, LogitMaxIterationsError on budget exhaustion.
inline Eigen::VectorXd fit_composite_logit(const TwoWayArray& array,
                                           const LogitSettings& s,
                                           const LeaveOutSpec& view,
                                           const Eigen::VectorXd* warm_start,
                                           int leave_out_tag = -1) {
  const int p = s.covariate_dimension;
  const int dim = p + 1;
  Eigen::VectorXd theta =
      warm_start != nullptr ? *warm_start : Eigen::VectorXd::Zero(dim);

  auto pass = [&](const Eigen::VectorXd& at, Eigen::VectorXd* grad,
                  Eigen::MatrixXd* info, bool* both_classes) {
    double ll = 0.0;
    bool saw_zero = false, saw_one = false;
    Eigen::VectorXd zt(dim);
    zt[0] = 1.0;
    for (int i = 0; i < array.rows(); ++i) {
      if (i == view.row) continue;
      for (int j = 0; j < array.cols(); ++j) {
        if (j == view.col) continue;
        const auto cell = array.cell(i, j);
        const double y = cell[s.y_component];
        if (y != 0.0 && y != 1.0) {
          throw DataError("composite logit outcome must be 0 or 1");
        }
        (y == 0.0 ? saw_zero : saw_one) = true;
        for (int k = 0; k < p; ++k) zt[k + 1] = cell[s.covariate_offset + k];
        const double eta = at[0] + at.tail(p).dot(zt.tail(p));
        ll += y * eta - log1p_exp(eta);
        if (grad != nullptr) {
          const double mu = logistic(eta);
          grad->noalias() += (y - mu) * zt;
          info->noalias() += (mu * (1.0 - mu)) * (zt * zt.transpose());
        }
      }
    }
    if (both_classes != nullptr) *both_classes = saw_zero && saw_one;
    return ll;
  };

  auto tag = [&](const std::string& what) {
    return leave_out_tag >= 0
               ? what + " (leave-out index " + std::to_string(leave_out_tag) + ")"
               : what;
  };

  Eigen::VectorXd grad(dim);
  Eigen::MatrixXd info(dim, dim);
  bool both_classes = false;
  grad.setZero();
  info.setZero();
  double ll = pass(theta, &grad, &info, &both_classes);
  if (!both_classes) {
    throw LogitSeparationError(tag("composite logit view has a single outcome class"),
                               leave_out_tag);
  }

  for (int iter = 0; iter < s.max_iterations; ++iter) {
    if (grad.norm() <= s.tolerance) return theta;

    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      throw LogitSeparationError(tag("composite logit information matrix is singular"),
                                 leave_out_tag);
    }
    const Eigen::VectorXd step = llt.solve(grad);

    double alpha = 1.0;
    Eigen::VectorXd trial;
    double trial_ll = 0.0;
    const double noise = 1e-12 * std::max(1.0, std::abs(ll));
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      trial = theta + alpha * step;
      trial_ll = pass(trial, nullptr, nullptr, nullptr);
      if (std::isfinite(trial_ll) && trial_ll >= ll - noise) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      throw LogitSeparationError(tag("composite logit line search failed"),
                                 leave_out_tag);
    }
    theta = trial;
    ll = std::max(ll, trial_ll);
    if (theta.norm() > s.divergence_norm) {
      throw LogitSeparationError(tag("composite logit parameters diverged"),
                                 leave_out_tag);
    }
    grad.setZero();
    info.setZero();
    pass(theta, &grad, &info, nullptr);
  }
  if (grad.norm() <= s.tolerance) return theta;
  throw LogitMaxIterationsError(tag("composite logit did not converge"),
                                leave_out_tag);
}

inline double gee_mean_derivative(GeeFamily family, double eta) {
  switch (family) {
    case GeeFamily::kIdentityGaussian:
      return eta;
    case GeeFamily::kLogitBernoulli:
      return logistic(eta);
    case GeeFamily::kLogPoisson:
    default:
      return std::exp(eta);
  }
}

inline double gee_mean_second_derivative(GeeFamily family, double eta) {
  switch (family) {
    case GeeFamily::kIdentityGaussian:
      return 1.0;
    case GeeFamily::kLogitBernoulli: {
      const double mu = logistic(eta);
      return mu * (1.0 - mu);
    }
    case GeeFamily::kLogPoisson:
    default:
      return std::exp(eta);
  }
}

}  // namespace est_detail

/// Average of the estimating function X_ij(theta) over the view; with the
/// canonical link this is the score of the generalized linear model
/// divided by the number of retained cells (and by the dispersion).
inline Eigen::VectorXd gee_moment(const GEESettings& settings,
                                  const TwoWayArray& array,
                                  const LeaveOutSpec& view,
                                  const Eigen::VectorXd& theta) {
  const int p = settings.covariate_dimension;
  if (int(theta.size()) != p) throw DataError("gee theta has wrong dimension");
  if (!theta.allFinite()) throw DataError("gee theta must be finite");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z(p);
  std::int64_t kept = 0;
  for (int i = 0; i < array.rows(); ++i) {
    if (i == view.row) continue;
    for (int j = 0; j < array.cols(); ++j) {
      if (j == view.col) continue;
      const auto cell = array.cell(i, j);
      for (int k = 0; k < p; ++k) z[k] = cell[settings.covariate_offset + k];
      const double eta = z.dot(theta);
      const double resid =
          cell[settings.y_component] -
          est_detail::gee_mean_derivative(settings.family, eta);
      sum.noalias() += z * resid;
      ++kept;
    }
  }
  if (kept == 0) throw DataError("gee view retains no cells");
  return sum / (double(kept) * settings.dispersion);
}

/// Solves the estimating equation sum X_ij(theta) = 0 over the view by
/// Newton iteration (the canonical-link GLM fit).
inline Eigen::VectorXd gee_point_estimate(const GEESettings& settings,
                                          const TwoWayArray& array,
                                          const LeaveOutSpec& view = {}) {
  const int p = settings.covariate_dimension;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z(p);
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < array.rows(); ++i) {
      if (i == view.row) continue;
      for (int j = 0; j < array.cols(); ++j) {
        if (j == view.col) continue;
        const auto cell = array.cell(i, j);
        for (int k = 0; k < p; ++k) z[k] = cell[settings.covariate_offset + k];
        const double eta = z.dot(theta);
        score.noalias() +=
            z * (cell[settings.y_component] -
                 est_detail::gee_mean_derivative(settings.family, eta));
        info.noalias() +=
            est_detail::gee_mean_second_derivative(settings.family, eta) *
            (z * z.transpose());
      }
    }
    if (score.norm() <= 1e-10) return theta;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
      throw GeeFitError("gee information matrix is singular");
    }
    theta += llt.solve(score);
    if (theta.norm() > 1e6) throw GeeFitError("gee fit diverged");
  }
  throw GeeFitError("gee fit did not converge");
}

/// Plug-in estimate on a (possibly leave-out) view of the array.
inline Eigen::VectorXd estimate(const EstimatorSpec& spec,
                                const TwoWayArray& array,
                                const LeaveOutSpec& view = {},
                                const Eigen::VectorXd* warm_start = nullptr) {
  switch (spec.kind) {
    case EstimatorKind::kMean:
      return leave_out_mean(array, view);
    case EstimatorKind::kHorvitzThompson: {
      double num = 0.0, den = 0.0;
      for (int i = 0; i < array.rows(); ++i) {
        if (i == view.row) continue;
        const double scale = est_detail::ht_row_scale(spec.ht, i);
        for (int j = 0; j < array.cols(); ++j) {
          if (j == view.col) continue;
          const auto cell = array.cell(i, j);
          const double w = scale * cell[spec.ht.weight_component];
          if (!(w > 0.0)) {
            throw HtZeroDenominatorError(
                "inverse inclusion weights must be strictly positive");
          }
          num += w * cell[spec.ht.y_component];
          den += w;
        }
      }
      if (!(den > 0.0)) {
        throw HtZeroDenominatorError("Horvitz-Thompson denominator is zero");
      }
      Eigen::VectorXd out(1);
      out[0] = num / den;
      return out;
    }
    case EstimatorKind::kCompositeLogit:
      return est_detail::fit_composite_logit(array, spec.logit, view, warm_start);
    case EstimatorKind::kGeeFunction:
    default:
      return gee_point_estimate(spec.gee, array, view);
  }
}

/// Full, leave-one-index-out, and (optionally) leave-row-and-column-out
/// estimates for one array. Single leave-outs are ordered rows first, then
/// columns; pairs are stored row-major with index l * M + l1.
struct LeaveOutEstimates {
  Eigen::VectorXd full;
  Eigen::MatrixXd single;
  Eigen::MatrixXd pair;
  bool has_pairs = false;
};

namespace est_detail {

/// Totals of a cellwise transform: overall, per row, and per column.
/// Every leave-out mean then costs O(d) instead of O(NM).
template <class Transform>
struct CellSums {
  Eigen::VectorXd total;
  Eigen::MatrixXd row;  // N x q
  Eigen::MatrixXd col;  // M x q

  CellSums(const TwoWayArray& array, int q, Transform&& transform)
      : total(Eigen::VectorXd::Zero(q)),
        row(Eigen::MatrixXd::Zero(array.rows(), q)),
        col(Eigen::MatrixXd::Zero(array.cols(), q)) {
    Eigen::VectorXd buffer(q);
    for (int i = 0; i < array.rows(); ++i) {
      for (int j = 0; j < array.cols(); ++j) {
        transform(i, j, buffer);
        row.row(i) += buffer;
        col.row(j) += buffer;
      }
    }
    total = row.colwise().sum().transpose();
  }
};

/// Leave-out means of a transformed array (the mean-structure engine that
/// Mean, HT, and GEE pipelines all reduce to).
template <class Transform>
LeaveOutEstimates mean_structure_estimates(const TwoWayArray& array, int q,
                                           Transform&& transform,
                                           bool with_pairs) {
  const int N = array.rows();
  const int M = array.cols();
  CellSums<Transform&> sums(array, q, transform);

  LeaveOutEstimates out;
  out.full = sums.total / double(std::int64_t(N) * M);
  out.single.resize(N + M, q);
  for (int l = 0; l < N; ++l) {
    out.single.row(l) =
        (sums.total.transpose() - sums.row.row(l)) / (double(N - 1) * M);
  }
  for (int j = 0; j < M; ++j) {
    out.single.row(N + j) =
        (sums.total.transpose() - sums.col.row(j)) / (double(N) * (M - 1));
  }
  if (with_pairs) {
    if (N < 2 || M < 2) {
      throw DataError("leave-row-and-column-out estimates need N, M >= 2");
    }
    out.has_pairs = true;
    out.pair.resize(std::int64_t(N) * M, q);
    Eigen::VectorXd buffer(q);
    const double denom = double(N - 1) * (M - 1);
    for (int l = 0; l < N; ++l) {
      for (int l1 = 0; l1 < M; ++l1) {
        transform(l, l1, buffer);
        out.pair.row(std::int64_t(l) * M + l1) =
            (sums.total.transpose() - sums.row.row(l) - sums.col.row(l1) +
             buffer.transpose()) /
            denom;
      }
    }
  }
  return out;
}

inline LeaveOutEstimates ht_estimates(const TwoWayArray& array,
                                      const HTSettings& s, bool with_pairs) {
  const int N = array.rows();
  const int M = array.cols();
  auto transform = [&](int i, int j, Eigen::Ref<Eigen::VectorXd> out_buf) {
    const auto cell = array.cell(i, j);
    const double w = ht_row_scale(s, i) * cell[s.weight_component];
    if (!(w > 0.0)) {
      throw HtZeroDenominatorError(
          "inverse inclusion weights must be strictly positive");
    }
    out_buf[0] = w * cell[s.y_component];
    out_buf[1] = w;
  };
  // Components: (sum w y, sum w); the ratio is taken per view below.
  LeaveOutEstimates stacked =
      mean_structure_estimates(array, 2, transform, with_pairs);

  auto ratio = [](double num, double den) {
    if (!(den > 0.0)) {
      throw HtZeroDenominatorError("Horvitz-Thompson denominator is zero");
    }
    return num / den;
  };
  LeaveOutEstimates out;
  out.full = Eigen::VectorXd::Constant(1, ratio(stacked.full[0], stacked.full[1]));
  out.single.resize(N + M, 1);
  for (int l = 0; l < N + M; ++l) {
    out.single(l, 0) = ratio(stacked.single(l, 0), stacked.single(l, 1));
  }
  if (with_pairs) {
    out.has_pairs = true;
    out.pair.resize(std::int64_t(N) * M, 1);
    for (std::int64_t r = 0; r < stacked.pair.rows(); ++r) {
      out.pair(r, 0) = ratio(stacked.pair(r, 0), stacked.pair(r, 1));
    }
  }
  return out;
}

inline LeaveOutEstimates logit_estimates(const TwoWayArray& array,
                                         const LogitSettings& s,
                                         bool with_pairs) {
  const int N = array.rows();
  const int M = array.cols();
  const int dim = s.covariate_dimension + 1;

  LeaveOutEstimates out;
  out.full = fit_composite_logit(array, s, LeaveOutSpec::none(), nullptr);
  out.single.resize(N + M, dim);
  // Warm starts from the full-sample fit keep the N + M + NM refits cheap;
  // the convergence test is unchanged, so results match cold starts up to
  // the score tolerance.
  for (int l = 0; l < N; ++l) {
    out.single.row(l) = fit_composite_logit(array, s, LeaveOutSpec::drop_row(l),
                                            &out.full, l);
  }
  for (int j = 0; j < M; ++j) {
    out.single.row(N + j) = fit_composite_logit(
        array, s, LeaveOutSpec::drop_col(j), &out.full, N + j);
  }
  if (with_pairs) {
    out.has_pairs = true;
    out.pair.resize(std::int64_t(N) * M, dim);
    Eigen::VectorXd start(dim);
    for (int l = 0; l < N; ++l) {
      start = out.single.row(l);
      for (int l1 = 0; l1 < M; ++l1) {
        LeaveOutSpec view;
        view.row = l;
        view.col = l1;
        out.pair.row(std::int64_t(l) * M + l1) =
            fit_composite_logit(array, s, view, &start, l);
      }
    }
  }
  return out;
}

}  // namespace est_detail

/// Leave-out estimate table for a plug-in estimator (Mean, HT, logit).
/// For the GEE kind use gee_leave_out_values, which depends on theta.
inline LeaveOutEstimates leave_out_estimates(const EstimatorSpec& spec,
                                             const TwoWayArray& array,
                                             bool with_pairs) {
  switch (spec.kind) {
    case EstimatorKind::kMean: {
      auto transform = [&](int i, int j, Eigen::Ref<Eigen::VectorXd> out_buf) {
        out_buf = array.cell(i, j);
      };
      return est_detail::mean_structure_estimates(array, array.dim(),
                                                  transform, with_pairs);
    }
    case EstimatorKind::kHorvitzThompson:
      return est_detail::ht_estimates(array, spec.ht, with_pairs);
    case EstimatorKind::kCompositeLogit:
      return est_detail::logit_estimates(array, spec.logit, with_pairs);
    case EstimatorKind::kGeeFunction:
    default:
      throw DataError(
          "gee leave-out values depend on theta; use gee_leave_out_values");
  }
}

/// Leave-out S-values for the GEE kind at a fixed theta: the mean-structure
/// engine applied to the transformed cells X_ij(theta).
inline LeaveOutEstimates gee_leave_out_values(const GEESettings& settings,
                                              const TwoWayArray& array,
                                              const Eigen::VectorXd& theta,
                                              bool with_pairs) {
  const int p = settings.covariate_dimension;
  if (int(theta.size()) != p) throw DataError("gee theta has wrong dimension");
  Eigen::VectorXd z(p);
  auto transform = [&](int i, int j, Eigen::Ref<Eigen::VectorXd> out_buf) {
    const auto cell = array.cell(i, j);
    for (int k = 0; k < p; ++k) z[k] = cell[settings.covariate_offset + k];
    const double eta = z.dot(theta);
    const double resid =
        cell[settings.y_component] -
        est_detail::gee_mean_derivative(settings.family, eta);
    out_buf = z * (resid / settings.dispersion);
  };
  return est_detail::mean_structure_estimates(array, p, transform, with_pairs);
}

}  // namespace mel

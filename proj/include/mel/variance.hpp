#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mel/array.hpp"
#include "mel/errors.hpp"
#include "mel/mel.hpp"
#include "mel/stats.hpp"

namespace mel {

enum class VarianceKind { kEww, kMmw, kIid };

inline const char* variance_kind_name(VarianceKind kind) {
  switch (kind) {
    case VarianceKind::kEww:
      return "eww";
    case VarianceKind::kMmw:
      return "mmw";
    case VarianceKind::kIid:
    default:
      return "iid";
  }
}

/// A d x d variance matrix for the point estimate. EWW and IID are not
/// guaranteed positive semidefinite in finite samples, so PSD status is
/// recorded rather than assumed.
struct VarianceEstimate {
  Eigen::MatrixXd matrix;
  VarianceKind kind = VarianceKind::kEww;
  int rows = 0;
  int cols = 0;
  bool positive_semidefinite = false;
  bool clipped = false;
};

namespace var_detail {

inline bool is_psd(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0) >= 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  return eig.eigenvalues().minCoeff() >= -1e-14 * std::max(1.0, m.norm());
}

}  // namespace var_detail

/// Two-way Eicker-White cluster-robust variance: row-cluster cross
/// products plus column-cluster cross products minus the double-counted
/// diagonal, each scaled by 1/(N^2 M^2). Computed from row and column
/// residual sums in O(NM d^2).
inline VarianceEstimate eww_variance(const TwoWayArray& array,
                                     const Eigen::VectorXd& theta_hat) {
  const int N = array.rows();
  const int M = array.cols();
  const int d = array.dim();
  if (int(theta_hat.size()) != d) throw DataError("theta_hat dimension mismatch");

  Eigen::MatrixXd row_sums = Eigen::MatrixXd::Zero(N, d);
  Eigen::MatrixXd col_sums = Eigen::MatrixXd::Zero(M, d);
  Eigen::MatrixXd diagonal = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd dev(d);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      dev = array.cell(i, j) - theta_hat;
      row_sums.row(i) += dev;
      col_sums.row(j) += dev;
      diagonal.noalias() += dev * dev.transpose();
    }
  }
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < N; ++i) {
    sigma.noalias() += row_sums.row(i).transpose() * row_sums.row(i);
  }
  for (int j = 0; j < M; ++j) {
    sigma.noalias() += col_sums.row(j).transpose() * col_sums.row(j);
  }
  sigma -= diagonal;
  sigma /= double(N) * N * double(M) * M;

  VarianceEstimate out;
  out.matrix = std::move(sigma);
  out.kind = VarianceKind::kEww;
  out.rows = N;
  out.cols = M;
  out.positive_semidefinite = var_detail::is_psd(out.matrix);
  return out;
}

/// Modified multiway variance: the corrected pseudo-value second moment
/// evaluated at theta = theta_hat, divided by n. Raises
/// CorrectionNotPdError under the strict policy when the correction
/// over-subtracts.
inline VarianceEstimate mmw_variance(const TwoWayArray& array,
                                     const EstimatorSpec& spec,
                                     bool use_c_factor = true,
                                     CorrectionPolicy policy =
                                         CorrectionPolicy::kStrict) {
  TwoWayMelEngine engine(spec, array, true);
  Eigen::MatrixXd target = engine.corrected_second_moment_at_hat(use_c_factor);
  VarianceEstimate out;
  out.kind = VarianceKind::kMmw;
  out.rows = array.rows();
  out.cols = array.cols();
  // pd_factor enforces positive definiteness (or clips, when allowed).
  Eigen::MatrixXd factor = mel_detail::pd_factor(target, policy, &out.clipped);
  if (out.clipped) target = factor * factor.transpose();
  out.matrix = target / double(engine.pseudo_value_count());
  out.positive_semidefinite = true;
  return out;
}

inline VarianceEstimate mmw_variance_from_engine(const TwoWayMelEngine& engine,
                                                 bool use_c_factor = true,
                                                 CorrectionPolicy policy =
                                                     CorrectionPolicy::kStrict) {
  Eigen::MatrixXd target = engine.corrected_second_moment_at_hat(use_c_factor);
  VarianceEstimate out;
  out.kind = VarianceKind::kMmw;
  out.rows = engine.array().rows();
  out.cols = engine.array().cols();
  Eigen::MatrixXd factor = mel_detail::pd_factor(target, policy, &out.clipped);
  if (out.clipped) target = factor * factor.transpose();
  out.matrix = target / double(engine.pseudo_value_count());
  out.positive_semidefinite = true;
  return out;
}

/// Cellwise sample covariance (NM - 1 denominator) divided by NM, valid
/// only under cell-level independence; included as the naive baseline.
inline VarianceEstimate iid_variance(const TwoWayArray& array,
                                     const Eigen::VectorXd& theta_hat) {
  const int d = array.dim();
  if (int(theta_hat.size()) != d) throw DataError("theta_hat dimension mismatch");
  const double count = double(array.cell_count());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd dev(d);
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      dev = array.cell(i, j) - theta_hat;
      cov.noalias() += dev * dev.transpose();
    }
  }
  cov /= (count - 1.0);

  VarianceEstimate out;
  out.matrix = cov / count;
  out.kind = VarianceKind::kIid;
  out.rows = array.rows();
  out.cols = array.cols();
  out.positive_semidefinite = true;
  return out;
}

/// Quadratic form (theta_hat - theta)' Sigma^-1 (theta_hat - theta),
/// compared against chi^2_d. Requires a positive definite variance.
inline double wald_statistic(const Eigen::VectorXd& theta_hat,
                             const Eigen::VectorXd& theta,
                             const VarianceEstimate& variance) {
  if (theta_hat.size() != theta.size() ||
      variance.matrix.rows() != theta.size()) {
    throw DataError("wald statistic dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(variance.matrix);
  if (llt.info() != Eigen::Success) {
    throw SingularVarianceError(
        "variance matrix is singular or not positive definite");
  }
  const Eigen::VectorXd diff = theta_hat - theta;
  return diff.dot(llt.solve(diff));
}

/// Two-sided Wald interval for a scalar parameter. Reported invalid when
/// the variance estimate is not positive (possible for EWW in finite
/// samples); never clamped.
struct WaldInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool valid = false;
};

inline WaldInterval wald_interval(double theta_hat, double variance,
                                  double level) {
  WaldInterval out;
  if (!(variance > 0.0) || !std::isfinite(variance)) return out;
  const double half_width = stats::two_sided_z(level) * std::sqrt(variance);
  out.lower = theta_hat - half_width;
  out.upper = theta_hat + half_width;
  out.valid = true;
  return out;
}

}  // namespace mel

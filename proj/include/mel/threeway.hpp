#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "mel/array.hpp"
#include "mel/el.hpp"
#include "mel/errors.hpp"
#include "mel/mel.hpp"

namespace mel {

/// Pseudo values for three-way data, n = N + M + T, ordered rows, then
/// columns, then slabs. Axes of extent one contribute no leave-outs and
/// do not count towards n, which makes the two-way statistic the exact
/// T = 1 special case.
struct ThreeWayPseudoValues {
  Eigen::VectorXd theta;
  Eigen::VectorXd S;
  Eigen::MatrixXd S_l;  // n x d
  Eigen::MatrixXd V_l;  // n x d
  int rows = 0, cols = 0, slabs = 0;
};

/// Correction pieces for the three-way modified statistic: the three
/// pairwise grids (subtracted) and the triple grid (added back), plus the
/// factors of gamma_hat gamma_hat' = n^-1 sum V_l(theta_hat) V_l(theta_hat)'
/// and
/// gamma_tilde gamma_tilde' = gamma_hat gamma_hat'
///     - n^-1 [sum QQ' over (l,l1,0) + (0,l1,l2) + (l,0,l2)]
///     + n^-1 sum QQ' over (l,l1,l2).
/// No finite-sample C factor enters here. The triple grid is materialized
/// only while it fits the memory budget; its outer-product sum is always
/// accumulated.
struct ThreeWayCorrection {
  Eigen::MatrixXd Q_rowcol;   // (N*M) x d, row l*M + l1
  Eigen::MatrixXd Q_rowslab;  // (N*T) x d, row l*T + l2
  Eigen::MatrixXd Q_colslab;  // (M*T) x d, row l1*T + l2
  Eigen::MatrixXd Q_triple;   // (N*M*T) x d, row (l*M + l1)*T + l2; may be empty
  bool triple_materialized = false;
  Eigen::MatrixXd gamma_hat;
  Eigen::MatrixXd gamma_tilde;
  bool clipped = false;
  std::size_t leave_out_evaluations = 0;
};

namespace threeway_detail {

/// Axis sums, pairwise partial sums, and total for O(1) leave-out means.
struct Sums {
  Eigen::VectorXd total;
  Eigen::MatrixXd row;      // N x d: sum over (j, t)
  Eigen::MatrixXd col;      // M x d: sum over (i, t)
  Eigen::MatrixXd slab;     // T x d: sum over (i, j)
  Eigen::MatrixXd pair_ij;  // (N*M) x d: sum over t
  Eigen::MatrixXd pair_it;  // (N*T) x d: sum over j
  Eigen::MatrixXd pair_jt;  // (M*T) x d: sum over i

  explicit Sums(const ThreeWayArray& a)
      : total(Eigen::VectorXd::Zero(a.dim())),
        row(Eigen::MatrixXd::Zero(a.rows(), a.dim())),
        col(Eigen::MatrixXd::Zero(a.cols(), a.dim())),
        slab(Eigen::MatrixXd::Zero(a.slabs(), a.dim())),
        pair_ij(Eigen::MatrixXd::Zero(std::int64_t(a.rows()) * a.cols(), a.dim())),
        pair_it(Eigen::MatrixXd::Zero(std::int64_t(a.rows()) * a.slabs(), a.dim())),
        pair_jt(Eigen::MatrixXd::Zero(std::int64_t(a.cols()) * a.slabs(), a.dim())) {
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) {
        for (int t = 0; t < a.slabs(); ++t) {
          const auto cell = a.cell(i, j, t);
          row.row(i) += cell;
          pair_ij.row(std::int64_t(i) * a.cols() + j) += cell;
          pair_it.row(std::int64_t(i) * a.slabs() + t) += cell;
          pair_jt.row(std::int64_t(j) * a.slabs() + t) += cell;
        }
      }
    }
    for (int i = 0; i < a.rows(); ++i) total += row.row(i);
    for (int j = 0; j < a.cols(); ++j) {
      for (int t = 0; t < a.slabs(); ++t) {
        col.row(j) += pair_jt.row(std::int64_t(j) * a.slabs() + t);
      }
    }
    for (int t = 0; t < a.slabs(); ++t) {
      for (int j = 0; j < a.cols(); ++j) {
        slab.row(t) += pair_jt.row(std::int64_t(j) * a.slabs() + t);
      }
    }
  }
};

}  // namespace threeway_detail

/// All the leave-out machinery for the three-way sample mean on one array.
/// The corrected second moment uses V_l(theta_hat) throughout (its printed
/// form), so it is theta-free and computed once.
class ThreeWayMelEngine {
 public:
  explicit ThreeWayMelEngine(const ThreeWayArray& array,
                             std::size_t triple_budget_bytes = std::size_t(64)
                                                               << 20,
                             double el_tolerance = 1e-9,
                             int el_max_iterations = 100)
      : array_(&array),
        sums_(array),
        el_tolerance_(el_tolerance),
        el_max_iterations_(el_max_iterations),
        triple_budget_bytes_(triple_budget_bytes) {
    const int d = array.dim();
    theta_hat_ = sums_.total / double(array.cell_count());

    axis_counts_[0] = array.rows() >= 2 ? array.rows() : 0;
    axis_counts_[1] = array.cols() >= 2 ? array.cols() : 0;
    axis_counts_[2] = array.slabs() >= 2 ? array.slabs() : 0;
    n_ = axis_counts_[0] + axis_counts_[1] + axis_counts_[2];
    if (n_ == 0) throw DataError("three-way array has no axis of extent >= 2");

    // Single leave-out estimates, rows then columns then slabs.
    single_.resize(n_, d);
    int r = 0;
    const double N = array.rows(), M = array.cols(), T = array.slabs();
    for (int l = 0; l < axis_counts_[0]; ++l) {
      single_.row(r++) = (sums_.total.transpose() - sums_.row.row(l)) /
                         ((N - 1.0) * M * T);
    }
    for (int l1 = 0; l1 < axis_counts_[1]; ++l1) {
      single_.row(r++) = (sums_.total.transpose() - sums_.col.row(l1)) /
                         (N * (M - 1.0) * T);
    }
    for (int l2 = 0; l2 < axis_counts_[2]; ++l2) {
      single_.row(r++) = (sums_.total.transpose() - sums_.slab.row(l2)) /
                         (N * M * (T - 1.0));
    }
    // V_l(theta_hat) = [n theta_hat - (n-1) theta_hat^(l)] - theta_hat.
    v_hat_ = (double(n_) * theta_hat_.transpose()).replicate(n_, 1) -
             (double(n_) - 1.0) * single_;
    v_hat_.rowwise() -= theta_hat_.transpose();
    second_moment_hat_ = v_hat_.transpose() * v_hat_ / double(n_);
  }

  const Eigen::VectorXd& point_estimate() const { return theta_hat_; }
  int pseudo_value_count() const { return n_; }
  int dim() const { return int(theta_hat_.size()); }

  ThreeWayPseudoValues pseudo_values(const Eigen::VectorXd& theta) const {
    ThreeWayPseudoValues out;
    out.theta = theta;
    out.S = theta_hat_ - theta;
    out.S_l = single_.rowwise() - theta.transpose();
    out.V_l = v_hat_.rowwise() + (theta_hat_ - theta).transpose();
    out.rows = array_->rows();
    out.cols = array_->cols();
    out.slabs = array_->slabs();
    return out;
  }

  double mel(const Eigen::VectorXd& theta) const {
    return el_statistic(v_hat_.rowwise() + (theta_hat_ - theta).transpose(),
                        el_tolerance_, el_max_iterations_);
  }

  double mmel(const Eigen::VectorXd& theta,
              CorrectionPolicy policy = CorrectionPolicy::kStrict,
              bool* clipped = nullptr) const {
    ensure_correction(policy, clipped);
    const Eigen::MatrixXd v_theta =
        v_hat_.rowwise() + (theta_hat_ - theta).transpose();
    const Eigen::MatrixXd delta = v_hat_ - v_theta;
    const Eigen::MatrixXd modified =
        v_hat_ -
        mel_detail::apply_correction_map(gamma_hat_, gamma_tilde_, delta);
    return el_statistic(modified, el_tolerance_, el_max_iterations_);
  }

  /// Full correction bundle, materializing the triple grid when it fits
  /// the memory budget.
  ThreeWayCorrection correction(CorrectionPolicy policy =
                                    CorrectionPolicy::kStrict) const {
    require_correctable();
    const int d = array_->dim();
    const int N = array_->rows(), M = array_->cols(), T = array_->slabs();
    const double n = double(n_);

    ThreeWayCorrection out;
    out.Q_rowcol.resize(std::int64_t(N) * M, d);
    out.Q_rowslab.resize(std::int64_t(N) * T, d);
    out.Q_colslab.resize(std::int64_t(M) * T, d);
    out.leave_out_evaluations = std::size_t(n_);  // the singles, done above

    Eigen::MatrixXd sum_pairwise = Eigen::MatrixXd::Zero(d, d);
    accumulate_pairwise(&out.Q_rowcol, &out.Q_rowslab, &out.Q_colslab,
                        &sum_pairwise, &out.leave_out_evaluations);

    const std::size_t triple_bytes =
        std::size_t(N) * M * T * d * sizeof(double);
    out.triple_materialized = triple_bytes <= triple_budget_bytes_;
    if (out.triple_materialized) {
      out.Q_triple.resize(std::int64_t(N) * M * T, d);
    }
    Eigen::MatrixXd sum_triple = Eigen::MatrixXd::Zero(d, d);
    accumulate_triple(out.triple_materialized ? &out.Q_triple : nullptr,
                          &sum_triple, &out.leave_out_evaluations);

    const Eigen::MatrixXd corrected =
        second_moment_hat_ - sum_pairwise / n + sum_triple / n;
    out.gamma_hat = mel_detail::psd_factor(second_moment_hat_);
    out.gamma_tilde = mel_detail::pd_factor(corrected, policy, &out.clipped);
    return out;
  }

  const Eigen::MatrixXd& pseudo_value_second_moment() const {
    return second_moment_hat_;
  }

 private:
  void require_correctable() const {
    if (array_->rows() < 2 || array_->cols() < 2 || array_->slabs() < 2) {
      throw DataError(
          "three-way correction terms need every extent >= 2 (the leave-out "
          "denominators vanish otherwise)");
    }
  }

  /// Pairwise correction grids Q_{l,l1,0}, Q_{l,0,l2}, Q_{0,l1,l2}:
  /// accumulates the outer-product sum and optionally writes the grids.
  void accumulate_pairwise(Eigen::MatrixXd* grid_rowcol,
                           Eigen::MatrixXd* grid_rowslab,
                           Eigen::MatrixXd* grid_colslab, Eigen::MatrixXd* sum,
                           std::size_t* evaluations) const {
    const int d = array_->dim();
    const int N = array_->rows(), M = array_->cols(), T = array_->slabs();
    const double n = double(n_);
    const double dN = N, dM = M, dT = T;
    const auto hat = theta_hat_.transpose();

    Eigen::RowVectorXd q(d), pair_est(d);
    for (int l = 0; l < N; ++l) {
      for (int l1 = 0; l1 < M; ++l1) {
        pair_est =
            (sums_.total.transpose() - sums_.row.row(l) - sums_.col.row(l1) +
             sums_.pair_ij.row(std::int64_t(l) * M + l1)) /
            ((dN - 1.0) * (dM - 1.0) * dT);
        q = n * hat - (n - 1.0) * (single_.row(l) + single_.row(N + l1)) +
            (n - 2.0) * pair_est;
        sum->noalias() += q.transpose() * q;
        if (grid_rowcol != nullptr) grid_rowcol->row(std::int64_t(l) * M + l1) = q;
        ++(*evaluations);
      }
    }
    for (int l = 0; l < N; ++l) {
      for (int l2 = 0; l2 < T; ++l2) {
        pair_est =
            (sums_.total.transpose() - sums_.row.row(l) - sums_.slab.row(l2) +
             sums_.pair_it.row(std::int64_t(l) * T + l2)) /
            ((dN - 1.0) * dM * (dT - 1.0));
        q = n * hat - (n - 1.0) * (single_.row(l) + single_.row(N + M + l2)) +
            (n - 2.0) * pair_est;
        sum->noalias() += q.transpose() * q;
        if (grid_rowslab != nullptr) grid_rowslab->row(std::int64_t(l) * T + l2) = q;
        ++(*evaluations);
      }
    }
    for (int l1 = 0; l1 < M; ++l1) {
      for (int l2 = 0; l2 < T; ++l2) {
        pair_est =
            (sums_.total.transpose() - sums_.col.row(l1) - sums_.slab.row(l2) +
             sums_.pair_jt.row(std::int64_t(l1) * T + l2)) /
            (dN * (dM - 1.0) * (dT - 1.0));
        q = n * hat - (n - 1.0) * (single_.row(N + l1) + single_.row(N + M + l2)) +
            (n - 2.0) * pair_est;
        sum->noalias() += q.transpose() * q;
        if (grid_colslab != nullptr) grid_colslab->row(std::int64_t(l1) * T + l2) = q;
        ++(*evaluations);
      }
    }
  }

  /// Streams Q_{l,l1,l2} over the full grid, accumulating the outer-product
  /// sum and optionally writing the grid.
  void accumulate_triple(Eigen::MatrixXd* grid, Eigen::MatrixXd* sum,
                             std::size_t* evaluations) const {
    const int d = array_->dim();
    const int N = array_->rows(), M = array_->cols(), T = array_->slabs();
    const double n = double(n_);
    const double dN = N, dM = M, dT = T;
    const auto hat = theta_hat_.transpose();

    Eigen::RowVectorXd q(d), triple_est(d), pair_ij_est(d), pair_it_est(d),
        pair_jt_est(d);
    for (int l = 0; l < N; ++l) {
      for (int l1 = 0; l1 < M; ++l1) {
        pair_ij_est =
            (sums_.total.transpose() - sums_.row.row(l) - sums_.col.row(l1) +
             sums_.pair_ij.row(std::int64_t(l) * M + l1)) /
            ((dN - 1.0) * (dM - 1.0) * dT);
        for (int l2 = 0; l2 < T; ++l2) {
          pair_it_est =
              (sums_.total.transpose() - sums_.row.row(l) - sums_.slab.row(l2) +
               sums_.pair_it.row(std::int64_t(l) * T + l2)) /
              ((dN - 1.0) * dM * (dT - 1.0));
          pair_jt_est =
              (sums_.total.transpose() - sums_.col.row(l1) - sums_.slab.row(l2) +
               sums_.pair_jt.row(std::int64_t(l1) * T + l2)) /
              (dN * (dM - 1.0) * (dT - 1.0));
          triple_est =
              (sums_.total.transpose() - sums_.row.row(l) - sums_.col.row(l1) -
               sums_.slab.row(l2) + sums_.pair_ij.row(std::int64_t(l) * M + l1) +
               sums_.pair_it.row(std::int64_t(l) * T + l2) +
               sums_.pair_jt.row(std::int64_t(l1) * T + l2) -
               array_->cell(l, l1, l2).transpose()) /
              ((dN - 1.0) * (dM - 1.0) * (dT - 1.0));
          q = n * hat -
              (n - 1.0) * (single_.row(l) + single_.row(N + l1) +
                           single_.row(N + M + l2)) +
              (n - 2.0) * (pair_ij_est + pair_jt_est + pair_it_est) -
              (n - 3.0) * triple_est;
          sum->noalias() += q.transpose() * q;
          if (grid != nullptr) {
            grid->row((std::int64_t(l) * M + l1) * T + l2) = q;
          }
          ++(*evaluations);
        }
      }
    }
  }

  void ensure_correction(CorrectionPolicy policy, bool* clipped) const {
    if (have_factors_ && policy == factor_policy_) {
      if (clipped != nullptr) *clipped = factors_clipped_;
      return;
    }
    require_correctable();
    const int d = array_->dim();
    const double n = double(n_);

    Eigen::MatrixXd sum_pairwise = Eigen::MatrixXd::Zero(d, d);
    std::size_t evals = 0;
    accumulate_pairwise(nullptr, nullptr, nullptr, &sum_pairwise, &evals);

    Eigen::MatrixXd sum_triple = Eigen::MatrixXd::Zero(d, d);
    accumulate_triple(nullptr, &sum_triple, &evals);

    const Eigen::MatrixXd corrected =
        second_moment_hat_ - sum_pairwise / n + sum_triple / n;
    gamma_hat_ = mel_detail::psd_factor(second_moment_hat_);
    factors_clipped_ = false;
    gamma_tilde_ = mel_detail::pd_factor(corrected, policy, &factors_clipped_);
    factor_policy_ = policy;
    have_factors_ = true;
    if (clipped != nullptr) *clipped = factors_clipped_;
  }

  const ThreeWayArray* array_;
  threeway_detail::Sums sums_;
  double el_tolerance_;
  int el_max_iterations_;
  std::size_t triple_budget_bytes_;
  Eigen::VectorXd theta_hat_;
  int axis_counts_[3] = {0, 0, 0};
  int n_ = 0;
  Eigen::MatrixXd single_;
  Eigen::MatrixXd v_hat_;
  Eigen::MatrixXd second_moment_hat_;
  mutable bool have_factors_ = false;
  mutable bool factors_clipped_ = false;
  mutable CorrectionPolicy factor_policy_ = CorrectionPolicy::kStrict;
  mutable Eigen::MatrixXd gamma_hat_, gamma_tilde_;
};

/// Pseudo values from the three leave-one-index-out means.
inline ThreeWayPseudoValues threeway_pseudo_values(const ThreeWayArray& array,
                                                   const Eigen::VectorXd& theta) {
  return ThreeWayMelEngine(array).pseudo_values(theta);
}

/// Three-way modified MEL statistic at theta.
inline double threeway_mmel_statistic(const ThreeWayArray& array,
                                      const Eigen::VectorXd& theta,
                                      CorrectionPolicy policy =
                                          CorrectionPolicy::kStrict) {
  return ThreeWayMelEngine(array).mmel(theta, policy);
}

/// Correction bundle (Q grids and factors) for diagnostics and tests.
inline ThreeWayCorrection threeway_correction(const ThreeWayArray& array,
                                              CorrectionPolicy policy =
                                                  CorrectionPolicy::kStrict,
                                              std::size_t triple_budget_bytes =
                                                  std::size_t(64) << 20) {
  return ThreeWayMelEngine(array, triple_budget_bytes).correction(policy);
}

}  // namespace mel

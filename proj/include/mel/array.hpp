#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mel/errors.hpp"

namespace mel {

/// Identifies which indices a leave-out view removes: at most one row,
/// one column, and (three-way only) one slab. kKeep leaves an axis intact.
struct LeaveOutSpec {
  static constexpr int kKeep = -1;
  int row = kKeep;
  int col = kKeep;
  int slab = kKeep;

  static LeaveOutSpec none() { return {}; }
  static LeaveOutSpec drop_row(int i) { return {i, kKeep, kKeep}; }
  static LeaveOutSpec drop_col(int j) { return {kKeep, j, kKeep}; }
  static LeaveOutSpec drop_slab(int t) { return {kKeep, kKeep, t}; }
};

/// Balanced N x M grid of d-dimensional observations. Row-major storage
/// with the d components of each cell contiguous. Immutable by convention
/// once filled; every downstream computation takes it by const reference.
class TwoWayArray {
 public:
  TwoWayArray(int rows, int cols, int dim)
      : rows_(rows), cols_(cols), dim_(dim),
        cells_(std::size_t(rows) * cols * dim, 0.0) {
    if (rows < 1 || cols < 1 || dim < 1) {
      throw DataError("two-way array extents must be positive");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int dim() const { return dim_; }
  /// Number of leave-out pseudo values, n = N + M.
  int leave_out_count() const { return rows_ + cols_; }
  std::int64_t cell_count() const { return std::int64_t(rows_) * cols_; }

  Eigen::Map<const Eigen::VectorXd> cell(int i, int j) const {
    return {cells_.data() + offset(i, j), dim_};
  }
  Eigen::Map<Eigen::VectorXd> cell(int i, int j) {
    return {cells_.data() + offset(i, j), dim_};
  }
  double at(int i, int j, int k = 0) const { return cells_[offset(i, j) + k]; }
  double& at(int i, int j, int k = 0) { return cells_[offset(i, j) + k]; }

  const std::vector<double>& data() const { return cells_; }

  bool all_finite() const {
    for (double v : cells_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t offset(int i, int j) const {
    return (std::size_t(i) * cols_ + j) * dim_;
  }

  int rows_, cols_, dim_;
  std::vector<double> cells_;
};

/// Balanced N x M x T grid. Extents of one are permitted so the two-way
/// machinery arises as the degenerate slab case; the correction terms
/// additionally require every extent to be at least two.
class ThreeWayArray {
 public:
  ThreeWayArray(int rows, int cols, int slabs, int dim)
      : rows_(rows), cols_(cols), slabs_(slabs), dim_(dim),
        cells_(std::size_t(rows) * cols * slabs * dim, 0.0) {
    if (rows < 1 || cols < 1 || slabs < 1 || dim < 1) {
      throw DataError("three-way array extents must be positive");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int slabs() const { return slabs_; }
  int dim() const { return dim_; }
  std::int64_t cell_count() const {
    return std::int64_t(rows_) * cols_ * slabs_;
  }

  Eigen::Map<const Eigen::VectorXd> cell(int i, int j, int t) const {
    return {cells_.data() + offset(i, j, t), dim_};
  }
  Eigen::Map<Eigen::VectorXd> cell(int i, int j, int t) {
    return {cells_.data() + offset(i, j, t), dim_};
  }
  double at(int i, int j, int t, int k = 0) const {
    return cells_[offset(i, j, t) + k];
  }
  double& at(int i, int j, int t, int k = 0) {
    return cells_[offset(i, j, t) + k];
  }

  bool all_finite() const {
    for (double v : cells_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t offset(int i, int j, int t) const {
    return ((std::size_t(i) * cols_ + j) * slabs_ + t) * dim_;
  }

  int rows_, cols_, slabs_, dim_;
  std::vector<double> cells_;
};

inline Eigen::VectorXd full_mean(const TwoWayArray& array) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(array.dim());
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) sum += array.cell(i, j);
  }
  return sum / double(array.cell_count());
}

/// Mean over the cells retained by the spec; denominators (N-1)M, N(M-1),
/// or (N-1)(M-1) as appropriate. The source array is never modified.
inline Eigen::VectorXd leave_out_mean(const TwoWayArray& array,
                                      const LeaveOutSpec& spec) {
  if (spec.slab != LeaveOutSpec::kKeep) {
    throw DataError("two-way leave-out spec cannot drop a slab");
  }
  if (spec.row != LeaveOutSpec::kKeep &&
      (spec.row < 0 || spec.row >= array.rows())) {
    throw DataError("leave-out row index out of range");
  }
  if (spec.col != LeaveOutSpec::kKeep &&
      (spec.col < 0 || spec.col >= array.cols())) {
    throw DataError("leave-out column index out of range");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(array.dim());
  std::int64_t kept = 0;
  for (int i = 0; i < array.rows(); ++i) {
    if (i == spec.row) continue;
    for (int j = 0; j < array.cols(); ++j) {
      if (j == spec.col) continue;
      sum += array.cell(i, j);
      ++kept;
    }
  }
  if (kept == 0) throw DataError("leave-out view retains no cells");
  return sum / double(kept);
}

inline Eigen::VectorXd full_mean(const ThreeWayArray& array) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(array.dim());
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      for (int t = 0; t < array.slabs(); ++t) sum += array.cell(i, j, t);
    }
  }
  return sum / double(array.cell_count());
}

inline Eigen::VectorXd leave_out_mean(const ThreeWayArray& array,
                                      const LeaveOutSpec& spec) {
  auto check = [](int idx, int extent, const char* what) {
    if (idx != LeaveOutSpec::kKeep && (idx < 0 || idx >= extent)) {
      throw DataError(std::string("leave-out ") + what + " index out of range");
    }
  };
  check(spec.row, array.rows(), "row");
  check(spec.col, array.cols(), "column");
  check(spec.slab, array.slabs(), "slab");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(array.dim());
  std::int64_t kept = 0;
  for (int i = 0; i < array.rows(); ++i) {
    if (i == spec.row) continue;
    for (int j = 0; j < array.cols(); ++j) {
      if (j == spec.col) continue;
      for (int t = 0; t < array.slabs(); ++t) {
        if (t == spec.slab) continue;
        sum += array.cell(i, j, t);
        ++kept;
      }
    }
  }
  if (kept == 0) throw DataError("leave-out view retains no cells");
  return sum / double(kept);
}

}  // namespace mel

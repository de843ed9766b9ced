#pragma once

#include <stdexcept>
#include <string>

namespace mel {

/// Base class for every exception thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: CSV parse failures, missing cells, bad extents.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dual maximization exhausted its iteration budget before converging.
class MaxIterationsError : public Error {
 public:
  using Error::Error;
};

/// Composite logit fit diverged, typically quasi-separation in a small
/// leave-out subsample. Carries the leave-out index when one applies
/// (-1 for a full-sample fit).
class LogitSeparationError : public Error {
 public:
  explicit LogitSeparationError(const std::string& what, int leave_out_index = -1)
      : Error(what), leave_out_index_(leave_out_index) {}
  int leave_out_index() const { return leave_out_index_; }

 private:
  int leave_out_index_;
};

class LogitMaxIterationsError : public Error {
 public:
  explicit LogitMaxIterationsError(const std::string& what, int leave_out_index = -1)
      : Error(what), leave_out_index_(leave_out_index) {}
  int leave_out_index() const { return leave_out_index_; }

 private:
  int leave_out_index_;
};

/// Horvitz-Thompson denominator is zero or negative on some view.
class HtZeroDenominatorError : public Error {
 public:
  using Error::Error;
};

/// Generalized-linear point fit failed (singular system or divergence).
class GeeFitError : public Error {
 public:
  using Error::Error;
};

/// The corrected second-moment matrix has an eigenvalue <= 0, so the
/// modified statistic is undefined at this sample size.
class CorrectionNotPdError : public Error {
 public:
  using Error::Error;
};

class SingularVarianceError : public Error {
 public:
  using Error::Error;
};

/// Confidence-interval bracketing failed to enclose the threshold.
class BracketFailureError : public Error {
 public:
  using Error::Error;
};

/// Block-model edge probabilities would exceed one at the requested mean.
class SbmScaleError : public Error {
 public:
  using Error::Error;
};

}  // namespace mel

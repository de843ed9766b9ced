#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace mel::stats {

inline double chi_squared_cdf(int dof, double x) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;  // rejection sentinel
  return boost::math::cdf(boost::math::chi_squared(double(dof)), x);
}

/// Lower-tail quantile: returns q with P(X <= q) = prob for X ~ chi^2_dof.
inline double chi_squared_quantile(int dof, double prob) {
  return boost::math::quantile(boost::math::chi_squared(double(dof)), prob);
}

inline double normal_cdf(double x) {
  return boost::math::cdf(boost::math::normal(), x);
}

inline double normal_pdf(double x) {
  return boost::math::pdf(boost::math::normal(), x);
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

/// z_{alpha/2} for a two-sided interval at the given coverage level.
inline double two_sided_z(double level) {
  return normal_quantile(0.5 + 0.5 * level);
}

/// Kolmogorov-Smirnov sup distance between the empirical CDF of a sample
/// and a reference CDF.
inline double ks_distance(std::vector<double> sample,
                          const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = double(sample.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    dist = std::max(dist, std::abs(double(i + 1) / n - f));
    dist = std::max(dist, std::abs(double(i) / n - f));
  }
  return dist;
}

/// Monte Carlo standard error of an empirical proportion.
inline double proportion_se(double p, int replications) {
  if (replications <= 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / double(replications));
}

}  // namespace mel::stats

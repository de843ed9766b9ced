#pragma once

#include <cmath>

#include "mel/stats.hpp"

namespace mel {

/// Second-order terms of the signed-root expansions
///   P{sqrt(stat) <= t} = Phi(t) - correction(t) + o(n^-1)
/// for the Wald statistic with the two-way cluster-robust variance and for
/// the modified EL statistic (with and without the C factor in the
/// correction term). These are analytic diagnostics: all three vanish as
/// N, M grow, and the modified-statistic terms sit closer to zero than the
/// Wald term.
struct EdgeworthTerms {
  double wald = 0.0;
  double mmel = 0.0;
  double mmel_no_c = 0.0;
};

inline EdgeworthTerms edgeworth_terms(int rows, int cols, double t) {
  const double inv = 1.0 / rows + 1.0 / cols;
  const double n = double(rows) + double(cols);
  const double phi = stats::normal_pdf(t);
  const double t3 = t * t * t;
  const double cubic = 0.5 * (inv - 2.0 * (std::sqrt(2.0) - 1.0) / n);

  EdgeworthTerms out;
  out.wald = (1.5 * inv * t + 0.5 * inv * t3) * phi;
  out.mmel = ((1.5 * inv - 3.0 / rows - 3.0 / cols + 5.0 / n) * t + cubic * t3) * phi;
  out.mmel_no_c =
      ((1.5 * inv - 1.0 / rows - 1.0 / cols + 1.0 / n) * t + cubic * t3) * phi;
  return out;
}

/// Evaluator bound to one (N, M) design, as used by the diagnostics CLI
/// and the sweep tests.
struct EdgeworthDiagnostic {
  int rows = 0;
  int cols = 0;
  EdgeworthTerms at(double t) const { return edgeworth_terms(rows, cols, t); }
};

}  // namespace mel

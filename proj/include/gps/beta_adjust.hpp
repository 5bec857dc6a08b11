#pragma once

#include <cstdint>

namespace gps {

// Natural log of the gamma function for x > 0. Lanczos series; absolute error
// below 1e-10 on [0.5, 1e4].
double log_gamma(double x);

// Regularized incomplete beta function I_x(a, b) for x in [0, 1], a > 0,
// b > 0. Continued fraction (modified Lentz) with the symmetry switch at
// x > (a+1)/(a+b+2); absolute error below 1e-10 for a, b up to 1e4.
double regularized_incomplete_beta(double x, double a, double b);

// Probability that a split-conformal rule calibrated at level alpha0 on n
// points has conditional coverage below 1 - alpha. Coverage given the
// calibration set is Beta(k, n+1-k) with k = conformal_rank(alpha0, n), so
// this is I_{1-alpha}(k, n+1-k). Requires k <= n; k = n+1 makes the second
// shape parameter zero and throws.
double coverage_delta(double alpha0, double alpha, std::int64_t n);

struct AlphaAdjustment {
  double alpha_target = 0.0;  // the level the user asked to certify
  double delta = 0.0;         // allowed probability of falling short
  std::int64_t n = 0;
  double alpha0 = 0.0;        // marginal CP level achieving the pair above
  std::int64_t k = 0;         // conformal_rank(alpha0, n)
  double delta_achieved = 0.0;
};

// Largest grid point alpha0 = alpha - i*grid_step (i = 0, 1, ...) with
// coverage_delta(alpha0, alpha, n) <= delta. Calibrating at alpha0 then gives
// the nested guarantee: conditional coverage >= 1-alpha with probability at
// least 1-delta over calibration draws. Throws when no feasible grid point
// exists, reporting the smallest achievable delta.
AlphaAdjustment adjust_alpha(double alpha, double delta, std::int64_t n,
                             double grid_step = 1e-4);

}  // namespace gps

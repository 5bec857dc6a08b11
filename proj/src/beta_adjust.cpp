#include "gps/beta_adjust.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gps/conformal.hpp"

namespace gps {

namespace {

// Lanczos approximation, g = 7, 9 coefficients.
constexpr double kLanczos[9] = {
    0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
    771.32342877765313,       -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};

double log_gamma_lanczos(double x) {
  // Valid for x >= 0.5.
  const double z = x - 1.0;
  double sum = kLanczos[0];
  for (int i = 1; i < 9; ++i) sum += kLanczos[i] / (z + i);
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t +
         std::log(sum);
}

// Continued fraction for I_x(a,b), modified Lentz. Converges for
// x < (a+1)/(a+b+2); the caller flips to the complementary call otherwise.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 4000;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;

  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;

  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;

    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw std::invalid_argument("log_gamma: x must be positive, got " + std::to_string(x));
  }
  if (x >= 0.5) return log_gamma_lanczos(x);
  // Reflection for (0, 0.5): Gamma(x) Gamma(1-x) = pi / sin(pi x).
  return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) -
         log_gamma_lanczos(1.0 - x);
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("regularized_incomplete_beta: a and b must be positive");
  }
  if (x < 0.0 || x > 1.0) {
    throw std::invalid_argument("regularized_incomplete_beta: x must lie in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double coverage_delta(double alpha0, double alpha, std::int64_t n) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("coverage_delta: alpha must lie in (0, 1)");
  }
  if (n < 1) throw std::invalid_argument("coverage_delta: n must be >= 1");
  const std::int64_t k = conformal_rank(alpha0, n);
  if (k > n) {
    throw std::invalid_argument(
        "coverage_delta: rank k(alpha0) = n+1 leaves a degenerate Beta(k, 0) "
        "coverage law; use a larger alpha0 or a larger n");
  }
  return regularized_incomplete_beta(1.0 - alpha, static_cast<double>(k),
                                     static_cast<double>(n + 1 - k));
}

AlphaAdjustment adjust_alpha(double alpha, double delta, std::int64_t n,
                             double grid_step) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("adjust_alpha: alpha must lie in (0, 1)");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("adjust_alpha: delta must lie in (0, 1)");
  }
  if (n < 1) throw std::invalid_argument("adjust_alpha: n must be >= 1");
  if (!(grid_step > 0.0)) throw std::invalid_argument("adjust_alpha: grid_step must be > 0");

  // Descend from alpha; delta shrinks as alpha0 does, so the first feasible
  // grid point is the least conservative one.
  double min_delta = std::numeric_limits<double>::infinity();
  bool any_valid = false;
  for (std::int64_t i = 0;; ++i) {
    const double alpha0 = alpha - static_cast<double>(i) * grid_step;
    if (alpha0 < grid_step) break;
    const std::int64_t k = conformal_rank(alpha0, n);
    // Shrinking alpha0 only raises k, so nothing below this point is valid.
    if (k > n) break;
    any_valid = true;
    const double d = coverage_delta(alpha0, alpha, n);
    if (d < min_delta) min_delta = d;
    if (d <= delta) {
      return AlphaAdjustment{alpha, delta, n, alpha0, k, d};
    }
  }

  if (!any_valid) {
    throw std::runtime_error(
        "adjust_alpha: no valid alpha0 on the grid (alpha < 1/(n+1); the "
        "conformal rank exceeds n for every candidate) -- increase n");
  }
  throw std::runtime_error(
      "adjust_alpha: no feasible alpha0; minimum achievable delta is " +
      std::to_string(min_delta) + " > requested " + std::to_string(delta) +
      " -- increase n or relax delta");
}

}  // namespace gps

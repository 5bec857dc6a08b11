#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gps {

// Maps an input feature vector to an estimated success probability in (0, 1).
// Concrete models live in estimators.hpp; the simulator supplies ground-truth
// predictors for synthetic worlds.
using SuccessPredictor = std::function<double(std::span<const double>)>;

// One calibration record: input features and the 1-based index K of the first
// admissible draw, with K = budget + 1 standing in for "no success within
// budget".
struct AugmentedExample {
  std::vector<double> features;
  std::int64_t k = 1;
};

// Outcome of the stopping rule: either draw k_hat samples, or abstain and
// return the whole output space.
struct StoppingDecision {
  std::optional<std::int64_t> k_hat;

  bool abstained() const { return !k_hat.has_value(); }

  static StoppingDecision finite(std::int64_t k) { return StoppingDecision{k}; }
  static StoppingDecision abstain() { return StoppingDecision{std::nullopt}; }
};

// Frozen calibration artifact. `adjustment` is the conformal quantile of
// `scores`; nullopt encodes +infinity (the quantile rank exceeds n, so the
// rule abstains on every input).
struct CalibratedRule {
  double alpha = 0.0;
  std::int64_t budget = 0;
  std::optional<std::int64_t> adjustment;
  std::int64_t n_cal = 0;
  std::vector<std::int64_t> scores;  // retained in input order, for diagnostics
  SuccessPredictor predictor;
};

// Rank of the conformal quantile: the smallest integer r >= (1-alpha)*(n+1).
// The product is nudged down a few ulp before the ceiling; otherwise values
// that are exact integers in real arithmetic (alpha = 0.1, n = 9 gives 9) can
// land one ulp high and shift the rank by one.
std::int64_t conformal_rank(double alpha, std::int64_t n);

// Smallest integer k >= 1 with (1 - p_hat)^k <= alpha, i.e. the 1-alpha
// quantile of a Geometric(p_hat) draw count. Throws std::invalid_argument if
// p_hat or alpha lies outside the open unit interval.
std::int64_t geometric_quantile(double p_hat, double alpha);

// One-sided CQR residual max(0, k - q_hat). Requires k >= 1 and q_hat >= 1.
std::int64_t cqr_score(std::int64_t k, std::int64_t q_hat);

// r-th smallest score with r = conformal_rank(alpha, n); nullopt when r > n
// (not enough calibration data for this alpha). Throws on an empty score set.
std::optional<std::int64_t> conformal_quantile(std::span<const std::int64_t> scores,
                                               double alpha);

// Calibrates the stopping rule: per-example geometric quantiles at `alpha`,
// CQR scores against the recorded first-success counts, and the conformal
// quantile of those scores as the additive adjustment. All examples must have
// been built under `budget`.
CalibratedRule calibrate(const std::vector<AugmentedExample>& examples,
                         SuccessPredictor predictor, double alpha,
                         std::int64_t budget);

// Applies the calibrated rule to a new input: k_hat = q_hat(x) + adjustment,
// abstaining when that exceeds the budget (or the adjustment is infinite).
StoppingDecision stopping_rule(const CalibratedRule& rule,
                               std::span<const double> features);

}  // namespace gps

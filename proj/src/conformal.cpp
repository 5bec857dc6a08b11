#include "gps/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gps {

namespace {

void require_unit_interval(double v, const char* name) {
  if (!(v > 0.0) || !(v < 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in (0, 1), got " +
                                std::to_string(v));
  }
}

}  // namespace

std::int64_t conformal_rank(double alpha, std::int64_t n) {
  require_unit_interval(alpha, "alpha");
  if (n < 1) throw std::invalid_argument("conformal_rank: n must be >= 1");
  const double v = (1.0 - alpha) * static_cast<double>(n + 1);
  const double nudged = v * (1.0 - 8.0 * std::numeric_limits<double>::epsilon());
  return static_cast<std::int64_t>(std::ceil(nudged));
}

std::int64_t geometric_quantile(double p_hat, double alpha) {
  require_unit_interval(p_hat, "p_hat");
  require_unit_interval(alpha, "alpha");

  const double q = 1.0 - p_hat;
  const double ratio = std::log(alpha) / std::log1p(-p_hat);

  // Counts beyond any realistic budget: saturate, skipping the integer
  // fix-up (the pow predicate is flat out there). Also covers p_hat small
  // enough that the ratio overflows.
  if (!(ratio < 1e15)) return std::numeric_limits<std::int64_t>::max() / 2;
  if (ratio >= 1e9) return static_cast<std::int64_t>(ratio);

  // The raw ceiling can land one off when (1-p)^k sits on the alpha
  // boundary; settle against the same predicate the definition states.
  std::int64_t k = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ratio)) - 2);
  while (std::pow(q, static_cast<double>(k)) > alpha) ++k;
  while (k > 1 && std::pow(q, static_cast<double>(k - 1)) <= alpha) --k;
  return k;
}

std::int64_t cqr_score(std::int64_t k, std::int64_t q_hat) {
  if (k < 1) throw std::invalid_argument("cqr_score: k must be >= 1");
  if (q_hat < 1) throw std::invalid_argument("cqr_score: q_hat must be >= 1");
  return std::max<std::int64_t>(0, k - q_hat);
}

std::optional<std::int64_t> conformal_quantile(std::span<const std::int64_t> scores,
                                               double alpha) {
  if (scores.empty()) {
    throw std::invalid_argument("conformal_quantile: empty score set");
  }
  const auto n = static_cast<std::int64_t>(scores.size());
  const std::int64_t r = conformal_rank(alpha, n);
  if (r > n) return std::nullopt;

  std::vector<std::int64_t> sorted(scores.begin(), scores.end());
  auto nth = sorted.begin() + (r - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

CalibratedRule calibrate(const std::vector<AugmentedExample>& examples,
                         SuccessPredictor predictor, double alpha,
                         std::int64_t budget) {
  if (examples.empty()) {
    throw std::invalid_argument("calibrate: empty calibration set");
  }
  if (budget < 1) throw std::invalid_argument("calibrate: budget must be >= 1");
  require_unit_interval(alpha, "alpha");

  CalibratedRule rule;
  rule.alpha = alpha;
  rule.budget = budget;
  rule.n_cal = static_cast<std::int64_t>(examples.size());
  rule.scores.reserve(examples.size());

  for (const auto& ex : examples) {
    if (ex.k < 1 || ex.k > budget + 1) {
      throw std::invalid_argument(
          "calibrate: example k=" + std::to_string(ex.k) +
          " outside [1, budget+1]; was it built under budget " +
          std::to_string(budget) + "?");
    }
    const std::int64_t q_hat = geometric_quantile(predictor(ex.features), alpha);
    rule.scores.push_back(cqr_score(ex.k, q_hat));
  }

  rule.adjustment = conformal_quantile(rule.scores, alpha);
  rule.predictor = std::move(predictor);
  return rule;
}

StoppingDecision stopping_rule(const CalibratedRule& rule,
                               std::span<const double> features) {
  if (!rule.adjustment.has_value()) return StoppingDecision::abstain();
  const std::int64_t q_hat = geometric_quantile(rule.predictor(features), rule.alpha);
  const std::int64_t raw = q_hat + *rule.adjustment;
  if (raw > rule.budget) return StoppingDecision::abstain();
  return StoppingDecision::finite(raw);
}

}  // namespace gps

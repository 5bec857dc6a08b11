#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gps/traces.hpp"

namespace gps {

inline constexpr double kDefaultClampEps = 1e-3;

enum class EstimatorKind { kConstant, kLinear, kMlp };

const char* to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

// Parametric success-probability model. Parameters are stored flat:
//   constant: {p}
//   linear:   {w_1..w_d, b}                        (layer_sizes = {d})
//   mlp:      {W_1 row-major, b_1, W_2, b_2, ...}  (layer_sizes = {d, h..., 1})
// Predictions are clamped into [clamp_eps, 1 - clamp_eps]; the geometric
// quantile is undefined at 0 and 1 and diverges as p -> 0.
struct ProbEstimator {
  EstimatorKind kind = EstimatorKind::kConstant;
  std::vector<std::int64_t> layer_sizes;
  std::vector<double> params;
  double clamp_eps = kDefaultClampEps;

  // Input dimension this model expects; -1 means any (constant model).
  std::int64_t feature_dim() const;

  double operator()(std::span<const double> features) const;
};

// Clamped model output; throws on a feature-dimension mismatch.
double predict_success_prob(const ProbEstimator& estimator,
                            std::span<const double> features);

// Regression target: Laplace-smoothed success rate over the first m_train
// recorded draws, p = (successes + 1) / (m_train + 2).
struct TrainingTarget {
  std::vector<double> features;
  double p = 0.0;
};

// Builds one target per trace from its first m_train admissibility bits.
// Bits beyond m_train are ignored. A trace with fewer than m_train bits and
// no success is rejected: its success count over m_train draws is unknown.
std::vector<TrainingTarget> build_training_targets(
    const std::vector<SampleTrace>& traces, std::int64_t m_train);

// Predicts the mean target probability regardless of input.
ProbEstimator fit_constant(const std::vector<TrainingTarget>& targets,
                           double clamp_eps = kDefaultClampEps);

// Ridge least squares of p on the features, closed form via the normal
// equations; l2 penalizes the weights but not the bias. With l2 = 0 a
// singular system is an error advising a positive l2.
ProbEstimator fit_linear(const std::vector<TrainingTarget>& targets, double l2,
                         double clamp_eps = kDefaultClampEps);

struct MlpConfig {
  std::vector<std::int64_t> hidden = {64, 64};
  std::int64_t epochs = 200;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  double clamp_eps = kDefaultClampEps;
};

// Feed-forward net (tanh hidden layers, sigmoid output) trained on mean
// squared error by full-batch gradient descent. Deterministic given the seed:
// weights start uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the seeded
// generator. A non-finite loss aborts with the epoch and learning rate.
ProbEstimator fit_mlp(const std::vector<TrainingTarget>& targets,
                      const MlpConfig& config);

// MSE loss and its gradient w.r.t. params for the given architecture; used by
// training and exposed so tests can check gradients by finite differences.
double mlp_loss_and_gradient(std::span<const double> params,
                             std::span<const std::int64_t> layer_sizes,
                             const std::vector<TrainingTarget>& targets,
                             std::span<double> gradient);

// Self-describing JSON document; floats in shortest round-trip form, so
// serialize/parse reproduces the parameters bit-exactly.
std::string to_text(const ProbEstimator& estimator);
ProbEstimator estimator_from_text(const std::string& text);

}  // namespace gps

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gps/estimators.hpp"
#include "gps/metrics.hpp"
#include "gps/traces.hpp"

namespace gps {

// Synthetic worlds. Each assigns every input a known success probability;
// draws are i.i.d. Bernoulli, so the first-success count is geometric.
struct LogisticWorld {
  std::vector<double> weights;
  double bias = 0.0;
};
struct BimodalWorld {
  double p_easy = 0.8;
  double p_hard = 0.02;
  double frac_hard = 0.3;
};
struct ConstantWorld {
  double p = 0.5;
};
using World = std::variant<LogisticWorld, BimodalWorld, ConstantWorld>;

enum class SimEstimator { kConstant, kLinear, kMlp, kOracle };

const char* to_string(SimEstimator kind);
SimEstimator sim_estimator_from_string(const std::string& name);

struct SimConfig {
  std::int64_t feature_dim = 1;
  World world = ConstantWorld{};
  std::int64_t budget = 25;
  std::int64_t n_train = 1000;
  std::int64_t n_cal = 500;
  std::int64_t n_test = 5000;
  std::int64_t trials = 100;
  std::vector<double> alphas = {0.1, 0.2, 0.3};
  std::vector<SimEstimator> estimators = {SimEstimator::kOracle};
  std::uint64_t seed = 0;

  void validate() const;
};

// Key/value config file, `key = value` per line, `#` comments. Keys:
// feature_dim, world (logistic|bimodal|constant), weights (comma list), bias,
// p, p_easy, p_hard, frac_hard, budget, n_train, n_cal, n_test, trials,
// alphas (comma list), estimators (comma list), seed.
SimConfig load_sim_config(std::istream& in);
SimConfig load_sim_config_file(const std::string& path);

// True success probability the world assigns to a feature vector.
double true_success_prob(const World& world, std::span<const double> features);

struct WorldData {
  std::vector<SampleTrace> train;
  std::vector<SampleTrace> cal;
  std::vector<SampleTrace> test;
};

// Draws fresh train/cal/test traces for one trial. Streams are derived from
// (seed, trial_index, role), so trials and roles never share draws and any
// subset can be regenerated independently.
WorldData gen_world(const SimConfig& config, std::int64_t trial_index);

// Full pipeline on one freshly generated world: fit (or take the oracle),
// calibrate at alpha, evaluate on the test traces.
MetricsReport run_trial(const SimConfig& config, double alpha,
                        SimEstimator estimator, std::int64_t trial_index);

// All (alpha, estimator) cells over config.trials trials, aggregated; rows
// sorted by (alpha, estimator name).
std::vector<AggregateRow> sweep(const SimConfig& config);

void write_sweep_csv(std::ostream& out, std::span<const AggregateRow> rows);

}  // namespace gps

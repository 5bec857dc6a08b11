#include "gps/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gps/rng.hpp"

namespace gps {

namespace {

enum Role : std::uint64_t { kRoleTrain = 1, kRoleCal = 2, kRoleTest = 3 };

void check_prob_open(double p, const char* name) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
  }
}

std::vector<SampleTrace> gen_traces(const SimConfig& config, Rng& rng,
                                    const std::string& id_prefix, std::int64_t count) {
  std::vector<SampleTrace> traces;
  traces.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    SampleTrace trace;
    trace.id = id_prefix + std::to_string(i);

    if (std::holds_alternative<BimodalWorld>(config.world)) {
      const auto& w = std::get<BimodalWorld>(config.world);
      const bool hard = rng.next_bernoulli(w.frac_hard);
      trace.features.assign(1, hard ? 1.0 : 0.0);
    } else {
      trace.features.resize(static_cast<std::size_t>(config.feature_dim));
      for (auto& x : trace.features) x = rng.next_normal();
    }

    const double p = true_success_prob(config.world, trace.features);
    for (std::int64_t j = 0; j < config.budget; ++j) {
      const bool hit = rng.next_bernoulli(p);
      trace.admissible.push_back(hit ? 1 : 0);
      if (hit) break;  // record truncates at the first success
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

// Oracle predictor: the world's own success probability, clamped into the
// open interval the geometric quantile needs.
SuccessPredictor oracle_predictor(const World& world) {
  return [world](std::span<const double> x) {
    return std::clamp(true_success_prob(world, x), kDefaultClampEps,
                      1.0 - kDefaultClampEps);
  };
}

std::vector<double> parse_double_list(const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

const char* to_string(SimEstimator kind) {
  switch (kind) {
    case SimEstimator::kConstant: return "constant";
    case SimEstimator::kLinear: return "linear";
    case SimEstimator::kMlp: return "mlp";
    case SimEstimator::kOracle: return "oracle";
  }
  throw std::logic_error("unknown simulator estimator kind");
}

SimEstimator sim_estimator_from_string(const std::string& name) {
  if (name == "constant") return SimEstimator::kConstant;
  if (name == "linear") return SimEstimator::kLinear;
  if (name == "mlp") return SimEstimator::kMlp;
  if (name == "oracle") return SimEstimator::kOracle;
  throw std::invalid_argument("unknown estimator `" + name +
                              "` (expected constant, linear, mlp or oracle)");
}

void SimConfig::validate() const {
  if (feature_dim < 0) throw std::invalid_argument("feature_dim must be >= 0");
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (n_train < 1 || n_cal < 1 || n_test < 1) {
    throw std::invalid_argument("split sizes must be >= 1");
  }
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (alphas.empty()) throw std::invalid_argument("alphas must be nonempty");
  for (double a : alphas) check_prob_open(a, "alpha");
  if (estimators.empty()) throw std::invalid_argument("estimators must be nonempty");

  if (const auto* w = std::get_if<LogisticWorld>(&world)) {
    if (static_cast<std::int64_t>(w->weights.size()) != feature_dim) {
      throw std::invalid_argument("logistic weights must match feature_dim");
    }
  } else if (const auto* w = std::get_if<BimodalWorld>(&world)) {
    check_prob_open(w->p_easy, "p_easy");
    check_prob_open(w->p_hard, "p_hard");
    if (w->frac_hard < 0.0 || w->frac_hard > 1.0) {
      throw std::invalid_argument("frac_hard must lie in [0, 1]");
    }
  } else {
    const auto& cw = std::get<ConstantWorld>(world);
    // p = 1 is allowed for generation (every first draw succeeds); the
    // oracle predictor clamps before taking quantiles.
    if (!(cw.p > 0.0) || cw.p > 1.0) {
      throw std::invalid_argument("constant world p must lie in (0, 1]");
    }
  }
}

double true_success_prob(const World& world, std::span<const double> features) {
  if (const auto* w = std::get_if<LogisticWorld>(&world)) {
    if (features.size() != w->weights.size()) {
      throw std::invalid_argument("true_success_prob: feature dimension mismatch");
    }
    double z = w->bias;
    for (std::size_t i = 0; i < features.size(); ++i) z += w->weights[i] * features[i];
    return 1.0 / (1.0 + std::exp(-z));
  }
  if (const auto* w = std::get_if<BimodalWorld>(&world)) {
    if (features.empty()) {
      throw std::invalid_argument("true_success_prob: bimodal world needs the hardness feature");
    }
    return features[0] > 0.5 ? w->p_hard : w->p_easy;
  }
  return std::get<ConstantWorld>(world).p;
}

WorldData gen_world(const SimConfig& config, std::int64_t trial_index) {
  config.validate();
  const auto trial = static_cast<std::uint64_t>(trial_index);
  WorldData data;
  {
    Rng rng(derive_stream(config.seed, trial, kRoleTrain));
    data.train = gen_traces(config, rng, "t" + std::to_string(trial_index) + "-train-",
                            config.n_train);
  }
  {
    Rng rng(derive_stream(config.seed, trial, kRoleCal));
    data.cal = gen_traces(config, rng, "t" + std::to_string(trial_index) + "-cal-",
                          config.n_cal);
  }
  {
    Rng rng(derive_stream(config.seed, trial, kRoleTest));
    data.test = gen_traces(config, rng, "t" + std::to_string(trial_index) + "-test-",
                           config.n_test);
  }
  return data;
}

MetricsReport run_trial(const SimConfig& config, double alpha,
                        SimEstimator estimator, std::int64_t trial_index) {
  const WorldData data = gen_world(config, trial_index);

  SuccessPredictor predictor;
  if (estimator == SimEstimator::kOracle) {
    predictor = oracle_predictor(config.world);
  } else {
    const auto targets = build_training_targets(data.train, config.budget);
    ProbEstimator fitted;
    switch (estimator) {
      case SimEstimator::kConstant:
        fitted = fit_constant(targets);
        break;
      case SimEstimator::kLinear:
        fitted = fit_linear(targets, 1e-6);
        break;
      case SimEstimator::kMlp: {
        MlpConfig mlp;
        mlp.seed = derive_stream(config.seed, static_cast<std::uint64_t>(trial_index),
                                 0x6d6c70);  // its own substream
        fitted = fit_mlp(targets, mlp);
        break;
      }
      case SimEstimator::kOracle:
        break;  // handled above
    }
    predictor = fitted;
  }

  std::vector<AugmentedExample> examples;
  examples.reserve(data.cal.size());
  for (const auto& trace : data.cal) examples.push_back(augment(trace, config.budget));

  const CalibratedRule rule = calibrate(examples, std::move(predictor), alpha,
                                        config.budget);
  return evaluate(rule, data.test);
}

std::vector<AggregateRow> sweep(const SimConfig& config) {
  config.validate();

  std::vector<double> alphas = config.alphas;
  std::sort(alphas.begin(), alphas.end());
  std::vector<SimEstimator> kinds = config.estimators;
  std::sort(kinds.begin(), kinds.end(), [](SimEstimator a, SimEstimator b) {
    return std::string(to_string(a)) < to_string(b);
  });

  std::vector<AggregateRow> rows;
  for (double alpha : alphas) {
    for (SimEstimator kind : kinds) {
      std::vector<MetricsReport> reports;
      reports.reserve(static_cast<std::size_t>(config.trials));
      for (std::int64_t trial = 0; trial < config.trials; ++trial) {
        reports.push_back(run_trial(config, alpha, kind, trial));
      }
      rows.push_back(aggregate_reports(alpha, to_string(kind), reports));
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const AggregateRow> rows) {
  out << sweep_csv_header() << '\n';
  for (const auto& row : rows) out << to_csv_row(row) << '\n';
}

SimConfig load_sim_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    kv[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
  }

  SimConfig config;
  auto take = [&kv](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return {};
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("feature_dim"); !v.empty()) config.feature_dim = std::stoll(v);
  if (auto v = take("budget"); !v.empty()) config.budget = std::stoll(v);
  if (auto v = take("n_train"); !v.empty()) config.n_train = std::stoll(v);
  if (auto v = take("n_cal"); !v.empty()) config.n_cal = std::stoll(v);
  if (auto v = take("n_test"); !v.empty()) config.n_test = std::stoll(v);
  if (auto v = take("trials"); !v.empty()) config.trials = std::stoll(v);
  if (auto v = take("seed"); !v.empty()) config.seed = std::stoull(v);
  if (auto v = take("alphas"); !v.empty()) config.alphas = parse_double_list(v);
  if (auto v = take("estimators"); !v.empty()) {
    config.estimators.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string name = trim(item);
      if (!name.empty()) config.estimators.push_back(sim_estimator_from_string(name));
    }
  }

  const std::string world = take("world");
  if (world == "logistic" || world.empty()) {
    LogisticWorld w;
    if (auto v = take("weights"); !v.empty()) {
      w.weights = parse_double_list(v);
    } else {
      w.weights.assign(static_cast<std::size_t>(config.feature_dim), 1.0);
    }
    if (auto v = take("bias"); !v.empty()) w.bias = std::stod(v);
    config.feature_dim = static_cast<std::int64_t>(w.weights.size());
    config.world = std::move(w);
  } else if (world == "bimodal") {
    BimodalWorld w;
    if (auto v = take("p_easy"); !v.empty()) w.p_easy = std::stod(v);
    if (auto v = take("p_hard"); !v.empty()) w.p_hard = std::stod(v);
    if (auto v = take("frac_hard"); !v.empty()) w.frac_hard = std::stod(v);
    config.feature_dim = 1;
    config.world = w;
  } else if (world == "constant") {
    ConstantWorld w;
    if (auto v = take("p"); !v.empty()) w.p = std::stod(v);
    config.world = w;
  } else {
    throw std::runtime_error("unknown world `" + world +
                             "` (expected logistic, bimodal or constant)");
  }

  if (!kv.empty()) {
    throw std::runtime_error("unknown config key `" + kv.begin()->first + "`");
  }
  config.validate();
  return config;
}

SimConfig load_sim_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return load_sim_config(in);
}

}  // namespace gps

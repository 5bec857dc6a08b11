// Command-line front end: trains admissibility estimators, calibrates
// stopping rules, predicts, evaluates, adjusts alpha for PAC-style targets,
// and runs synthetic sweeps. Exit codes: 0 success, 1 infeasible or
// statistical failure, 2 usage or I/O error.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gps/artifact.hpp"
#include "gps/beta_adjust.hpp"
#include "gps/conformal.hpp"
#include "gps/estimators.hpp"
#include "gps/metrics.hpp"
#include "gps/simulator.hpp"
#include "gps/traces.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitUsage = 2;

int fail(int code, const std::string& message) {
  std::cerr << "error: " << message << '\n';
  return code;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const double v = std::stod(item, &pos);
    while (pos < item.size() && (item[pos] == ' ' || item[pos] == '\t')) ++pos;
    if (pos != item.size()) throw std::invalid_argument("malformed number `" + item + "`");
    out.push_back(v);
  }
  return out;
}

std::vector<std::int64_t> parse_csv_ints(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

double mean_squared_error(const gps::ProbEstimator& estimator,
                          const std::vector<gps::TrainingTarget>& targets) {
  double loss = 0.0;
  for (const auto& t : targets) {
    const double err = estimator(t.features) - t.p;
    loss += err * err;
  }
  return loss / static_cast<double>(targets.size());
}

struct TrainArgs {
  std::string traces_path;
  std::string kind = "constant";
  std::int64_t m_train = 25;
  std::uint64_t seed = 0;
  std::string out_path;
  double l2 = 1e-6;
  std::string hidden = "64,64";
  std::int64_t epochs = 200;
  double learning_rate = 1e-2;
  double clamp_eps = gps::kDefaultClampEps;
};

int run_train(const TrainArgs& args) {
  std::vector<gps::SampleTrace> traces;
  try {
    traces = gps::parse_traces_file(args.traces_path);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }

  std::vector<gps::TrainingTarget> targets;
  try {
    targets = gps::build_training_targets(traces, args.m_train);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }

  gps::ProbEstimator estimator;
  try {
    const auto kind = gps::estimator_kind_from_string(args.kind);
    switch (kind) {
      case gps::EstimatorKind::kConstant:
        estimator = gps::fit_constant(targets, args.clamp_eps);
        break;
      case gps::EstimatorKind::kLinear:
        estimator = gps::fit_linear(targets, args.l2, args.clamp_eps);
        break;
      case gps::EstimatorKind::kMlp: {
        gps::MlpConfig config;
        config.hidden = parse_csv_ints(args.hidden);
        config.epochs = args.epochs;
        config.learning_rate = args.learning_rate;
        config.seed = args.seed;
        config.clamp_eps = args.clamp_eps;
        estimator = gps::fit_mlp(targets, config);
        break;
      }
    }
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, e.what());
  } catch (const std::exception& e) {
    return fail(kExitInfeasible, e.what());
  }

  try {
    gps::save_estimator(args.out_path, estimator);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
  std::cout << "kind       " << gps::to_string(estimator.kind) << '\n'
            << "n_train    " << targets.size() << '\n'
            << "final_loss " << gps::format_double(mean_squared_error(estimator, targets))
            << '\n'
            << "wrote      " << args.out_path << '\n';
  return kExitOk;
}

struct CalibrateArgs {
  std::string traces_path;
  std::string estimator_path;
  double alpha = 0.1;
  std::int64_t budget = 25;
  std::optional<double> pac_delta;
  std::string out_path;
};

int run_calibrate(const CalibrateArgs& args) {
  gps::ProbEstimator estimator;
  std::vector<gps::SampleTrace> traces;
  try {
    estimator = gps::load_estimator(args.estimator_path);
    traces = gps::parse_traces_file(args.traces_path, args.budget);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }

  double effective_alpha = args.alpha;
  std::optional<double> alpha_target;
  if (args.pac_delta.has_value()) {
    try {
      const auto adj = gps::adjust_alpha(args.alpha, *args.pac_delta,
                                         static_cast<std::int64_t>(traces.size()));
      effective_alpha = adj.alpha0;
      alpha_target = args.alpha;
      std::cout << "pac_adjustment: alpha " << gps::format_double(args.alpha)
                << " -> alpha0 " << gps::format_double(adj.alpha0)
                << " (delta_achieved " << gps::format_double(adj.delta_achieved)
                << ")\n";
    } catch (const std::exception& e) {
      return fail(kExitInfeasible, e.what());
    }
  }

  gps::CalibratedRule rule;
  try {
    std::vector<gps::AugmentedExample> examples;
    examples.reserve(traces.size());
    for (const auto& trace : traces) examples.push_back(gps::augment(trace, args.budget));
    rule = gps::calibrate(examples, estimator, effective_alpha, args.budget);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }

  // Fraction of calibration inputs whose own stopping value already exceeds
  // the budget: a forecast of the abstention rate on exchangeable data.
  std::int64_t would_abstain = 0;
  for (const auto& trace : traces) {
    if (gps::stopping_rule(rule, trace.features).abstained()) ++would_abstain;
  }
  const double forecast =
      static_cast<double>(would_abstain) / static_cast<double>(traces.size());

  auto artifact = gps::RuleArtifact::from_rule(rule, std::move(estimator));
  artifact.alpha_target = alpha_target;
  artifact.pac_delta = args.pac_delta;
  try {
    gps::save_rule_artifact(args.out_path, artifact);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }

  std::cout << "n_cal               " << rule.n_cal << '\n'
            << "effective_alpha     " << gps::format_double(effective_alpha) << '\n'
            << "adjustment          "
            << (rule.adjustment.has_value() ? std::to_string(*rule.adjustment)
                                            : std::string("inf"))
            << '\n'
            << "abstention_forecast " << gps::format_double(forecast) << '\n'
            << "wrote               " << args.out_path << '\n';
  if (!rule.adjustment.has_value()) {
    std::cout << "warning: adjustment is infinite (alpha < 1/(n+1)); "
                 "the rule always abstains\n";
  }
  return kExitOk;
}

int run_predict(const std::string& rule_path, const std::string& features_csv) {
  gps::RuleArtifact artifact;
  try {
    artifact = gps::load_rule_artifact(rule_path);
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }

  try {
    const std::vector<double> features =
        features_csv.empty() ? std::vector<double>{} : parse_csv_doubles(features_csv);
    const gps::CalibratedRule rule = artifact.to_rule();
    const gps::StoppingDecision decision = gps::stopping_rule(rule, features);
    if (decision.abstained()) {
      std::cout << "ABSTAIN\n";
    } else {
      std::cout << "K_HAT=" << *decision.k_hat << '\n';
    }
    return kExitOk;
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
}

int run_evaluate(const std::string& rule_path, const std::string& traces_path,
                 const std::string& out_path) {
  try {
    const gps::RuleArtifact artifact = gps::load_rule_artifact(rule_path);
    const auto traces = gps::parse_traces_file(traces_path, artifact.budget);
    const gps::MetricsReport report = gps::evaluate(artifact.to_rule(), traces);
    gps::print_report(std::cout, report);

    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) return fail(kExitUsage, "cannot write csv: " + out_path);
      out << gps::sweep_csv_header() << '\n'
          << gps::to_csv_row(gps::to_aggregate_row(
                 report, gps::to_string(artifact.estimator.kind)))
          << '\n';
    }
    return kExitOk;
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
}

int run_adjust_alpha(double alpha, double delta, std::int64_t n, double grid_step) {
  try {
    const gps::AlphaAdjustment adj = gps::adjust_alpha(alpha, delta, n, grid_step);
    std::cout << "alpha0         " << gps::format_double(adj.alpha0) << '\n'
              << "k              " << adj.k << '\n'
              << "delta_achieved " << gps::format_double(adj.delta_achieved) << '\n';
    std::cout << "{\"alpha\":" << gps::format_double(alpha)
              << ",\"delta\":" << gps::format_double(delta) << ",\"n\":" << n
              << ",\"alpha0\":" << gps::format_double(adj.alpha0) << ",\"k\":" << adj.k
              << ",\"delta_achieved\":" << gps::format_double(adj.delta_achieved)
              << "}\n";
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, e.what());
  } catch (const std::exception& e) {
    return fail(kExitInfeasible, e.what());
  }
}

int run_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_path) {
  try {
    gps::SimConfig config = gps::load_sim_config_file(config_path);
    if (seed.has_value()) config.seed = *seed;
    const auto rows = gps::sweep(config);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) return fail(kExitUsage, "cannot write csv: " + out_path);
    gps::write_sweep_csv(out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-set calibration for black-box samplers"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train-estimator",
                                   "Fit an admissibility estimator from traces");
  train->add_option("--traces", train_args.traces_path, "trace file (JSON lines)")
      ->required();
  train->add_option("--kind", train_args.kind, "constant|linear|mlp");
  train->add_option("--m-train", train_args.m_train, "draws per trace used for targets")
      ->required();
  train->add_option("--seed", train_args.seed, "mlp init seed");
  train->add_option("--out", train_args.out_path, "estimator artifact path")->required();
  train->add_option("--l2", train_args.l2, "ridge penalty (linear)");
  train->add_option("--hidden", train_args.hidden, "hidden widths, e.g. 64,64 (mlp)");
  train->add_option("--epochs", train_args.epochs, "training epochs (mlp)");
  train->add_option("--learning-rate", train_args.learning_rate, "step size (mlp)");
  train->add_option("--clamp-eps", train_args.clamp_eps, "prediction clamp epsilon");

  CalibrateArgs cal_args;
  double pac_delta_flag = -1.0;
  auto* cal = app.add_subcommand("calibrate", "Calibrate a stopping rule");
  cal->add_option("--traces", cal_args.traces_path, "calibration trace file")->required();
  cal->add_option("--estimator", cal_args.estimator_path, "estimator artifact")
      ->required();
  cal->add_option("--alpha", cal_args.alpha, "significance level in (0,1)")->required();
  cal->add_option("--budget", cal_args.budget, "sampling budget M")->required();
  auto* pac_opt = cal->add_option("--pac-delta", pac_delta_flag,
                                  "calibrate at the adjusted alpha0 meeting this delta");
  cal->add_option("--out", cal_args.out_path, "rule artifact path")->required();

  std::string predict_rule, predict_features;
  auto* predict = app.add_subcommand("predict", "Apply a rule to one feature vector");
  predict->add_option("--rule", predict_rule, "rule artifact")->required();
  predict->add_option("--features", predict_features, "comma-separated feature values");

  std::string eval_rule, eval_traces, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a rule on held-out traces");
  evaluate->add_option("--rule", eval_rule, "rule artifact")->required();
  evaluate->add_option("--traces", eval_traces, "test trace file")->required();
  evaluate->add_option("--out", eval_out, "write a one-row metrics csv here");

  double adj_alpha = 0.1, adj_delta = 0.05, adj_grid = 1e-4;
  std::int64_t adj_n = 0;
  auto* adjust = app.add_subcommand("adjust-alpha",
                                    "Marginal level matching a PAC-style (alpha, delta)");
  adjust->add_option("--alpha", adj_alpha, "target significance level")->required();
  adjust->add_option("--delta", adj_delta, "allowed miscoverage probability")->required();
  adjust->add_option("--n", adj_n, "calibration set size")->required();
  adjust->add_option("--grid-step", adj_grid, "alpha0 grid step");

  std::string sweep_config, sweep_out;
  std::uint64_t sweep_seed = 0;
  auto* sweep = app.add_subcommand("sweep", "Synthetic-world metric sweep");
  sweep->alias("simulate");
  sweep->add_option("--config", sweep_config, "simulation config file")->required();
  auto* seed_opt = sweep->add_option("--seed", sweep_seed, "override the config seed");
  sweep->add_option("--out", sweep_out, "output csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (train->parsed()) return run_train(train_args);
  if (cal->parsed()) {
    if (pac_opt->count() > 0) cal_args.pac_delta = pac_delta_flag;
    return run_calibrate(cal_args);
  }
  if (predict->parsed()) return run_predict(predict_rule, predict_features);
  if (evaluate->parsed()) return run_evaluate(eval_rule, eval_traces, eval_out);
  if (adjust->parsed()) return run_adjust_alpha(adj_alpha, adj_delta, adj_n, adj_grid);
  if (sweep->parsed()) {
    std::optional<std::uint64_t> seed;
    if (seed_opt->count() > 0) seed = sweep_seed;
    return run_sweep(sweep_config, seed, sweep_out);
  }
  return kExitUsage;
}

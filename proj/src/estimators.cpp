#include "gps/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "gps/rng.hpp"

namespace gps {

namespace {

double clamp_prob(double p, double eps) {
  return std::clamp(p, eps, 1.0 - eps);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_clamp_eps(double eps) {
  if (!(eps > 0.0) || !(eps < 0.5)) {
    throw std::invalid_argument("clamp_eps must lie in (0, 0.5)");
  }
}

std::size_t mlp_param_count(std::span<const std::int64_t> layer_sizes) {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    count += static_cast<std::size_t>(layer_sizes[l] * layer_sizes[l + 1] +
                                      layer_sizes[l + 1]);
  }
  return count;
}

// Solves A x = rhs in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot collapses (singular system).
bool solve_dense(std::vector<double>& a, std::vector<double>& rhs, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::fabs(a[row * n + col]) > std::fabs(a[pivot * n + col])) pivot = row;
    }
    if (std::fabs(a[pivot * n + col]) < 1e-12) return false;
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
      std::swap(rhs[col], rhs[pivot]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = a[row * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a[row * n + j] -= factor * a[col * n + j];
      rhs[row] -= factor * rhs[col];
    }
  }
  for (std::size_t row = n; row-- > 0;) {
    double acc = rhs[row];
    for (std::size_t j = row + 1; j < n; ++j) acc -= a[row * n + j] * rhs[j];
    rhs[row] = acc / a[row * n + row];
  }
  return true;
}

std::int64_t common_feature_dim(const std::vector<TrainingTarget>& targets) {
  const auto d = static_cast<std::int64_t>(targets.front().features.size());
  for (const auto& t : targets) {
    if (static_cast<std::int64_t>(t.features.size()) != d) {
      throw std::invalid_argument("targets disagree on feature dimension");
    }
  }
  return d;
}

}  // namespace

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kConstant: return "constant";
    case EstimatorKind::kLinear: return "linear";
    case EstimatorKind::kMlp: return "mlp";
  }
  throw std::logic_error("unknown estimator kind");
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "constant") return EstimatorKind::kConstant;
  if (name == "linear") return EstimatorKind::kLinear;
  if (name == "mlp") return EstimatorKind::kMlp;
  throw std::invalid_argument("unknown estimator kind `" + name +
                              "` (expected constant, linear or mlp)");
}

std::int64_t ProbEstimator::feature_dim() const {
  switch (kind) {
    case EstimatorKind::kConstant:
      return -1;
    case EstimatorKind::kLinear:
    case EstimatorKind::kMlp:
      return layer_sizes.empty() ? 0 : layer_sizes.front();
  }
  throw std::logic_error("unknown estimator kind");
}

double ProbEstimator::operator()(std::span<const double> features) const {
  const std::int64_t expected = feature_dim();
  if (expected >= 0 && static_cast<std::int64_t>(features.size()) != expected) {
    throw std::invalid_argument(
        "feature dimension mismatch: estimator expects " + std::to_string(expected) +
        ", got " + std::to_string(features.size()));
  }

  switch (kind) {
    case EstimatorKind::kConstant:
      return clamp_prob(params[0], clamp_eps);

    case EstimatorKind::kLinear: {
      const auto d = static_cast<std::size_t>(expected);
      double z = params[d];  // bias
      for (std::size_t i = 0; i < d; ++i) z += params[i] * features[i];
      return clamp_prob(z, clamp_eps);
    }

    case EstimatorKind::kMlp: {
      std::vector<double> activation(features.begin(), features.end());
      std::size_t offset = 0;
      const std::size_t n_layers = layer_sizes.size();
      for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        const auto n_in = static_cast<std::size_t>(layer_sizes[l]);
        const auto n_out = static_cast<std::size_t>(layer_sizes[l + 1]);
        std::vector<double> next(n_out);
        for (std::size_t j = 0; j < n_out; ++j) {
          double z = params[offset + n_in * n_out + j];  // bias
          for (std::size_t i = 0; i < n_in; ++i) {
            z += params[offset + j * n_in + i] * activation[i];
          }
          next[j] = (l + 2 == n_layers) ? sigmoid(z) : std::tanh(z);
        }
        offset += n_in * n_out + n_out;
        activation = std::move(next);
      }
      return clamp_prob(activation[0], clamp_eps);
    }
  }
  throw std::logic_error("unknown estimator kind");
}

double predict_success_prob(const ProbEstimator& estimator,
                            std::span<const double> features) {
  return estimator(features);
}

std::vector<TrainingTarget> build_training_targets(
    const std::vector<SampleTrace>& traces, std::int64_t m_train) {
  if (m_train < 1) throw std::invalid_argument("m_train must be >= 1");

  std::vector<TrainingTarget> targets;
  targets.reserve(traces.size());
  for (const auto& trace : traces) {
    const auto len = static_cast<std::int64_t>(trace.admissible.size());
    const std::int64_t used = std::min(len, m_train);
    std::int64_t successes = 0;
    for (std::int64_t i = 0; i < used; ++i) {
      successes += trace.admissible[static_cast<std::size_t>(i)];
    }
    if (len < m_train && successes == 0) {
      throw std::runtime_error("trace `" + trace.id + "` is censored: " +
                               std::to_string(len) + " draws recorded, no success, " +
                               std::to_string(m_train) + " required");
    }
    TrainingTarget t;
    t.features = trace.features;
    t.p = static_cast<double>(successes + 1) / static_cast<double>(m_train + 2);
    targets.push_back(std::move(t));
  }
  return targets;
}

ProbEstimator fit_constant(const std::vector<TrainingTarget>& targets,
                           double clamp_eps) {
  check_clamp_eps(clamp_eps);
  if (targets.empty()) throw std::invalid_argument("fit_constant: no targets");
  double sum = 0.0;
  for (const auto& t : targets) sum += t.p;
  ProbEstimator est;
  est.kind = EstimatorKind::kConstant;
  est.params = {sum / static_cast<double>(targets.size())};
  est.clamp_eps = clamp_eps;
  return est;
}

ProbEstimator fit_linear(const std::vector<TrainingTarget>& targets, double l2,
                         double clamp_eps) {
  check_clamp_eps(clamp_eps);
  if (targets.empty()) throw std::invalid_argument("fit_linear: no targets");
  if (l2 < 0.0) throw std::invalid_argument("fit_linear: l2 must be nonnegative");
  const std::int64_t d = common_feature_dim(targets);
  if (d < 1) throw std::invalid_argument("fit_linear: feature dimension must be >= 1");

  // Normal equations over [w; b], with the augmented feature (x, 1).
  const auto m = static_cast<std::size_t>(d) + 1;
  std::vector<double> gram(m * m, 0.0);
  std::vector<double> rhs(m, 0.0);
  std::vector<double> aug(m);
  for (const auto& t : targets) {
    std::copy(t.features.begin(), t.features.end(), aug.begin());
    aug[m - 1] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      rhs[i] += aug[i] * t.p;
      for (std::size_t j = 0; j < m; ++j) gram[i * m + j] += aug[i] * aug[j];
    }
  }
  for (std::size_t i = 0; i + 1 < m; ++i) gram[i * m + i] += l2;  // weights only

  if (!solve_dense(gram, rhs, m)) {
    throw std::runtime_error(
        "fit_linear: normal equations are singular; pass l2 > 0 to regularize");
  }

  ProbEstimator est;
  est.kind = EstimatorKind::kLinear;
  est.layer_sizes = {d};
  est.params = std::move(rhs);
  est.clamp_eps = clamp_eps;
  return est;
}

double mlp_loss_and_gradient(std::span<const double> params,
                             std::span<const std::int64_t> layer_sizes,
                             const std::vector<TrainingTarget>& targets,
                             std::span<double> gradient) {
  if (params.size() != mlp_param_count(layer_sizes) ||
      gradient.size() != params.size()) {
    throw std::invalid_argument("mlp_loss_and_gradient: parameter size mismatch");
  }
  std::fill(gradient.begin(), gradient.end(), 0.0);

  const std::size_t n_layers = layer_sizes.size();
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  double loss = 0.0;

  // Per-sample forward pass keeping activations, then backprop.
  std::vector<std::vector<double>> acts(n_layers);
  for (const auto& t : targets) {
    acts[0].assign(t.features.begin(), t.features.end());
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
      const auto n_in = static_cast<std::size_t>(layer_sizes[l]);
      const auto n_out = static_cast<std::size_t>(layer_sizes[l + 1]);
      acts[l + 1].assign(n_out, 0.0);
      for (std::size_t j = 0; j < n_out; ++j) {
        double z = params[offset + n_in * n_out + j];
        for (std::size_t i = 0; i < n_in; ++i) {
          z += params[offset + j * n_in + i] * acts[l][i];
        }
        acts[l + 1][j] = (l + 2 == n_layers) ? sigmoid(z) : std::tanh(z);
      }
      offset += n_in * n_out + n_out;
    }

    const double out = acts[n_layers - 1][0];
    const double err = out - t.p;
    loss += err * err * inv_n;

    // delta holds dLoss/dz for the current layer.
    std::vector<double> delta{2.0 * err * inv_n * out * (1.0 - out)};
    for (std::size_t l = n_layers - 1; l-- > 0;) {
      const auto n_in = static_cast<std::size_t>(layer_sizes[l]);
      const auto n_out = static_cast<std::size_t>(layer_sizes[l + 1]);
      offset -= n_in * n_out + n_out;
      std::vector<double> prev_delta(n_in, 0.0);
      for (std::size_t j = 0; j < n_out; ++j) {
        gradient[offset + n_in * n_out + j] += delta[j];
        for (std::size_t i = 0; i < n_in; ++i) {
          gradient[offset + j * n_in + i] += delta[j] * acts[l][i];
          prev_delta[i] += delta[j] * params[offset + j * n_in + i];
        }
      }
      if (l == 0) break;
      for (std::size_t i = 0; i < n_in; ++i) {
        const double a = acts[l][i];
        prev_delta[i] *= 1.0 - a * a;  // tanh'
      }
      delta = std::move(prev_delta);
    }
  }
  return loss;
}

ProbEstimator fit_mlp(const std::vector<TrainingTarget>& targets,
                      const MlpConfig& config) {
  check_clamp_eps(config.clamp_eps);
  if (targets.empty()) throw std::invalid_argument("fit_mlp: no targets");
  if (config.epochs < 1) throw std::invalid_argument("fit_mlp: epochs must be >= 1");
  const std::int64_t d = common_feature_dim(targets);
  if (d < 1) throw std::invalid_argument("fit_mlp: feature dimension must be >= 1");
  for (auto h : config.hidden) {
    if (h < 1) throw std::invalid_argument("fit_mlp: hidden widths must be >= 1");
  }

  std::vector<std::int64_t> layer_sizes;
  layer_sizes.push_back(d);
  layer_sizes.insert(layer_sizes.end(), config.hidden.begin(), config.hidden.end());
  layer_sizes.push_back(1);

  std::vector<double> params(mlp_param_count(layer_sizes));
  Rng rng(config.seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto n_in = static_cast<std::size_t>(layer_sizes[l]);
    const auto n_out = static_cast<std::size_t>(layer_sizes[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (std::size_t i = 0; i < n_in * n_out; ++i) {
      params[offset + i] = bound * (2.0 * rng.next_unit() - 1.0);
    }
    offset += n_in * n_out + n_out;  // biases start at zero
  }

  std::vector<double> gradient(params.size());
  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = mlp_loss_and_gradient(params, layer_sizes, targets, gradient);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("fit_mlp: non-finite loss at epoch " +
                               std::to_string(epoch) + " with learning rate " +
                               std::to_string(config.learning_rate));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= config.learning_rate * gradient[i];
    }
  }

  ProbEstimator est;
  est.kind = EstimatorKind::kMlp;
  est.layer_sizes = std::move(layer_sizes);
  est.params = std::move(params);
  est.clamp_eps = config.clamp_eps;
  return est;
}

std::string to_text(const ProbEstimator& estimator) {
  nlohmann::ordered_json doc;
  doc["format"] = "gps-estimator/1";
  doc["kind"] = to_string(estimator.kind);
  doc["layer_sizes"] = estimator.layer_sizes;
  doc["clamp_eps"] = estimator.clamp_eps;
  doc["params"] = estimator.params;
  return doc.dump() + "\n";
}

ProbEstimator estimator_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("estimator artifact is not valid JSON: ") +
                             e.what());
  }
  if (!doc.contains("format") || doc["format"] != "gps-estimator/1") {
    throw std::runtime_error("estimator artifact has missing or unsupported format tag");
  }

  ProbEstimator est;
  est.kind = estimator_kind_from_string(doc.at("kind").get<std::string>());
  est.layer_sizes = doc.at("layer_sizes").get<std::vector<std::int64_t>>();
  est.clamp_eps = doc.at("clamp_eps").get<double>();
  est.params = doc.at("params").get<std::vector<double>>();
  check_clamp_eps(est.clamp_eps);

  std::size_t expected = 0;
  switch (est.kind) {
    case EstimatorKind::kConstant:
      expected = 1;
      break;
    case EstimatorKind::kLinear:
      if (est.layer_sizes.size() != 1 || est.layer_sizes[0] < 1) {
        throw std::runtime_error("linear estimator must record one positive layer size");
      }
      expected = static_cast<std::size_t>(est.layer_sizes[0]) + 1;
      break;
    case EstimatorKind::kMlp:
      if (est.layer_sizes.size() < 2 || est.layer_sizes.back() != 1) {
        throw std::runtime_error("mlp estimator layer sizes must end with 1");
      }
      expected = mlp_param_count(est.layer_sizes);
      break;
  }
  if (est.params.size() != expected) {
    throw std::runtime_error("estimator parameter count " +
                             std::to_string(est.params.size()) +
                             " does not match recorded layer sizes (expected " +
                             std::to_string(expected) + ")");
  }
  return est;
}

}  // namespace gps

#include "gps/artifact.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gps {

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("cannot open ") + what + ": " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text, const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(std::string("cannot write ") + what + ": " + path);
  out << text;
}

}  // namespace

CalibratedRule RuleArtifact::to_rule() const {
  CalibratedRule rule;
  rule.alpha = alpha;
  rule.budget = budget;
  rule.adjustment = adjustment;
  rule.n_cal = n_cal;
  rule.scores = scores;
  rule.predictor = estimator;
  return rule;
}

RuleArtifact RuleArtifact::from_rule(const CalibratedRule& rule,
                                     ProbEstimator estimator) {
  RuleArtifact artifact;
  artifact.alpha = rule.alpha;
  artifact.budget = rule.budget;
  artifact.adjustment = rule.adjustment;
  artifact.n_cal = rule.n_cal;
  artifact.scores = rule.scores;
  artifact.estimator = std::move(estimator);
  return artifact;
}

std::string to_text(const RuleArtifact& artifact) {
  nlohmann::ordered_json doc;
  doc["format"] = "gps-rule/1";
  doc["alpha"] = artifact.alpha;
  if (artifact.alpha_target.has_value()) doc["alpha_target"] = *artifact.alpha_target;
  if (artifact.pac_delta.has_value()) doc["pac_delta"] = *artifact.pac_delta;
  doc["budget"] = artifact.budget;
  if (artifact.adjustment.has_value()) {
    doc["adjustment"] = *artifact.adjustment;
  } else {
    doc["adjustment"] = nullptr;
  }
  doc["n_cal"] = artifact.n_cal;
  doc["scores"] = artifact.scores;
  doc["estimator"] = nlohmann::ordered_json::parse(to_text(artifact.estimator));
  return doc.dump() + "\n";
}

RuleArtifact rule_artifact_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("rule artifact is not valid JSON: ") + e.what());
  }
  if (!doc.contains("format") || doc["format"] != "gps-rule/1") {
    throw std::runtime_error("rule artifact has missing or unsupported format tag");
  }

  RuleArtifact artifact;
  artifact.alpha = doc.at("alpha").get<double>();
  if (doc.contains("alpha_target")) artifact.alpha_target = doc["alpha_target"].get<double>();
  if (doc.contains("pac_delta")) artifact.pac_delta = doc["pac_delta"].get<double>();
  artifact.budget = doc.at("budget").get<std::int64_t>();
  if (!doc.at("adjustment").is_null()) {
    artifact.adjustment = doc["adjustment"].get<std::int64_t>();
  }
  artifact.n_cal = doc.at("n_cal").get<std::int64_t>();
  artifact.scores = doc.at("scores").get<std::vector<std::int64_t>>();
  artifact.estimator = estimator_from_text(doc.at("estimator").dump());

  if (artifact.n_cal != static_cast<std::int64_t>(artifact.scores.size())) {
    throw std::runtime_error("rule artifact score count does not match n_cal");
  }
  return artifact;
}

void save_rule_artifact(const std::string& path, const RuleArtifact& artifact) {
  write_file(path, to_text(artifact), "rule artifact");
}

RuleArtifact load_rule_artifact(const std::string& path) {
  return rule_artifact_from_text(read_file(path, "rule artifact"));
}

void save_estimator(const std::string& path, const ProbEstimator& estimator) {
  write_file(path, to_text(estimator), "estimator artifact");
}

ProbEstimator load_estimator(const std::string& path) {
  return estimator_from_text(read_file(path, "estimator artifact"));
}

}  // namespace gps

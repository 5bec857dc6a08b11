#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gps/conformal.hpp"
#include "gps/estimators.hpp"

namespace gps {

// Serialized form of a calibrated rule with its estimator embedded, so
// prediction needs a single file. A format version tag is checked on load.
struct RuleArtifact {
  double alpha = 0.0;  // level the rule was calibrated at (alpha0 when PAC-adjusted)
  std::optional<double> alpha_target;  // requested level, when --pac-delta was used
  std::optional<double> pac_delta;
  std::int64_t budget = 0;
  std::optional<std::int64_t> adjustment;  // nullopt encodes +infinity
  std::int64_t n_cal = 0;
  std::vector<std::int64_t> scores;
  ProbEstimator estimator;

  // Rebinds the embedded estimator as the rule's predictor.
  CalibratedRule to_rule() const;
  static RuleArtifact from_rule(const CalibratedRule& rule, ProbEstimator estimator);
};

std::string to_text(const RuleArtifact& artifact);
RuleArtifact rule_artifact_from_text(const std::string& text);

void save_rule_artifact(const std::string& path, const RuleArtifact& artifact);
RuleArtifact load_rule_artifact(const std::string& path);

void save_estimator(const std::string& path, const ProbEstimator& estimator);
ProbEstimator load_estimator(const std::string& path);

}  // namespace gps

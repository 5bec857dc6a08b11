#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gps/conformal.hpp"
#include "gps/traces.hpp"

namespace gps {

// Evaluation aggregates for one rule on one test set. Abstentions count as
// covered (the abstaining set is the whole output space), which makes
// coverage = nonabs_coverage + abstention_rate an exact identity. Set-size
// and sample means are taken over non-abstained traces only and are absent
// when the rule abstained on everything.
struct MetricsReport {
  double alpha = 0.0;
  std::int64_t n_test = 0;

  std::int64_t n_abstain = 0;
  std::int64_t n_covered_nonabs = 0;  // neither abstained nor missed

  double coverage = 0.0;
  double coverage_se = 0.0;
  double abstention_rate = 0.0;
  double abstention_se = 0.0;
  double nonabs_coverage = 0.0;
  double nonabs_coverage_se = 0.0;

  std::optional<double> avg_set_size;
  std::optional<double> set_size_se;
  std::optional<double> avg_samples;
  std::optional<double> samples_se;

  // True when the test traces carry no output strings, in which case the
  // set-size column reports the draw count k_hat instead of a deduped size.
  bool set_size_is_draws = false;
};

// Applies the stopping rule to every test trace, replays the decisions, and
// aggregates. Standard errors use the normal approximation. Throws on an
// empty test set or a budget mismatch.
MetricsReport evaluate(const CalibratedRule& rule,
                       const std::vector<SampleTrace>& test);

// One output row of a sweep: mean and spread of each metric over trials.
// For a single evaluation the spread fields carry the standard errors.
struct AggregateRow {
  double alpha = 0.0;
  std::string estimator;
  double coverage_mean = 0.0, coverage_std = 0.0;
  double abstention_mean = 0.0, abstention_std = 0.0;
  double nonabs_coverage_mean = 0.0, nonabs_coverage_std = 0.0;
  std::optional<double> set_size_mean, set_size_std;
  std::optional<double> samples_mean, samples_std;
  std::int64_t trials = 0;
};

// Mean +- sample standard deviation of each metric across trial reports.
// Optional metrics aggregate over the trials where they are present.
AggregateRow aggregate_reports(double alpha, std::string estimator,
                               std::span<const MetricsReport> reports);

// Single report as a row; the std columns carry the report's standard errors.
AggregateRow to_aggregate_row(const MetricsReport& report, std::string estimator);

std::string sweep_csv_header();
std::string to_csv_row(const AggregateRow& row);

// Human-readable table; absent metrics print as "-".
void print_report(std::ostream& out, const MetricsReport& report);

// Shortest decimal form that parses back to the same double; locale-free.
std::string format_double(double v);

}  // namespace gps

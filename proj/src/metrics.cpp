#include "gps/metrics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace gps {

namespace {

double binomial_se(double p, std::int64_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

struct RunningMean {
  std::int64_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double variance() const {  // population variance
    const double m = mean();
    return std::max(0.0, sum_sq / static_cast<double>(n) - m * m);
  }
  double se() const { return std::sqrt(variance() / static_cast<double>(n)); }
  double sample_std() const {
    if (n < 2) return 0.0;
    return std::sqrt(variance() * static_cast<double>(n) / static_cast<double>(n - 1));
  }
};

std::string opt_cell(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string{};
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

MetricsReport evaluate(const CalibratedRule& rule,
                       const std::vector<SampleTrace>& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");

  bool outputs_present = true;
  for (const auto& trace : test) {
    if (!trace.outputs.has_value()) {
      outputs_present = false;
      break;
    }
  }

  MetricsReport report;
  report.alpha = rule.alpha;
  report.n_test = static_cast<std::int64_t>(test.size());
  report.set_size_is_draws = !outputs_present;

  RunningMean set_size;
  RunningMean samples;
  for (const auto& trace : test) {
    if (static_cast<std::int64_t>(trace.admissible.size()) > rule.budget) {
      throw std::invalid_argument("evaluate: trace `" + trace.id +
                                  "` has more draws than the rule's budget");
    }
    const StoppingDecision decision = stopping_rule(rule, trace.features);
    const PredictionSet set = replay_prediction(trace, decision);
    if (decision.abstained()) {
      ++report.n_abstain;
      continue;
    }
    if (set.covered) ++report.n_covered_nonabs;
    samples.add(static_cast<double>(set.draws_made));
    set_size.add(outputs_present ? static_cast<double>(set.distinct_outputs.size())
                                 : static_cast<double>(set.draws_made));
  }

  const auto n = static_cast<double>(report.n_test);
  report.abstention_rate = static_cast<double>(report.n_abstain) / n;
  report.nonabs_coverage = static_cast<double>(report.n_covered_nonabs) / n;
  // Abstention covers by convention, so the identity holds by construction.
  report.coverage = report.nonabs_coverage + report.abstention_rate;
  report.coverage_se = binomial_se(report.coverage, report.n_test);
  report.abstention_se = binomial_se(report.abstention_rate, report.n_test);
  report.nonabs_coverage_se = binomial_se(report.nonabs_coverage, report.n_test);

  if (samples.n > 0) {
    report.avg_samples = samples.mean();
    report.samples_se = samples.se();
    report.avg_set_size = set_size.mean();
    report.set_size_se = set_size.se();
  }
  return report;
}

AggregateRow aggregate_reports(double alpha, std::string estimator,
                               std::span<const MetricsReport> reports) {
  if (reports.empty()) {
    throw std::invalid_argument("aggregate_reports: no reports to aggregate");
  }
  RunningMean coverage, abstention, nonabs, set_size, samples;
  for (const auto& r : reports) {
    coverage.add(r.coverage);
    abstention.add(r.abstention_rate);
    nonabs.add(r.nonabs_coverage);
    if (r.avg_set_size.has_value()) set_size.add(*r.avg_set_size);
    if (r.avg_samples.has_value()) samples.add(*r.avg_samples);
  }

  AggregateRow row;
  row.alpha = alpha;
  row.estimator = std::move(estimator);
  row.trials = static_cast<std::int64_t>(reports.size());
  row.coverage_mean = coverage.mean();
  row.coverage_std = coverage.sample_std();
  row.abstention_mean = abstention.mean();
  row.abstention_std = abstention.sample_std();
  row.nonabs_coverage_mean = nonabs.mean();
  row.nonabs_coverage_std = nonabs.sample_std();
  if (set_size.n > 0) {
    row.set_size_mean = set_size.mean();
    row.set_size_std = set_size.sample_std();
  }
  if (samples.n > 0) {
    row.samples_mean = samples.mean();
    row.samples_std = samples.sample_std();
  }
  return row;
}

AggregateRow to_aggregate_row(const MetricsReport& report, std::string estimator) {
  AggregateRow row;
  row.alpha = report.alpha;
  row.estimator = std::move(estimator);
  row.trials = 1;
  row.coverage_mean = report.coverage;
  row.coverage_std = report.coverage_se;
  row.abstention_mean = report.abstention_rate;
  row.abstention_std = report.abstention_se;
  row.nonabs_coverage_mean = report.nonabs_coverage;
  row.nonabs_coverage_std = report.nonabs_coverage_se;
  row.set_size_mean = report.avg_set_size;
  row.set_size_std = report.set_size_se;
  row.samples_mean = report.avg_samples;
  row.samples_std = report.samples_se;
  return row;
}

std::string sweep_csv_header() {
  return "alpha,estimator,coverage_mean,coverage_std,abstention_mean,abstention_std,"
         "nonabs_coverage_mean,nonabs_coverage_std,set_size_mean,set_size_std,"
         "samples_mean,samples_std,trials";
}

std::string to_csv_row(const AggregateRow& row) {
  std::string out;
  out += format_double(row.alpha);
  out += ',';
  out += row.estimator;
  out += ',';
  out += format_double(row.coverage_mean);
  out += ',';
  out += format_double(row.coverage_std);
  out += ',';
  out += format_double(row.abstention_mean);
  out += ',';
  out += format_double(row.abstention_std);
  out += ',';
  out += format_double(row.nonabs_coverage_mean);
  out += ',';
  out += format_double(row.nonabs_coverage_std);
  out += ',';
  out += opt_cell(row.set_size_mean);
  out += ',';
  out += opt_cell(row.set_size_std);
  out += ',';
  out += opt_cell(row.samples_mean);
  out += ',';
  out += opt_cell(row.samples_std);
  out += ',';
  out += std::to_string(row.trials);
  return out;
}

void print_report(std::ostream& out, const MetricsReport& report) {
  auto cell = [](const std::optional<double>& v) {
    return v.has_value() ? format_double(*v) : std::string("-");
  };
  out << "alpha             " << format_double(report.alpha) << '\n'
      << "n_test            " << report.n_test << '\n'
      << "coverage          " << format_double(report.coverage) << " +- "
      << format_double(report.coverage_se) << '\n'
      << "abstention_rate   " << format_double(report.abstention_rate) << " +- "
      << format_double(report.abstention_se) << '\n'
      << "nonabs_coverage   " << format_double(report.nonabs_coverage) << " +- "
      << format_double(report.nonabs_coverage_se) << '\n'
      << "avg_set_size      " << cell(report.avg_set_size) << " +- "
      << cell(report.set_size_se)
      << (report.set_size_is_draws && report.avg_set_size.has_value()
              ? "  (no outputs recorded; reports draw count)"
              : "")
      << '\n'
      << "avg_samples       " << cell(report.avg_samples) << " +- "
      << cell(report.samples_se) << '\n';
}

}  // namespace gps

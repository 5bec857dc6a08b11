#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gps/conformal.hpp"

namespace gps {

// One input's recorded draw sequence. A trace may stop early only at its
// first admissible draw; a shorter record without a success leaves the true
// first-success count unidentifiable and is rejected at parse time.
struct SampleTrace {
  std::string id;
  std::vector<double> features;
  std::vector<std::uint8_t> admissible;  // 0/1 flags, one per draw
  std::optional<std::vector<std::string>> outputs;  // raw strings, same length
};

// Parses line-delimited records (one JSON object per line) with fields
// `id`, `features`, `admissible` and optional `outputs`. When a budget is
// given, each trace is validated against it: at most `budget` flags, and a
// record shorter than the budget must end in a success. Malformed input
// throws std::runtime_error naming the offending line.
std::vector<SampleTrace> parse_traces(std::istream& in,
                                      std::optional<std::int64_t> budget = std::nullopt);
std::vector<SampleTrace> parse_traces_file(const std::string& path,
                                           std::optional<std::int64_t> budget = std::nullopt);

// Canonical writer: one object per line, fields in the order id, features,
// admissible, outputs; floats printed in shortest round-trip form.
void write_traces(std::ostream& out, const std::vector<SampleTrace>& traces);

// First-success index (1-based) under the given budget, with budget+1 as the
// no-success sentinel. The trace must be valid under that budget.
AugmentedExample augment(const SampleTrace& trace, std::int64_t budget);

struct SplitFractions {
  double train = 0.0;
  double cal = 0.0;
  double test = 0.0;
};

struct DataSplit {
  std::vector<SampleTrace> train;
  std::vector<SampleTrace> cal;
  std::vector<SampleTrace> test;
};

// Seeded uniform shuffle followed by a contiguous partition. Part sizes are
// floor(fraction * n) with the remainder handed to earlier parts; a part
// whose fraction is positive but ends up empty is an error.
DataSplit split(std::vector<SampleTrace> traces, const SplitFractions& fractions,
                std::uint64_t seed);

// Replayed outcome of a stopping decision against a recorded trace.
struct PredictionSet {
  StoppingDecision decision;
  std::set<std::string> distinct_outputs;  // empty when outputs absent or abstained
  std::int64_t draws_made = 0;             // k_hat for finite decisions, 0 for abstain
  bool covered = false;
};

// Finite(k_hat): covered iff some admissible flag sits among the first k_hat
// draws, equivalently iff the trace's first-success count K satisfies
// K <= k_hat. Abstain returns the whole output space and always covers.
PredictionSet replay_prediction(const SampleTrace& trace,
                                const StoppingDecision& decision);

}  // namespace gps

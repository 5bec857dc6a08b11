#include "gps/traces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "gps/rng.hpp"

namespace gps {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("trace parse error at line " + std::to_string(line_no) +
                           ": " + what);
}

SampleTrace trace_from_json(const json& rec, std::size_t line_no,
                            std::optional<std::int64_t> budget) {
  if (!rec.is_object()) parse_fail(line_no, "record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string()) {
    parse_fail(line_no, "missing or non-string `id`");
  }
  if (!rec.contains("features") || !rec["features"].is_array()) {
    parse_fail(line_no, "missing or non-array `features`");
  }
  if (!rec.contains("admissible") || !rec["admissible"].is_array()) {
    parse_fail(line_no, "missing or non-array `admissible`");
  }

  SampleTrace trace;
  trace.id = rec["id"].get<std::string>();

  for (const auto& v : rec["features"]) {
    if (!v.is_number()) parse_fail(line_no, "non-numeric feature entry");
    const double x = v.get<double>();
    if (!std::isfinite(x)) parse_fail(line_no, "non-finite feature entry");
    trace.features.push_back(x);
  }

  for (const auto& v : rec["admissible"]) {
    if (!v.is_number_integer()) parse_fail(line_no, "admissible flags must be integers");
    const auto flag = v.get<std::int64_t>();
    if (flag != 0 && flag != 1) parse_fail(line_no, "admissible flags must be 0 or 1");
    trace.admissible.push_back(static_cast<std::uint8_t>(flag));
  }
  if (trace.admissible.empty()) parse_fail(line_no, "trace has no admissibility flags");

  if (rec.contains("outputs")) {
    if (!rec["outputs"].is_array()) parse_fail(line_no, "`outputs` must be an array");
    std::vector<std::string> outputs;
    for (const auto& v : rec["outputs"]) {
      if (!v.is_string()) parse_fail(line_no, "output entries must be strings");
      outputs.push_back(v.get<std::string>());
    }
    if (outputs.size() != trace.admissible.size()) {
      parse_fail(line_no, "`outputs` length does not match `admissible`");
    }
    trace.outputs = std::move(outputs);
  }

  if (budget.has_value()) {
    const auto len = static_cast<std::int64_t>(trace.admissible.size());
    if (len > *budget) {
      parse_fail(line_no, "trace `" + trace.id + "` has " + std::to_string(len) +
                              " flags, more than budget " + std::to_string(*budget));
    }
    if (len < *budget && trace.admissible.back() != 1) {
      parse_fail(line_no, "incomplete trace `" + trace.id +
                              "`: stopped after " + std::to_string(len) +
                              " of " + std::to_string(*budget) +
                              " draws without a success");
    }
  }
  return trace;
}

}  // namespace

std::vector<SampleTrace> parse_traces(std::istream& in,
                                      std::optional<std::int64_t> budget) {
  std::vector<SampleTrace> traces;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      parse_fail(line_no, e.what());
    }
    SampleTrace trace = trace_from_json(rec, line_no, budget);
    if (!seen_ids.insert(trace.id).second) {
      parse_fail(line_no, "duplicate trace id `" + trace.id + "`");
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<SampleTrace> parse_traces_file(const std::string& path,
                                           std::optional<std::int64_t> budget) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  return parse_traces(in, budget);
}

void write_traces(std::ostream& out, const std::vector<SampleTrace>& traces) {
  for (const auto& trace : traces) {
    ordered_json rec;
    rec["id"] = trace.id;
    rec["features"] = trace.features;
    rec["admissible"] = json::array();
    for (auto flag : trace.admissible) rec["admissible"].push_back(static_cast<int>(flag));
    if (trace.outputs.has_value()) rec["outputs"] = *trace.outputs;
    out << rec.dump() << '\n';
  }
}

AugmentedExample augment(const SampleTrace& trace, std::int64_t budget) {
  const auto len = static_cast<std::int64_t>(trace.admissible.size());
  if (len < 1 || len > budget) {
    throw std::invalid_argument("augment: trace `" + trace.id +
                                "` has flag count outside [1, budget]");
  }
  AugmentedExample ex;
  ex.features = trace.features;
  ex.k = budget + 1;
  for (std::int64_t i = 0; i < len; ++i) {
    if (trace.admissible[static_cast<std::size_t>(i)] == 1) {
      ex.k = i + 1;
      break;
    }
  }
  if (ex.k == budget + 1 && len < budget) {
    throw std::invalid_argument("augment: trace `" + trace.id +
                                "` is censored: no success and fewer flags than budget");
  }
  return ex;
}

DataSplit split(std::vector<SampleTrace> traces, const SplitFractions& fractions,
                std::uint64_t seed) {
  const double fs[3] = {fractions.train, fractions.cal, fractions.test};
  double total_frac = 0.0;
  for (double f : fs) {
    if (f < 0.0) throw std::invalid_argument("split: fractions must be nonnegative");
    total_frac += f;
  }
  if (total_frac > 1.0 + 1e-12) {
    throw std::invalid_argument("split: fractions must sum to at most 1");
  }

  const auto n = static_cast<std::int64_t>(traces.size());
  std::int64_t sizes[3];
  std::int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::int64_t>(std::floor(fs[i] * static_cast<double>(n)));
    assigned += sizes[i];
  }
  const auto intended =
      static_cast<std::int64_t>(std::floor(total_frac * static_cast<double>(n) + 1e-9));
  std::int64_t leftover = intended - assigned;
  for (int i = 0; i < 3 && leftover > 0; ++i) {
    if (fs[i] > 0.0) {
      sizes[i] += 1;
      --leftover;
    }
  }
  static const char* kPartNames[3] = {"train", "cal", "test"};
  for (int i = 0; i < 3; ++i) {
    if (fs[i] > 0.0 && sizes[i] == 0) {
      throw std::invalid_argument(std::string("split: ") + kPartNames[i] +
                                  " part is empty; not enough data for fraction " +
                                  std::to_string(fs[i]));
    }
  }

  // Fisher-Yates with the seeded generator.
  Rng rng(seed);
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(traces[static_cast<std::size_t>(i)], traces[static_cast<std::size_t>(j)]);
  }

  DataSplit out;
  auto it = traces.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.cal.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, it + sizes[2]);
  return out;
}

PredictionSet replay_prediction(const SampleTrace& trace,
                                const StoppingDecision& decision) {
  PredictionSet set;
  set.decision = decision;
  if (decision.abstained()) {
    set.covered = true;
    set.draws_made = 0;
    return set;
  }

  const std::int64_t k_hat = *decision.k_hat;
  set.draws_made = k_hat;
  const auto len = static_cast<std::int64_t>(trace.admissible.size());
  const std::int64_t seen = std::min(k_hat, len);
  for (std::int64_t i = 0; i < seen; ++i) {
    if (trace.admissible[static_cast<std::size_t>(i)] == 1) {
      set.covered = true;
      break;
    }
  }
  if (trace.outputs.has_value()) {
    for (std::int64_t i = 0; i < seen; ++i) {
      set.distinct_outputs.insert((*trace.outputs)[static_cast<std::size_t>(i)]);
    }
  }
  return set;
}

}  // namespace gps

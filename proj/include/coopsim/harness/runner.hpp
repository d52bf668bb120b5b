#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coopsim/harness/config.hpp"
#include "coopsim/metrics/metrics.hpp"
#include "coopsim/scenario/scenario.hpp"

namespace coopsim::harness {

using MetricRow = std::vector<std::pair<std::string, double>>;

struct CostSummary {
  std::size_t payloads = 0;
  double mean_body_bytes = 0.0;
  double avg_bps = 0.0;
  bool operator==(const CostSummary&) const = default;
};

struct SeedResult {
  std::uint64_t seed = 0;
  metrics::EvalReport report;
  CostSummary cost;
  // Latency diagnostics over synchronized infrastructure agents (true
  // agents only): mean distance to the true position at fusion time, and
  // mean speed * (fusion time - send time).
  double infra_ref_error = 0.0;
  double infra_ref_expected = 0.0;
  std::size_t infra_ref_samples = 0;

  bool operator==(const SeedResult&) const = default;
};

// Every scalar metric of a report in a fixed order, including horizon
// averages.
MetricRow flatten(const metrics::EvalReport& r);

struct VariantResult {
  std::string name;
  std::vector<SeedResult> seeds;
  MetricRow mean;
  MetricRow stddev;  // population standard deviation
  CostSummary cost;  // seed means
  bool operator==(const VariantResult&) const = default;
};

VariantResult aggregate(std::string name, std::vector<SeedResult> seeds);

enum class Axis { Bandwidth, Latency, Corruption };
std::string_view to_string(Axis a);
Axis axis_from_string(std::string_view s);  // throws ConfigError

struct RunRecord {
  std::string config_hash;
  std::string mode;
  std::string axis;             // empty for a plain run
  std::optional<double> value;  // sweep value
  std::vector<VariantResult> variants;
  bool operator==(const RunRecord&) const = default;
};

// Worker threads: COOPSIM_THREADS if set and positive, else the hardware
// concurrency (at least 1).
int default_workers();

// One seed of one configuration, end to end. The scenario is generated
// with `seed` unless `fixed` is given.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const scenario::Scenario* fixed = nullptr);

// All seeds of cfg in parallel; results in seed-list order.
std::vector<SeedResult> run_seeds(const ExperimentConfig& cfg, int workers);

RunRecord run_mode(const ExperimentConfig& cfg, int workers);

// One record per value. Bandwidth values are Mb/s, latency values seconds,
// corruption values drop fractions. The latency axis carries a second
// variant without flow compensation; the corruption axis transmits agent
// queries only.
std::vector<RunRecord> sweep(Axis axis, const std::vector<double>& values, const ExperimentConfig& base, int workers);

// Config as run for one sweep value (exposed for tests).
ExperimentConfig sweep_config(Axis axis, double value, const ExperimentConfig& base);

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);
nlohmann::json records_to_json(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_json(const nlohmann::json& j);

}  // namespace coopsim::harness

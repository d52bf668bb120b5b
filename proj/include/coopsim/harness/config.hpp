#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coopsim/channel/channel.hpp"
#include "coopsim/fusion/fusion.hpp"
#include "coopsim/planner/planner.hpp"
#include "coopsim/scenario/scenario.hpp"

namespace coopsim::harness {

// Bad configuration input: unparsable JSON, unknown keys, invalid values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mode { NoFusion, LateFusion, UniV2X, DenseBev };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);  // throws ConfigError

// Which parts of the hybrid payload the infrastructure sends.
struct TransmitFlags {
  bool agents = true;
  bool lanes = true;
  bool occupancy = true;
  bool operator==(const TransmitFlags&) const = default;
};

struct ExperimentConfig {
  scenario::ScenarioConfig scenario;
  // When set, this recorded scenario replaces generation for every seed.
  std::optional<std::string> scenario_path;
  Mode mode = Mode::UniV2X;
  channel::ChannelConfig channel;
  fusion::FusionConfig fusion;
  planner::PlannerConfig planner;
  TransmitFlags transmit;
  bool noiseless_sensors = false;
  std::vector<std::uint64_t> seeds = {0};
  std::string output;

  void validate() const;  // throws ConfigError
  bool operator==(const ExperimentConfig&) const = default;
};

// Field names follow the struct; missing keys keep defaults and unknown
// keys are rejected. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON of everything except `output`, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace coopsim::harness

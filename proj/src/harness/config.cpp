#include "coopsim/harness/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "coopsim/scenario/scenario_io.hpp"

namespace coopsim::harness {

using nlohmann::json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::NoFusion: return "no_fusion";
    case Mode::LateFusion: return "late_fusion";
    case Mode::UniV2X: return "univ2x";
    case Mode::DenseBev: return "dense_bev";
  }
  return "unknown";
}

Mode mode_from_string(std::string_view s) {
  for (auto m : {Mode::NoFusion, Mode::LateFusion, Mode::UniV2X, Mode::DenseBev}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode: " + std::string(s));
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (!channel.is_valid()) throw ConfigError("config: invalid channel settings");
  if (!fusion.is_valid()) throw ConfigError("config: invalid fusion settings");
  if (!planner.is_valid()) throw ConfigError("config: invalid planner settings");
  if (!planner::safety_bound_holds(planner)) {
    throw ConfigError("config: planner collision weight must exceed every other cost term combined");
  }
  if (!(scenario.dt > 0.0) || !(scenario.duration >= scenario.dt) || scenario.n_agents < 0 ||
      !(scenario.ego_speed >= 0.0) || scenario.ego_speed > planner.max_speed) {
    throw ConfigError("config: invalid scenario settings");
  }
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

channel::ChannelConfig channel_from_json(const json& j, double default_freq) {
  reject_unknown(j, {"latency", "bandwidth_budget", "bandwidth_mbps", "drop_fraction", "frequency_hz"}, "channel");
  channel::ChannelConfig c;
  c.frequency_hz = default_freq;
  read(j, "latency", c.latency);
  read(j, "drop_fraction", c.drop_fraction);
  read(j, "frequency_hz", c.frequency_hz);
  if (j.contains("bandwidth_budget") && !j.at("bandwidth_budget").is_null()) {
    c.bandwidth_budget = j.at("bandwidth_budget").get<std::size_t>();
  }
  if (j.contains("bandwidth_mbps") && !j.at("bandwidth_mbps").is_null()) {
    if (c.bandwidth_budget) throw ConfigError("channel: give bandwidth_budget or bandwidth_mbps, not both");
    const double mbps = j.at("bandwidth_mbps").get<double>();
    if (!(mbps >= 0.0) || !(c.frequency_hz > 0.0)) throw ConfigError("channel: invalid bandwidth_mbps");
    c.bandwidth_budget = channel::budget_from_mbps(mbps, c.frequency_hz);
  }
  return c;
}

fusion::FusionConfig fusion_from_json(const json& j) {
  reject_unknown(j,
                 {"gate_distance", "conf_keep_threshold", "occ_threshold", "ego_rect", "unmatched_conf_decay",
                  "flow_compensation", "lane_dedup_distance"},
                 "fusion");
  fusion::FusionConfig c;
  read(j, "gate_distance", c.gate_distance);
  read(j, "conf_keep_threshold", c.conf_keep_threshold);
  read(j, "occ_threshold", c.occ_threshold);
  read(j, "unmatched_conf_decay", c.unmatched_conf_decay);
  read(j, "flow_compensation", c.flow_compensation);
  read(j, "lane_dedup_distance", c.lane_dedup_distance);
  if (j.contains("ego_rect")) {
    const json& r = j.at("ego_rect");
    reject_unknown(r, {"length", "width", "margin"}, "fusion.ego_rect");
    read(r, "length", c.ego_rect.length);
    read(r, "width", c.ego_rect.width);
    read(r, "margin", c.ego_rect.margin);
  }
  return c;
}

planner::PlannerConfig planner_from_json(const json& j) {
  reject_unknown(j,
                 {"horizon", "dt", "n_per_command", "max_left_curvature", "max_right_curvature",
                  "max_forward_curvature", "speed_factors", "weights", "snap_radius", "ego_length", "ego_width",
                  "max_speed"},
                 "planner");
  planner::PlannerConfig c;
  read(j, "horizon", c.horizon);
  read(j, "dt", c.dt);
  read(j, "n_per_command", c.n_per_command);
  read(j, "max_left_curvature", c.max_left_curvature);
  read(j, "max_right_curvature", c.max_right_curvature);
  read(j, "max_forward_curvature", c.max_forward_curvature);
  read(j, "speed_factors", c.speed_factors);
  read(j, "snap_radius", c.snap_radius);
  read(j, "ego_length", c.ego_length);
  read(j, "ego_width", c.ego_width);
  read(j, "max_speed", c.max_speed);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    reject_unknown(w, {"collision", "offroad", "smooth"}, "planner.weights");
    read(w, "collision", c.weights.collision);
    read(w, "offroad", c.weights.offroad);
    read(w, "smooth", c.weights.smooth);
  }
  return c;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  try {
    reject_unknown(j,
                   {"scenario", "scenario_path", "mode", "channel", "fusion", "planner", "transmit",
                    "noiseless_sensors", "seeds", "output"},
                   "config");
    ExperimentConfig c;
    if (j.contains("scenario")) {
      reject_unknown(j.at("scenario"),
                     {"seed", "duration", "dt", "n_agents", "layout", "ego_command", "ego_speed",
                      "occluded_crossing", "constant_velocity"},
                     "scenario");
      c.scenario = scenario::scenario_config_from_json(j.at("scenario"));
    }
    if (j.contains("scenario_path") && !j.at("scenario_path").is_null()) {
      c.scenario_path = j.at("scenario_path").get<std::string>();
    }
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("channel")) c.channel = channel_from_json(j.at("channel"), c.channel.frequency_hz);
    if (j.contains("fusion")) c.fusion = fusion_from_json(j.at("fusion"));
    if (j.contains("planner")) c.planner = planner_from_json(j.at("planner"));
    if (j.contains("transmit")) {
      const json& t = j.at("transmit");
      reject_unknown(t, {"agents", "lanes", "occupancy"}, "transmit");
      read(t, "agents", c.transmit.agents);
      read(t, "lanes", c.transmit.lanes);
      read(t, "occupancy", c.transmit.occupancy);
    }
    read(j, "noiseless_sensors", c.noiseless_sensors);
    read(j, "seeds", c.seeds);
    read(j, "output", c.output);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["scenario"] = scenario::scenario_config_to_json(c.scenario);
  j["scenario_path"] = c.scenario_path ? json(*c.scenario_path) : json(nullptr);
  j["mode"] = to_string(c.mode);
  j["channel"] = {{"latency", c.channel.latency},
                  {"bandwidth_budget", c.channel.bandwidth_budget ? json(*c.channel.bandwidth_budget) : json(nullptr)},
                  {"drop_fraction", c.channel.drop_fraction},
                  {"frequency_hz", c.channel.frequency_hz}};
  j["fusion"] = {{"gate_distance", c.fusion.gate_distance},
                 {"conf_keep_threshold", c.fusion.conf_keep_threshold},
                 {"occ_threshold", c.fusion.occ_threshold},
                 {"ego_rect",
                  {{"length", c.fusion.ego_rect.length},
                   {"width", c.fusion.ego_rect.width},
                   {"margin", c.fusion.ego_rect.margin}}},
                 {"unmatched_conf_decay", c.fusion.unmatched_conf_decay},
                 {"flow_compensation", c.fusion.flow_compensation},
                 {"lane_dedup_distance", c.fusion.lane_dedup_distance}};
  j["planner"] = {{"horizon", c.planner.horizon},
                  {"dt", c.planner.dt},
                  {"n_per_command", c.planner.n_per_command},
                  {"max_left_curvature", c.planner.max_left_curvature},
                  {"max_right_curvature", c.planner.max_right_curvature},
                  {"max_forward_curvature", c.planner.max_forward_curvature},
                  {"speed_factors", c.planner.speed_factors},
                  {"weights",
                   {{"collision", c.planner.weights.collision},
                    {"offroad", c.planner.weights.offroad},
                    {"smooth", c.planner.weights.smooth}}},
                  {"snap_radius", c.planner.snap_radius},
                  {"ego_length", c.planner.ego_length},
                  {"ego_width", c.planner.ego_width},
                  {"max_speed", c.planner.max_speed}};
  j["transmit"] = {{"agents", c.transmit.agents}, {"lanes", c.transmit.lanes}, {"occupancy", c.transmit.occupancy}};
  j["noiseless_sensors"] = c.noiseless_sensors;
  j["seeds"] = c.seeds;
  j["output"] = c.output;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("output");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace coopsim::harness

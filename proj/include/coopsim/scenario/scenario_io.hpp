#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "coopsim/scenario/scenario.hpp"

namespace coopsim::scenario {

std::string_view to_string(Layout layout);
Layout layout_from_string(std::string_view s);  // throws std::invalid_argument

// Scenario file schema:
//   { "format": "coopsim-scenario/1",
//     "config": { seed, duration, dt, n_agents, layout, ego_command, ego_speed,
//                 occluded_crossing, constant_velocity },
//     "frames": [ { index, time,
//                   ego: AgentState, ego_pose: { rotation: [9 row-major], translation: [3] },
//                   agents: [ AgentState ] } ] }
// AgentState = { id, position: [x,y], heading, speed, turn_rate,
//                box_size: [l,w,h], class }.
// The road layout is rebuilt from config.layout on load.
nlohmann::json scenario_config_to_json(const ScenarioConfig& c);
// Missing keys keep their defaults; wrong types throw nlohmann::json::exception.
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

void save_scenario(const Scenario& s, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace coopsim::scenario

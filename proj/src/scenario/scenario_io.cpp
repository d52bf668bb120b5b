#include "coopsim/scenario/scenario_io.hpp"

#include <fstream>
#include <stdexcept>

namespace coopsim::scenario {

using nlohmann::json;

std::string_view to_string(Layout layout) {
  return layout == Layout::CrossIntersection ? "cross_intersection" : "t_intersection";
}

Layout layout_from_string(std::string_view s) {
  if (s == "cross_intersection") return Layout::CrossIntersection;
  if (s == "t_intersection") return Layout::TIntersection;
  throw std::invalid_argument("unknown layout: " + std::string(s));
}

json scenario_config_to_json(const ScenarioConfig& c) {
  return {{"seed", c.seed},
          {"duration", c.duration},
          {"dt", c.dt},
          {"n_agents", c.n_agents},
          {"layout", to_string(c.layout)},
          {"ego_command", core::to_string(c.ego_command)},
          {"ego_speed", c.ego_speed},
          {"occluded_crossing", c.occluded_crossing},
          {"constant_velocity", c.constant_velocity}};
}

ScenarioConfig scenario_config_from_json(const json& j) {
  ScenarioConfig c;
  c.seed = j.value("seed", c.seed);
  c.duration = j.value("duration", c.duration);
  c.dt = j.value("dt", c.dt);
  c.n_agents = j.value("n_agents", c.n_agents);
  if (j.contains("layout")) c.layout = layout_from_string(j.at("layout").get<std::string>());
  if (j.contains("ego_command")) {
    const auto s = j.at("ego_command").get<std::string>();
    const auto cmd = core::command_from_string(s);
    if (!cmd) throw std::invalid_argument("unknown ego_command: " + s);
    c.ego_command = *cmd;
  }
  c.ego_speed = j.value("ego_speed", c.ego_speed);
  c.occluded_crossing = j.value("occluded_crossing", c.occluded_crossing);
  c.constant_velocity = j.value("constant_velocity", c.constant_velocity);
  return c;
}

namespace {

json agent_to_json(const AgentState& a) {
  return {{"id", a.id},
          {"position", {a.position.x(), a.position.y()}},
          {"heading", a.heading},
          {"speed", a.speed},
          {"turn_rate", a.turn_rate},
          {"box_size", {a.box_size.length, a.box_size.width, a.box_size.height}},
          {"class", core::to_string(a.agent_class)}};
}

AgentState agent_from_json(const json& j) {
  AgentState a;
  a.id = j.at("id").get<std::int32_t>();
  const auto& p = j.at("position");
  a.position = core::Vec2(p.at(0).get<double>(), p.at(1).get<double>());
  a.heading = j.at("heading").get<double>();
  a.speed = j.at("speed").get<double>();
  a.turn_rate = j.value("turn_rate", 0.0);
  const auto& b = j.at("box_size");
  a.box_size = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
  const auto cls = core::agent_class_from_string(j.at("class").get<std::string>());
  if (!cls) throw std::invalid_argument("unknown agent class in scenario file");
  a.agent_class = *cls;
  if (a.speed < 0.0 || a.box_size.length <= 0.0 || a.box_size.width <= 0.0 || a.box_size.height <= 0.0) {
    throw std::invalid_argument("agent " + std::to_string(a.id) + " violates speed/box invariants");
  }
  return a;
}

json pose_to_json(const core::Pose& p) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(p.rotation(i, k));
  return {{"rotation", r}, {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

core::Pose pose_from_json(const json& j) {
  core::Pose p;
  const auto& r = j.at("rotation");
  if (r.size() != 9) throw std::invalid_argument("pose rotation must have 9 entries");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.rotation(i, k) = r.at(i * 3 + k).get<double>();
  const auto& t = j.at("translation");
  p.translation = core::Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  if (!p.is_valid()) throw std::invalid_argument("pose rotation is not a proper rotation");
  return p;
}

}  // namespace

json scenario_to_json(const Scenario& s) {
  json frames = json::array();
  for (const auto& f : s.frames) {
    json agents = json::array();
    for (const auto& a : f.agents) agents.push_back(agent_to_json(a));
    frames.push_back({{"index", f.index},
                      {"time", f.time},
                      {"ego", agent_to_json(f.ego)},
                      {"ego_pose", pose_to_json(f.ego_pose)},
                      {"agents", std::move(agents)}});
  }
  return {{"format", "coopsim-scenario/1"}, {"config", scenario_config_to_json(s.config)}, {"frames", frames}};
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.config = scenario_config_from_json(j.at("config"));
  s.road = std::make_shared<const RoadLayout>(make_layout(s.config.layout));
  for (const auto& jf : j.at("frames")) {
    WorldFrame f;
    f.index = jf.at("index").get<int>();
    f.time = jf.at("time").get<double>();
    f.ego = agent_from_json(jf.at("ego"));
    f.ego_pose = pose_from_json(jf.at("ego_pose"));
    for (const auto& ja : jf.at("agents")) f.agents.push_back(agent_from_json(ja));
    f.road = s.road;
    s.frames.push_back(std::move(f));
  }
  return s;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << scenario_to_json(s).dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
  return scenario_from_json(json::parse(in));
}

}  // namespace coopsim::scenario

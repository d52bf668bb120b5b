#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"

namespace coopsim::scenario {

using core::AgentClass;
using core::BoxSize;
using core::Vec2;

struct AgentState {
  std::int32_t id = 0;
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
  double turn_rate = 0.0;
  BoxSize box_size;
  AgentClass agent_class = AgentClass::Car;

  core::BevBox footprint() const { return {position, box_size.length, box_size.width, heading}; }
  bool operator==(const AgentState&) const = default;
};

// Constant-turn-rate step: heading first, then position along the new heading.
AgentState advance(const AgentState& state, double dt);

BoxSize default_box(AgentClass c);

struct LanePolyline {
  std::vector<Vec2> points;
  core::LaneClass lane_class = core::LaneClass::Lane;
  bool operator==(const LanePolyline&) const = default;
};

enum class Layout { CrossIntersection, TIntersection };

// Static road geometry shared by every frame of a scenario.
struct RoadLayout {
  Layout layout = Layout::CrossIntersection;
  std::vector<LanePolyline> lanes;
  std::vector<core::Rect> drivable_rects;
  std::vector<core::Rect> occluders;
  core::GridSpec world_grid{300, 300, 0.5, -75.0, -75.0};
  core::MaskGrid drivable_mask;  // rasterized drivable_rects on world_grid

  bool is_drivable(const Vec2& world_xy) const;
  bool operator==(const RoadLayout&) const = default;
};

RoadLayout make_layout(Layout layout);

struct WorldFrame {
  int index = 0;
  double time = 0.0;
  std::vector<AgentState> agents;  // excludes the ego
  AgentState ego;
  core::Pose ego_pose;  // world_from_ego
  std::shared_ptr<const RoadLayout> road;

  const std::vector<LanePolyline>& lanes() const { return road->lanes; }
  const core::MaskGrid& drivable_mask() const { return road->drivable_mask; }
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  double duration = 10.0;
  double dt = 0.5;
  int n_agents = 12;
  Layout layout = Layout::CrossIntersection;
  core::Command ego_command = core::Command::KeepForward;
  double ego_speed = 8.0;
  // Adds a car on the cross road, hidden from the ego by the corner
  // buildings, timed to reach the ego's lane when the ego does.
  bool occluded_crossing = true;
  // Every agent moves in a straight line at constant nonzero speed.
  bool constant_velocity = false;

  bool operator==(const ScenarioConfig&) const = default;
};

struct Scenario {
  ScenarioConfig config;
  std::shared_ptr<const RoadLayout> road;
  std::vector<WorldFrame> frames;

  // nullptr outside [0, frames.size()).
  const WorldFrame* frame_at(int index) const {
    return index >= 0 && index < static_cast<int>(frames.size()) ? &frames[index] : nullptr;
  }
};

inline constexpr std::int32_t kEgoAgentId = 0;

// Throws std::invalid_argument for dt <= 0, duration < dt or n_agents < 0.
Scenario generate_scenario(const ScenarioConfig& config);

std::size_t frame_count(double duration, double dt);

// Cells whose centers fall inside any agent footprint; `world_from_grid`
// places the grid's local frame in the world. The ego is never drawn.
core::MaskGrid rasterize_agents(const WorldFrame& frame, const core::GridSpec& grid,
                                const core::Pose& world_from_grid);

// Same, for an explicit box list already in the grid frame.
void rasterize_boxes(const std::vector<core::BevBox>& boxes, core::MaskGrid& mask);

bool frames_equal(const WorldFrame& a, const WorldFrame& b);
bool scenarios_equal(const Scenario& a, const Scenario& b);

}  // namespace coopsim::scenario

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"

namespace coopsim::core {

inline constexpr int kDefaultFeatureDim = 256;

enum class AgentClass : std::uint8_t { Car = 0, Bicycle = 1, Pedestrian = 2, TrafficCone = 3 };
inline constexpr std::array kAgentClasses = {AgentClass::Car, AgentClass::Bicycle, AgentClass::Pedestrian,
                                             AgentClass::TrafficCone};

enum class LaneClass : std::uint8_t { Lane = 0, Crosswalk = 1 };

std::string_view to_string(AgentClass c);
std::string_view to_string(LaneClass c);
std::optional<AgentClass> agent_class_from_string(std::string_view s);
std::optional<LaneClass> lane_class_from_string(std::string_view s);

struct BoxSize {
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  bool operator==(const BoxSize&) const = default;
};

// Instance-level record for one dynamic object, in the frame of whoever
// holds it (sensor frame on the infrastructure, ego frame after sync).
struct AgentQuery {
  std::vector<double> feature;
  Vec3 ref_point = Vec3::Zero();
  double heading = 0.0;
  Vec2 velocity = Vec2::Zero();
  Vec2 flow_ref = Vec2::Zero();          // m/s
  std::vector<double> flow_feature;      // per second
  std::int32_t track_id = 0;
  double confidence = 0.0;
  BoxSize box_size;
  AgentClass agent_class = AgentClass::Car;
  double timestamp = 0.0;

  bool operator==(const AgentQuery&) const = default;
};

struct LaneQuery {
  std::vector<double> feature;
  std::vector<Vec2> points;
  LaneClass lane_class = LaneClass::Lane;
  double confidence = 1.0;

  bool operator==(const LaneQuery&) const = default;
};

// p0 is an occupied probability map, p1 its rate of change per second.
struct OccupancyMessage {
  ProbGrid p0;
  ProbGrid p1;
  double timestamp = 0.0;

  OccupancyMessage() = default;
  OccupancyMessage(const GridSpec& grid, double t) : p0(grid, 0.0f), p1(grid, 0.0f), timestamp(t) {}
  const GridSpec& grid() const { return p0.spec(); }

  bool operator==(const OccupancyMessage&) const = default;
};

struct OccupiedMask {
  MaskGrid cells;
  double threshold_used = 0.5;

  const GridSpec& grid() const { return cells.spec(); }
  bool operator==(const OccupiedMask&) const = default;
};

// Oriented rectangle in the BEV plane.
struct BevBox {
  Vec2 center = Vec2::Zero();
  double length = 1.0;
  double width = 1.0;
  double heading = 0.0;

  std::array<Vec2, 4> corners() const;
  bool contains(const Vec2& p) const;
};

}  // namespace coopsim::core

namespace coopsim::core {

// Axis-aligned rectangle, inclusive bounds.
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  bool contains(const Vec2& p) const { return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max; }
  bool is_ordered() const { return x_min <= x_max && y_min <= y_max; }
  bool operator==(const Rect&) const = default;
};

// True when the closed segment a-b touches the rectangle.
bool segment_intersects_rect(const Vec2& a, const Vec2& b, const Rect& r);

// Driving command given to the planner.
enum class Command : std::uint8_t { TurnLeft = 0, KeepForward = 1, TurnRight = 2 };

std::string_view to_string(Command c);
std::optional<Command> command_from_string(std::string_view s);

}  // namespace coopsim::core

#include "coopsim/core/types.hpp"

#include <cmath>

namespace coopsim::core {

std::string_view to_string(AgentClass c) {
  switch (c) {
    case AgentClass::Car: return "car";
    case AgentClass::Bicycle: return "bicycle";
    case AgentClass::Pedestrian: return "pedestrian";
    case AgentClass::TrafficCone: return "traffic_cone";
  }
  return "unknown";
}

std::string_view to_string(LaneClass c) { return c == LaneClass::Lane ? "lane" : "crosswalk"; }

std::optional<AgentClass> agent_class_from_string(std::string_view s) {
  for (auto c : kAgentClasses) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<LaneClass> lane_class_from_string(std::string_view s) {
  if (s == "lane") return LaneClass::Lane;
  if (s == "crosswalk") return LaneClass::Crosswalk;
  return std::nullopt;
}

std::array<Vec2, 4> BevBox::corners() const {
  const Vec2 ax(std::cos(heading), std::sin(heading));
  const Vec2 ay(-ax.y(), ax.x());
  const Vec2 hx = ax * (0.5 * length);
  const Vec2 hy = ay * (0.5 * width);
  return {center - hx - hy, center + hx - hy, center + hx + hy, center - hx + hy};
}

bool BevBox::contains(const Vec2& p) const {
  const Vec2 d = p - center;
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= 0.5 * length && std::abs(ly) <= 0.5 * width;
}

}  // namespace coopsim::core

namespace coopsim::core {

bool segment_intersects_rect(const Vec2& a, const Vec2& b, const Rect& r) {
  // Liang-Barsky clip of the parametric segment against the slab pair.
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec2 d = b - a;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - r.x_min, r.x_max - a.x(), a.y() - r.y_min, r.y_max - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      if (t > t1) return false;
      if (t > t0) t0 = t;
    } else {
      if (t < t0) return false;
      if (t < t1) t1 = t;
    }
  }
  return t0 <= t1;
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::TurnLeft: return "turn_left";
    case Command::KeepForward: return "keep_forward";
    case Command::TurnRight: return "turn_right";
  }
  return "unknown";
}

std::optional<Command> command_from_string(std::string_view s) {
  for (auto c : {Command::TurnLeft, Command::KeepForward, Command::TurnRight}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

}  // namespace coopsim::core

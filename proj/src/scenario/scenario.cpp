#include "coopsim/scenario/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "coopsim/scenario/rng.hpp"

namespace coopsim::scenario {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRoadHalfWidth = 7.0;
constexpr double kLaneInner = 1.75;
constexpr double kLaneOuter = 5.25;
constexpr double kSidewalk = 8.0;
constexpr double kMapHalf = 75.0;
constexpr double kBuildingSetback = 9.0;
constexpr double kPolylineStep = 2.0;

std::vector<Vec2> sample_segment(const Vec2& a, const Vec2& b) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / kPolylineStep)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return pts;
}

void add_line(RoadLayout& road, const Vec2& a, const Vec2& b, core::LaneClass c = core::LaneClass::Lane) {
  road.lanes.push_back({sample_segment(a, b), c});
}

// Lane markings (center line and both road edges) along one arm of the
// intersection, from the stop line outwards. `dir` points away from the center.
void add_arm(RoadLayout& road, const Vec2& dir) {
  const Vec2 side(-dir.y(), dir.x());
  const Vec2 start = dir * kBuildingSetback;
  const Vec2 end = dir * kMapHalf;
  for (double off : {-kRoadHalfWidth, 0.0, kRoadHalfWidth}) add_line(road, start + side * off, end + side * off);
  const Vec2 cw = dir * (kRoadHalfWidth + 1.0);
  add_line(road, cw - side * kRoadHalfWidth, cw + side * kRoadHalfWidth, core::LaneClass::Crosswalk);
}

struct Spawn {
  Vec2 position;
  double heading;
  double lane_offset;
  bool horizontal;
};

}  // namespace

AgentState advance(const AgentState& state, double dt) {
  AgentState next = state;
  next.heading = state.heading + state.turn_rate * dt;
  next.position = state.position + state.speed * dt * Vec2(std::cos(next.heading), std::sin(next.heading));
  return next;
}

BoxSize default_box(AgentClass c) {
  switch (c) {
    case AgentClass::Car: return {4.5, 1.9, 1.6};
    case AgentClass::Bicycle: return {1.8, 0.6, 1.2};
    case AgentClass::Pedestrian: return {0.6, 0.6, 1.7};
    case AgentClass::TrafficCone: return {0.4, 0.4, 0.7};
  }
  return {};
}

bool RoadLayout::is_drivable(const Vec2& world_xy) const {
  return std::any_of(drivable_rects.begin(), drivable_rects.end(),
                     [&](const core::Rect& r) { return r.contains(world_xy); });
}

RoadLayout make_layout(Layout layout) {
  RoadLayout road;
  road.layout = layout;
  const double w = kRoadHalfWidth;
  const double m = kMapHalf;
  const double s = kBuildingSetback;
  road.drivable_rects.push_back({-m, m, -w, w});
  add_arm(road, Vec2(-1, 0));
  add_arm(road, Vec2(1, 0));
  add_arm(road, Vec2(0, -1));
  if (layout == Layout::CrossIntersection) {
    road.drivable_rects.push_back({-w, w, -m, m});
    add_arm(road, Vec2(0, 1));
    road.occluders = {{-m, -s, s, m}, {s, m, s, m}, {-m, -s, -m, -s}, {s, m, -m, -s}};
  } else {
    road.drivable_rects.push_back({-w, w, -m, w});
    // The through road's far edge runs uninterrupted across the junction.
    add_line(road, Vec2(-s, w), Vec2(s, w));
    road.occluders = {{-m, m, s, m}, {-m, -s, -m, -s}, {s, m, -m, -s}};
  }
  road.drivable_mask = core::MaskGrid(road.world_grid, 0);
  for (std::size_t i = 0; i < road.drivable_mask.size(); ++i) {
    const auto c = road.world_grid.cell_of(i);
    road.drivable_mask[i] = road.is_drivable(road.world_grid.cell_to_center(c)) ? 1 : 0;
  }
  return road;
}

std::size_t frame_count(double duration, double dt) {
  return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
}

namespace {

// Spawn slots on every lane except the ego's own lane (eastbound, inner).
Spawn random_spawn(RngStream& rng, Layout layout, AgentClass cls) {
  const int n_arms = layout == Layout::CrossIntersection ? 4 : 3;
  for (;;) {
    const int arm = static_cast<int>(rng.below(n_arms));  // 0 W, 1 E, 2 S, 3 N
    const bool inbound = rng.uniform() < 0.5;
    const double dist = rng.uniform(12.0, 60.0);
    double offset = rng.uniform() < 0.5 ? kLaneInner : kLaneOuter;
    if (cls == AgentClass::Pedestrian) offset = kSidewalk;
    if (cls == AgentClass::Bicycle) offset = kLaneOuter;
    if (cls == AgentClass::TrafficCone) offset = 6.5;

    Vec2 dir = arm == 0 ? Vec2(-1, 0) : arm == 1 ? Vec2(1, 0) : arm == 2 ? Vec2(0, -1) : Vec2(0, 1);
    const Vec2 travel = inbound ? Vec2(-dir) : dir;
    // Right-hand traffic: the lane lies to the right of the travel direction.
    const Vec2 right(travel.y(), -travel.x());
    const Vec2 pos = dir * dist + right * offset;
    const bool eastbound = travel.x() > 0.5;
    if (eastbound && std::abs(pos.y() + kLaneInner) < 0.1) continue;
    return {pos, std::atan2(travel.y(), travel.x()), offset, arm < 2};
  }
}

AgentClass random_class(RngStream& rng, bool allow_static) {
  const double u = rng.uniform();
  if (u < 0.65) return AgentClass::Car;
  if (u < 0.8) return AgentClass::Bicycle;
  if (u < 0.92 || !allow_static) return AgentClass::Pedestrian;
  return AgentClass::TrafficCone;
}

double random_speed(RngStream& rng, AgentClass cls) {
  switch (cls) {
    case AgentClass::Car: return rng.uniform(5.0, 11.0);
    case AgentClass::Bicycle: return rng.uniform(3.0, 6.0);
    case AgentClass::Pedestrian: return rng.uniform(1.0, 1.8);
    case AgentClass::TrafficCone: return 0.0;
  }
  return 0.0;
}

struct EgoScript {
  core::Command command;
  double turn_start_x;
  double radius;
  double target_heading;
};

EgoScript ego_script(core::Command command) {
  switch (command) {
    case core::Command::TurnLeft: return {command, kLaneInner - 10.0, 10.0, kPi / 2};
    case core::Command::TurnRight: return {command, -kLaneOuter - 5.0, 5.0, -kPi / 2};
    case core::Command::KeepForward: break;
  }
  return {command, 1e9, 1.0, 0.0};
}

AgentState step_ego(const AgentState& ego, const EgoScript& script, double dt) {
  AgentState s = ego;
  const bool turning = script.command != core::Command::KeepForward && s.position.x() >= script.turn_start_x &&
                       s.heading != script.target_heading;
  s.turn_rate = turning ? std::copysign(s.speed / script.radius, script.target_heading) : 0.0;
  AgentState next = advance(s, dt);
  if (turning && std::abs(next.heading) >= std::abs(script.target_heading)) {
    // Finish the turn exactly on the target heading.
    next.heading = script.target_heading;
    next.position = s.position + s.speed * dt * Vec2(std::cos(next.heading), std::sin(next.heading));
  }
  next.turn_rate = 0.0;
  return next;
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& config) {
  if (!(config.dt > 0.0) || !(config.duration >= config.dt) || config.n_agents < 0 || !(config.ego_speed >= 0.0)) {
    throw std::invalid_argument("invalid scenario config: need duration >= dt > 0, n_agents >= 0, ego_speed >= 0");
  }
  Scenario sc;
  sc.config = config;
  sc.road = std::make_shared<const RoadLayout>(make_layout(config.layout));

  RngStream rng(config.seed, StreamPurpose::ScenarioLayout, {});
  std::vector<AgentState> agents;
  std::int32_t next_id = 1;

  if (config.occluded_crossing) {
    // Southbound on the inner lane, crossing the ego lane at x = -1.75.
    const double speed = rng.uniform(7.0, 9.0);
    const double ego_arrival = (-kLaneInner + 30.0) / std::max(config.ego_speed, 1e-6);
    const double t_cross = std::clamp(ego_arrival + rng.uniform(-0.4, 0.4), 0.5, 60.0);
    AgentState a;
    a.id = next_id++;
    a.agent_class = AgentClass::Car;
    a.box_size = default_box(AgentClass::Car);
    a.speed = speed;
    a.heading = -kPi / 2;
    a.position = Vec2(-kLaneInner, -kLaneInner + speed * t_cross);
    agents.push_back(a);
  }

  for (int i = 0; i < config.n_agents; ++i) {
    const AgentClass cls = random_class(rng, !config.constant_velocity);
    Spawn sp{};
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      sp = random_spawn(rng, config.layout, cls);
      placed = std::none_of(agents.begin(), agents.end(),
                            [&](const AgentState& o) { return (o.position - sp.position).norm() < 7.0; });
    }
    if (!placed) continue;
    AgentState a;
    a.id = next_id++;
    a.agent_class = cls;
    a.box_size = default_box(cls);
    a.position = sp.position;
    a.heading = sp.heading;
    a.speed = random_speed(rng, cls);
    agents.push_back(a);
  }

  const EgoScript script = ego_script(config.ego_command);
  AgentState ego;
  ego.id = kEgoAgentId;
  ego.agent_class = AgentClass::Car;
  ego.box_size = {4.6, 1.8, 1.6};
  ego.position = Vec2(-30.0, -kLaneInner);
  ego.heading = 0.0;
  ego.speed = config.ego_speed;

  const std::size_t n_frames = frame_count(config.duration, config.dt);
  sc.frames.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    WorldFrame f;
    f.index = static_cast<int>(k);
    f.time = static_cast<double>(k) * config.dt;
    f.agents = agents;
    f.ego = ego;
    f.ego_pose = core::Pose::from_yaw(ego.heading, ego.position.x(), ego.position.y());
    f.road = sc.road;
    sc.frames.push_back(std::move(f));

    for (auto& a : agents) a = advance(a, config.dt);
    ego = step_ego(ego, script, config.dt);
  }
  return sc;
}

void rasterize_boxes(const std::vector<core::BevBox>& boxes, core::MaskGrid& mask) {
  const auto& g = mask.spec();
  for (const auto& box : boxes) {
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const auto& c : box.corners()) {
      lo_x = std::min(lo_x, c.x());
      hi_x = std::max(hi_x, c.x());
      lo_y = std::min(lo_y, c.y());
      hi_y = std::max(hi_y, c.y());
    }
    const int c0 = std::max(0, static_cast<int>(std::floor((lo_x - g.x_min) / g.resolution)));
    const int c1 = std::min(g.width - 1, static_cast<int>(std::floor((hi_x - g.x_min) / g.resolution)));
    const int r0 = std::max(0, static_cast<int>(std::floor((lo_y - g.y_min) / g.resolution)));
    const int r1 = std::min(g.height - 1, static_cast<int>(std::floor((hi_y - g.y_min) / g.resolution)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (box.contains(g.cell_to_center({r, c}))) mask.at({r, c}) = 1;
      }
    }
  }
}

core::MaskGrid rasterize_agents(const WorldFrame& frame, const core::GridSpec& grid,
                                const core::Pose& world_from_grid) {
  core::MaskGrid mask(grid, 0);
  const core::Pose grid_from_world = core::invert(world_from_grid);
  const double yaw = grid_from_world.yaw();
  std::vector<core::BevBox> boxes;
  boxes.reserve(frame.agents.size());
  for (const auto& a : frame.agents) {
    const core::Vec3 p = core::transform_point(grid_from_world, core::Vec3(a.position.x(), a.position.y(), 0.0));
    boxes.push_back({p.head<2>(), a.box_size.length, a.box_size.width, a.heading + yaw});
  }
  rasterize_boxes(boxes, mask);
  return mask;
}

bool frames_equal(const WorldFrame& a, const WorldFrame& b) {
  const bool same_road = a.road == b.road || (a.road && b.road && *a.road == *b.road);
  return a.index == b.index && a.time == b.time && a.agents == b.agents && a.ego == b.ego &&
         a.ego_pose == b.ego_pose && same_road;
}

bool scenarios_equal(const Scenario& a, const Scenario& b) {
  if (!(a.config == b.config) || a.frames.size() != b.frames.size()) return false;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (!frames_equal(a.frames[i], b.frames[i])) return false;
  }
  return true;
}

}  // namespace coopsim::scenario

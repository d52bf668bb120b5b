#pragma once

#include <optional>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"

namespace coopsim::planner {

struct Waypoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  core::Vec2 xy() const { return {x, y}; }
  bool operator==(const Waypoint&) const = default;
};

// Ego-frame waypoints at a fixed step, starting at the origin at t = 0.
struct Trajectory {
  std::vector<Waypoint> waypoints;
  double dt = 0.5;

  // Position at time t; t must land on a waypoint (within 1e-9).
  // Throws std::out_of_range otherwise.
  core::Vec2 position_at(double t) const;
  bool is_valid() const;
  bool operator==(const Trajectory&) const = default;
};

struct CostWeights {
  double collision = 1000.0;
  double offroad = 10.0;
  double smooth = 1.0;
  bool operator==(const CostWeights&) const = default;
};

struct PlannerConfig {
  double horizon = 4.5;
  double dt = 0.5;
  int n_per_command = 5;
  double max_left_curvature = 0.1;   // 1/m
  double max_right_curvature = 0.2;  // 1/m, magnitude
  double max_forward_curvature = 0.02;
  std::vector<double> speed_factors = {1.0, 0.8, 1.2, 0.6};
  CostWeights weights;
  double snap_radius = 1.0;
  double ego_length = 4.6;
  double ego_width = 1.8;
  // Highest ego speed the safety bound is checked for.
  double max_speed = 12.0;

  int steps() const;  // waypoints including the origin
  bool is_valid() const;
  bool operator==(const PlannerConfig&) const = default;
};

// Drivable area seen from the ego: a mask on its own grid plus the pose
// taking ego coordinates into that grid's frame. Cells outside the grid
// are not drivable.
struct DrivableView {
  const core::MaskGrid* mask = nullptr;
  core::Pose grid_from_ego;

  bool is_drivable(const core::Vec2& ego_xy) const;
};

core::BevBox ego_footprint(const Waypoint& w, const PlannerConfig& cfg);

// True when any set cell of `mask` has its center inside `box`.
bool box_hits_mask(const core::BevBox& box, const core::MaskGrid& mask);

// One mask per step k = 0..steps-1: agent footprints moved by
// velocity * k * dt, united with threshold(p0 + k*dt*p1, theta) when an
// occupancy map is given.
std::vector<core::MaskGrid> forecast_agents(const std::vector<core::AgentQuery>& agents, double horizon, double dt,
                                            const core::GridSpec& grid,
                                            const core::OccupancyMessage* occupancy = nullptr, double theta = 0.5);

// Constant-curvature arcs: n_per_command curvatures for the command, each
// at every speed factor. Curvature-major order.
std::vector<Trajectory> generate_candidates(double ego_speed, core::Command command, const PlannerConfig& cfg);

struct CostBreakdown {
  int collisions = 0;
  int offroad = 0;
  double smoothness = 0.0;
  double total = 0.0;
};

// Collision and off-road counts run over waypoints 1..N (the origin is
// where the ego already is); smoothness sums squared second differences.
CostBreakdown trajectory_cost(const Trajectory& traj, const std::vector<core::MaskGrid>& step_masks,
                              const DrivableView& road, const CostWeights& weights, const PlannerConfig& cfg);

double smoothness(const Trajectory& traj);

// Off-road waypoints move to the nearest drivable cell center within
// snap_radius; the rest are untouched.
Trajectory adjust_to_road(const Trajectory& traj, const DrivableView& road, double snap_radius);

// Largest off-road plus smoothness cost any candidate can reach at speeds
// up to cfg.max_speed. The planner requires it to stay below one collision.
double max_non_collision_cost(const PlannerConfig& cfg);
bool safety_bound_holds(const PlannerConfig& cfg);

struct PlanResult {
  Trajectory trajectory;
  int candidate_index = -1;
  CostBreakdown cost;
};

class Planner {
 public:
  // Throws std::invalid_argument on an invalid config or a violated safety bound.
  explicit Planner(PlannerConfig cfg = {});

  // Argmin of the cost over the candidates, lowest index on ties, then
  // adjust_to_road. Throws std::invalid_argument if ego_speed exceeds max_speed.
  PlanResult plan(const std::vector<core::MaskGrid>& step_masks, const DrivableView& road, core::Command command,
                  double ego_speed) const;

  const PlannerConfig& config() const { return cfg_; }

 private:
  PlannerConfig cfg_;
};

}  // namespace coopsim::planner

#include "coopsim/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coopsim/simd/kernels.hpp"

namespace coopsim::planner {

core::Vec2 Trajectory::position_at(double t) const {
  if (dt > 0.0) {
    const double k = std::round(t / dt);
    if (std::abs(k * dt - t) <= 1e-9 && k >= 0 && k < static_cast<double>(waypoints.size())) {
      return waypoints[static_cast<std::size_t>(k)].xy();
    }
  }
  throw std::out_of_range("trajectory has no waypoint at t = " + std::to_string(t));
}

bool Trajectory::is_valid() const {
  if (waypoints.empty() || !(dt > 0.0)) return false;
  if (waypoints.front().x != 0.0 || waypoints.front().y != 0.0 || waypoints.front().t != 0.0) return false;
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    if (std::abs(waypoints[k].t - waypoints[k - 1].t - dt) > 1e-9) return false;
  }
  return true;
}

int PlannerConfig::steps() const { return static_cast<int>(std::floor(horizon / dt + 1e-9)) + 1; }

bool PlannerConfig::is_valid() const {
  return dt > 0.0 && horizon >= dt && n_per_command >= 1 && !speed_factors.empty() && max_left_curvature > 0.0 &&
         max_right_curvature > 0.0 && max_forward_curvature >= 0.0 && snap_radius >= 0.0 && ego_length > 0.0 &&
         ego_width > 0.0 && max_speed >= 0.0 &&
         std::all_of(speed_factors.begin(), speed_factors.end(), [](double f) { return f >= 0.0; });
}

bool DrivableView::is_drivable(const core::Vec2& ego_xy) const {
  if (mask == nullptr) return true;
  const core::Vec3 p = core::transform_point(grid_from_ego, core::Vec3(ego_xy.x(), ego_xy.y(), 0.0));
  const auto cell = mask->spec().world_to_cell(p.head<2>());
  return cell && mask->at(*cell) != 0;
}

core::BevBox ego_footprint(const Waypoint& w, const PlannerConfig& cfg) {
  return {w.xy(), cfg.ego_length, cfg.ego_width, w.heading};
}

namespace {

struct CellRange {
  int r0, r1, c0, c1;
};

CellRange box_cells(const core::BevBox& box, const core::GridSpec& g) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& c : box.corners()) {
    x0 = std::min(x0, c.x());
    x1 = std::max(x1, c.x());
    y0 = std::min(y0, c.y());
    y1 = std::max(y1, c.y());
  }
  const auto lo = [](double v) { return static_cast<int>(std::floor(v)); };
  return {std::max(0, lo((y0 - g.y_min) / g.resolution)), std::min(g.height - 1, lo((y1 - g.y_min) / g.resolution)),
          std::max(0, lo((x0 - g.x_min) / g.resolution)), std::min(g.width - 1, lo((x1 - g.x_min) / g.resolution))};
}

void rasterize_box(const core::BevBox& box, core::MaskGrid& mask) {
  const auto& g = mask.spec();
  const CellRange r = box_cells(box, g);
  for (int row = r.r0; row <= r.r1; ++row) {
    for (int col = r.c0; col <= r.c1; ++col) {
      if (box.contains(g.cell_to_center({row, col}))) mask.at({row, col}) = 1;
    }
  }
}

}  // namespace

bool box_hits_mask(const core::BevBox& box, const core::MaskGrid& mask) {
  const auto& g = mask.spec();
  const CellRange r = box_cells(box, g);
  for (int row = r.r0; row <= r.r1; ++row) {
    for (int col = r.c0; col <= r.c1; ++col) {
      if (mask.at({row, col}) != 0 && box.contains(g.cell_to_center({row, col}))) return true;
    }
  }
  return false;
}

std::vector<core::MaskGrid> forecast_agents(const std::vector<core::AgentQuery>& agents, double horizon, double dt,
                                            const core::GridSpec& grid, const core::OccupancyMessage* occupancy,
                                            double theta) {
  if (!(dt > 0.0) || horizon < 0.0) throw std::invalid_argument("forecast_agents: need dt > 0, horizon >= 0");
  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9)) + 1;
  std::vector<core::MaskGrid> masks;
  masks.reserve(steps);
  core::ProbGrid extrapolated(grid, 0.0f);
  core::MaskGrid occ(grid, 0);
  for (int k = 0; k < steps; ++k) {
    core::MaskGrid m(grid, 0);
    const double tk = k * dt;
    for (const auto& q : agents) {
      const core::Vec2 c = q.ref_point.head<2>() + tk * q.velocity;
      rasterize_box({c, q.box_size.length, q.box_size.width, q.heading}, m);
    }
    if (occupancy != nullptr) {
      if (!(occupancy->grid() == grid)) throw std::invalid_argument("forecast_agents: occupancy grid mismatch");
      simd::extrapolate_clamped(occupancy->p0.values(), occupancy->p1.values(), static_cast<float>(tk),
                                extrapolated.values());
      simd::threshold(extrapolated.values(), static_cast<float>(theta), occ.values());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] |= occ[i];
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

namespace {

std::vector<double> curvatures(core::Command command, const PlannerConfig& cfg) {
  const int n = cfg.n_per_command;
  std::vector<double> out;
  out.reserve(n);
  for (int j = 0; j < n; ++j) {
    switch (command) {
      case core::Command::TurnLeft: out.push_back(cfg.max_left_curvature * (j + 1) / n); break;
      case core::Command::TurnRight: out.push_back(-cfg.max_right_curvature * (j + 1) / n); break;
      case core::Command::KeepForward: {
        // 0, +k1, -k1, +k2, -k2, ... up to max_forward_curvature.
        const int levels = n / 2;
        const int m = (j + 1) / 2;
        const double mag = levels > 0 ? cfg.max_forward_curvature * m / levels : 0.0;
        out.push_back(j % 2 == 1 ? mag : -mag);
        break;
      }
    }
  }
  return out;
}

Trajectory arc(double kappa, double speed, const PlannerConfig& cfg) {
  Trajectory t;
  t.dt = cfg.dt;
  const int steps = cfg.steps();
  t.waypoints.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    const double s = speed * k * cfg.dt;
    Waypoint w;
    w.t = k * cfg.dt;
    if (kappa == 0.0) {
      w.x = s;
    } else {
      w.x = std::sin(kappa * s) / kappa;
      w.y = (1.0 - std::cos(kappa * s)) / kappa;
      w.heading = kappa * s;
    }
    t.waypoints.push_back(w);
  }
  return t;
}

}  // namespace

std::vector<Trajectory> generate_candidates(double ego_speed, core::Command command, const PlannerConfig& cfg) {
  if (!cfg.is_valid()) throw std::invalid_argument("invalid PlannerConfig");
  std::vector<Trajectory> out;
  for (double kappa : curvatures(command, cfg)) {
    for (double f : cfg.speed_factors) out.push_back(arc(kappa, f * ego_speed, cfg));
  }
  return out;
}

double smoothness(const Trajectory& traj) {
  double sum = 0.0;
  const auto& w = traj.waypoints;
  for (std::size_t k = 2; k < w.size(); ++k) {
    sum += (w[k].xy() - 2.0 * w[k - 1].xy() + w[k - 2].xy()).squaredNorm();
  }
  return sum;
}

CostBreakdown trajectory_cost(const Trajectory& traj, const std::vector<core::MaskGrid>& step_masks,
                              const DrivableView& road, const CostWeights& weights, const PlannerConfig& cfg) {
  CostBreakdown c;
  for (std::size_t k = 1; k < traj.waypoints.size(); ++k) {
    const Waypoint& w = traj.waypoints[k];
    if (k < step_masks.size() && box_hits_mask(ego_footprint(w, cfg), step_masks[k])) ++c.collisions;
    if (!road.is_drivable(w.xy())) ++c.offroad;
  }
  c.smoothness = smoothness(traj);
  c.total = weights.collision * c.collisions + weights.offroad * c.offroad + weights.smooth * c.smoothness;
  return c;
}

Trajectory adjust_to_road(const Trajectory& traj, const DrivableView& road, double snap_radius) {
  Trajectory out = traj;
  if (road.mask == nullptr) return out;
  const auto& g = road.mask->spec();
  const core::Pose ego_from_grid = core::invert(road.grid_from_ego);
  for (std::size_t k = 1; k < out.waypoints.size(); ++k) {
    Waypoint& w = out.waypoints[k];
    if (road.is_drivable(w.xy())) continue;
    const core::Vec2 p = core::transform_point(road.grid_from_ego, core::Vec3(w.x, w.y, 0.0)).head<2>();
    const int c0 = std::max(0, static_cast<int>(std::floor((p.x() - snap_radius - g.x_min) / g.resolution)));
    const int c1 = std::min(g.width - 1, static_cast<int>(std::floor((p.x() + snap_radius - g.x_min) / g.resolution)));
    const int r0 = std::max(0, static_cast<int>(std::floor((p.y() - snap_radius - g.y_min) / g.resolution)));
    const int r1 = std::min(g.height - 1, static_cast<int>(std::floor((p.y() + snap_radius - g.y_min) / g.resolution)));
    double best = std::numeric_limits<double>::infinity();
    std::optional<core::Vec2> target;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (road.mask->at({r, c}) == 0) continue;
        const core::Vec2 center = g.cell_to_center({r, c});
        const double d = (center - p).norm();
        if (d <= snap_radius && d < best) {
          best = d;
          target = center;
        }
      }
    }
    if (target) {
      const core::Vec3 q = core::transform_point(ego_from_grid, core::Vec3(target->x(), target->y(), 0.0));
      w.x = q.x();
      w.y = q.y();
    }
  }
  return out;
}

double max_non_collision_cost(const PlannerConfig& cfg) {
  double worst_smooth = 0.0;
  for (auto cmd : {core::Command::TurnLeft, core::Command::KeepForward, core::Command::TurnRight}) {
    for (const auto& t : generate_candidates(cfg.max_speed, cmd, cfg)) worst_smooth = std::max(worst_smooth, smoothness(t));
  }
  return cfg.weights.offroad * (cfg.steps() - 1) + cfg.weights.smooth * worst_smooth;
}

bool safety_bound_holds(const PlannerConfig& cfg) { return max_non_collision_cost(cfg) < cfg.weights.collision; }

Planner::Planner(PlannerConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.is_valid()) throw std::invalid_argument("invalid PlannerConfig");
  if (!safety_bound_holds(cfg_)) {
    throw std::invalid_argument("planner weights: collision weight must exceed every other cost term combined");
  }
}

PlanResult Planner::plan(const std::vector<core::MaskGrid>& step_masks, const DrivableView& road,
                         core::Command command, double ego_speed) const {
  if (ego_speed > cfg_.max_speed) throw std::invalid_argument("ego speed above the planner's max_speed");
  const auto candidates = generate_candidates(ego_speed, command, cfg_);
  PlanResult best;
  best.cost.total = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const CostBreakdown c = trajectory_cost(candidates[i], step_masks, road, cfg_.weights, cfg_);
    if (c.total < best.cost.total) {
      best.cost = c;
      best.candidate_index = static_cast<int>(i);
    }
  }
  best.trajectory = adjust_to_road(candidates[best.candidate_index], road, cfg_.snap_radius);
  return best;
}

}  // namespace coopsim::planner

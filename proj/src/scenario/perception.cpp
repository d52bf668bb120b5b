#include "coopsim/scenario/perception.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coopsim/simd/kernels.hpp"

namespace coopsim::scenario {

bool SensorSpec::is_valid() const {
  return fov_rect.is_ordered() && lane_fov_rect.is_ordered() && pos_noise_sigma >= 0.0 &&
         heading_noise_sigma >= 0.0 && miss_prob >= 0.0 && miss_prob <= 1.0 && false_pos_rate >= 0.0 &&
         grid.is_valid() && feature_dim > 0 && feature_dim % 2 == 0 && mount_pose.is_valid();
}

SensorSpec default_ego_sensor() {
  SensorSpec s;
  s.view_id = 0;
  s.track_id_prefix = kEgoViewPrefix;
  s.attached_to_ego = true;
  s.lane_fov_rect = {-30.0, 30.0, -30.0, 30.0};
  return s;
}

SensorSpec default_infra_sensor() {
  SensorSpec s;
  s.view_id = 1;
  s.track_id_prefix = kInfraViewPrefix;
  s.attached_to_ego = false;
  s.mount_pose = core::Pose::from_yaw(0.0, -20.0, -9.0);
  s.fov_rect = {0.0, 100.0, -50.0, 50.0};
  s.lane_fov_rect = s.fov_rect;
  s.grid = core::GridSpec::infra_default();
  s.pos_noise_sigma = 0.15;
  s.occlusion_aware = false;
  return s;
}

SensorSpec noiseless(SensorSpec s) {
  s.pos_noise_sigma = 0.0;
  s.heading_noise_sigma = 0.0;
  s.miss_prob = 0.0;
  s.false_pos_rate = 0.0;
  return s;
}

core::Pose world_from_sensor(const WorldFrame& frame, const SensorSpec& sensor) {
  return sensor.attached_to_ego ? core::compose(frame.ego_pose, sensor.mount_pose) : sensor.mount_pose;
}

RngStream perception_stream(std::uint64_t seed, int view_id, int frame_index) {
  return RngStream(seed, StreamPurpose::Perception,
                   {static_cast<std::uint64_t>(view_id), static_cast<std::uint64_t>(frame_index)});
}

int embedding_key(core::AgentClass c) { return static_cast<int>(c); }
int embedding_key(core::LaneClass c) { return kLaneEmbeddingKeyBase + static_cast<int>(c); }

std::vector<double> deterministic_embedding(int key, double heading, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("embedding dimension must be positive and even");
  RngStream rng(static_cast<std::uint64_t>(key), StreamPurpose::Embedding, {static_cast<std::uint64_t>(dim)});
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  if (heading != 0.0) simd::rotate_pairs(std::cos(heading), std::sin(heading), v);
  return v;
}

core::ProbGrid blur_occupancy(const core::MaskGrid& mask) {
  const auto& g = mask.spec();
  core::ProbGrid out(g, 0.0f);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      float acc = 0.0f;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= g.height || cc >= g.width || !mask.at({rr, cc})) continue;
          acc += (dr == 0 && dc == 0) ? 1.0f : 0.25f;
        }
      }
      out.at({r, c}) = std::min(acc, 1.0f);
    }
  }
  return out;
}

std::vector<std::vector<core::Vec2>> clip_polyline(std::span<const core::Vec2> points, const core::Rect& rect) {
  std::vector<std::vector<core::Vec2>> runs;
  std::vector<core::Vec2> cur;
  for (const auto& p : points) {
    if (rect.contains(p)) {
      cur.push_back(p);
    } else {
      if (cur.size() >= 2) runs.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (cur.size() >= 2) runs.push_back(std::move(cur));
  return runs;
}

namespace {

bool occluded(const WorldFrame& frame, const core::Vec2& from, const core::Vec2& to) {
  return std::any_of(frame.road->occluders.begin(), frame.road->occluders.end(),
                     [&](const core::Rect& r) { return core::segment_intersects_rect(from, to, r); });
}

}  // namespace

PerceivedFrame perceive(const WorldFrame& frame, const SensorSpec& sensor, RngStream& rng) {
  if (!sensor.is_valid()) throw std::invalid_argument("invalid SensorSpec");
  const core::Pose w_from_s = world_from_sensor(frame, sensor);
  const core::Pose s_from_w = core::invert(w_from_s);
  const double yaw = s_from_w.yaw();
  const core::Vec2 sensor_xy = w_from_s.translation.head<2>();

  PerceivedFrame out;
  out.timestamp = frame.time;
  const int dim = sensor.feature_dim;

  std::vector<AgentState> candidates = frame.agents;
  // Roadside sensors also see the ego vehicle.
  if (!sensor.attached_to_ego) candidates.push_back(frame.ego);
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  std::vector<core::BevBox> detected_boxes;
  for (const auto& a : candidates) {
    const double u_miss = rng.uniform();
    const double nx = rng.normal();
    const double ny = rng.normal();
    const double nh = rng.normal();

    const core::Vec3 p = core::transform_point(s_from_w, core::Vec3(a.position.x(), a.position.y(), 0.0));
    if (!sensor.fov_rect.contains(p.head<2>())) continue;
    if (sensor.occlusion_aware && occluded(frame, sensor_xy, a.position)) continue;
    if (u_miss < sensor.miss_prob) continue;

    core::AgentQuery q;
    q.ref_point = core::Vec3(p.x() + sensor.pos_noise_sigma * nx, p.y() + sensor.pos_noise_sigma * ny, 0.0);
    if (!sensor.fov_rect.contains(q.ref_point.head<2>())) continue;
    q.heading = core::wrap_angle(a.heading + yaw + sensor.heading_noise_sigma * nh);
    q.velocity = a.speed * core::Vec2(std::cos(q.heading), std::sin(q.heading));
    q.flow_ref = core::Vec2::Zero();
    q.feature = deterministic_embedding(embedding_key(a.agent_class), q.heading, dim);
    q.flow_feature.assign(dim, 0.0);
    q.track_id = sensor.track_id_prefix + a.id;
    q.confidence = std::clamp(sensor.conf_base - sensor.conf_decay * p.head<2>().norm(), 0.0, 1.0);
    q.box_size = a.box_size;
    q.agent_class = a.agent_class;
    q.timestamp = frame.time;
    detected_boxes.push_back({q.ref_point.head<2>(), q.box_size.length, q.box_size.width, q.heading});
    out.agent_queries.push_back(std::move(q));
  }

  const std::uint32_t n_false = rng.poisson(sensor.false_pos_rate);
  for (std::uint32_t j = 0; j < n_false; ++j) {
    const auto& fov = sensor.fov_rect;
    core::AgentQuery q;
    q.ref_point = core::Vec3(rng.uniform(fov.x_min, fov.x_max), rng.uniform(fov.y_min, fov.y_max), 0.0);
    q.agent_class = core::kAgentClasses[rng.below(core::kAgentClasses.size())];
    q.heading = core::wrap_angle(rng.uniform(-3.14159, 3.14159));
    q.confidence = rng.uniform(0.05, 0.4);
    q.box_size = default_box(q.agent_class);
    q.velocity = core::Vec2::Zero();
    q.feature = deterministic_embedding(embedding_key(q.agent_class), q.heading, dim);
    q.flow_feature.assign(dim, 0.0);
    q.track_id = -(sensor.track_id_prefix + frame.index * 100 + static_cast<std::int32_t>(j) + 1);
    q.timestamp = frame.time;
    detected_boxes.push_back({q.ref_point.head<2>(), q.box_size.length, q.box_size.width, q.heading});
    out.agent_queries.push_back(std::move(q));
  }

  for (const auto& lane : frame.lanes()) {
    std::vector<core::Vec2> local;
    local.reserve(lane.points.size());
    for (const auto& w : lane.points) {
      local.push_back(core::transform_point(s_from_w, core::Vec3(w.x(), w.y(), 0.0)).head<2>());
    }
    for (auto& run : clip_polyline(local, sensor.lane_fov_rect)) {
      core::LaneQuery lq;
      const core::Vec2 d = run.back() - run.front();
      lq.feature = deterministic_embedding(embedding_key(lane.lane_class), std::atan2(d.y(), d.x()), dim);
      lq.points = std::move(run);
      lq.lane_class = lane.lane_class;
      lq.confidence = 1.0;
      out.lane_queries.push_back(std::move(lq));
    }
  }

  core::MaskGrid mask(sensor.grid, 0);
  rasterize_boxes(detected_boxes, mask);
  out.occupancy = core::OccupancyMessage(sensor.grid, frame.time);
  out.occupancy.p0 = blur_occupancy(mask);
  return out;
}

}  // namespace coopsim::scenario

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"
#include "coopsim/scenario/rng.hpp"
#include "coopsim/scenario/scenario.hpp"

namespace coopsim::scenario {

// Track-id namespaces. Oracle perception reuses ground-truth agent ids
// offset by the view prefix, so two views never share an id.
inline constexpr std::int32_t kEgoViewPrefix = 1'000'000;
inline constexpr std::int32_t kInfraViewPrefix = 2'000'000;

struct SensorSpec {
  int view_id = 0;
  std::int32_t track_id_prefix = kEgoViewPrefix;
  // Mount pose. For ego sensors it is ego_from_sensor, otherwise world_from_sensor.
  core::Pose mount_pose;
  bool attached_to_ego = true;
  core::Rect fov_rect{-50.0, 50.0, -50.0, 50.0};
  core::Rect lane_fov_rect{-50.0, 50.0, -50.0, 50.0};
  core::GridSpec grid = core::GridSpec::ego_default();
  double pos_noise_sigma = 0.1;
  double heading_noise_sigma = 0.02;
  double miss_prob = 0.02;
  double false_pos_rate = 0.3;
  double conf_base = 0.95;
  double conf_decay = 0.005;  // per meter from the sensor
  // Line of sight blocked by the layout's occluders.
  bool occlusion_aware = true;
  int feature_dim = core::kDefaultFeatureDim;

  bool is_valid() const;
};

// The ego vehicle's camera rig: sees [-50,50]^2 around the ego, maps lanes
// within 30 m, occluded by buildings.
SensorSpec default_ego_sensor();
// Pole-mounted roadside camera looking east from (-20, -9), 100 m x 100 m.
SensorSpec default_infra_sensor();

// Same sensor with every noise source switched off.
SensorSpec noiseless(SensorSpec s);

core::Pose world_from_sensor(const WorldFrame& frame, const SensorSpec& sensor);

struct PerceivedFrame {
  std::vector<core::AgentQuery> agent_queries;
  std::vector<core::LaneQuery> lane_queries;
  core::OccupancyMessage occupancy;
  double timestamp = 0.0;

  bool operator==(const PerceivedFrame&) const = default;
};

// Oracle stand-in for the detection, mapping and occupancy heads. All
// output is in the sensor frame. Draws from `rng` in a fixed pattern per
// agent so visibility changes do not shift later draws.
PerceivedFrame perceive(const WorldFrame& frame, const SensorSpec& sensor, RngStream& rng);

// The stream perceive() uses for (seed, view, frame index).
RngStream perception_stream(std::uint64_t seed, int view_id, int frame_index);

// Embedding keys for lane classes, kept apart from agent class ids.
inline constexpr int kLaneEmbeddingKeyBase = 16;
int embedding_key(core::AgentClass c);
int embedding_key(core::LaneClass c);

// Unit-norm pseudo-random base vector for `key`, with every pair
// (2k, 2k+1) rotated in-plane by `heading`. dim must be even.
std::vector<double> deterministic_embedding(int key, double heading, int dim = core::kDefaultFeatureDim);

// 3x3 blur with weight 1 at the center and 0.25 on the ring, clamped to [0,1].
core::ProbGrid blur_occupancy(const core::MaskGrid& mask);

// Splits a polyline into maximal runs of consecutive points inside `rect`.
std::vector<std::vector<core::Vec2>> clip_polyline(std::span<const core::Vec2> points, const core::Rect& rect);

}  // namespace coopsim::scenario

#pragma once

#include <optional>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"
#include "coopsim/fusion/fusion.hpp"
#include "coopsim/infra/infra_node.hpp"
#include "coopsim/scenario/perception.hpp"

namespace coopsim::fusion {

// Everything the planner and the metrics read after one fusion tick, in the
// ego frame at time `timestamp`.
struct FusedScene {
  double timestamp = 0.0;
  std::vector<core::AgentQuery> agents;
  std::vector<core::LaneQuery> lanes;
  core::OccupancyMessage occupancy;  // fused p0 and the p1 of whichever side won each cell
  core::OccupiedMask mask;
  // Infrastructure agents after temporal and spatial sync, before matching.
  std::vector<core::AgentQuery> synced_infra;

  bool operator==(const FusedScene&) const = default;
};

// The receiving vehicle. Holds the previous ego occupancy for its own flow
// estimate and the id allocator for infrastructure-only tracks.
class EgoFusion {
 public:
  explicit EgoFusion(FusionConfig cfg = {});

  // `ego` is the ego's own perception at t_v = ego.timestamp in the ego
  // frame; `world_from_ego` its pose. With no payload the same steps run on
  // empty infrastructure inputs.
  FusedScene step(const scenario::PerceivedFrame& ego, const core::Pose& world_from_ego,
                  const std::optional<infra::V2XPayload>& payload);

  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  TrackIdAllocator ids_;
  std::optional<core::ProbGrid> prev_p0_;
  core::Pose prev_world_from_ego_;
  double prev_time_ = 0.0;
};

}  // namespace coopsim::fusion

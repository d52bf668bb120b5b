#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"

namespace coopsim::fusion {

struct EgoRect {
  double length = 4.6;
  double width = 1.8;
  double margin = 0.5;
  bool contains(const core::Vec2& p) const {
    return std::abs(p.x()) <= 0.5 * length + margin && std::abs(p.y()) <= 0.5 * width + margin;
  }
  bool operator==(const EgoRect&) const = default;
};

struct FusionConfig {
  double gate_distance = 2.0;
  double conf_keep_threshold = 0.3;
  double occ_threshold = 0.5;
  EgoRect ego_rect;
  double unmatched_conf_decay = 0.8;
  // Apply query/occupancy flow to bridge t_v - t_i. Off reproduces a
  // receiver that fuses stale infrastructure data as-is.
  bool flow_compensation = true;
  double lane_dedup_distance = 0.5;

  bool is_valid() const;
  bool operator==(const FusionConfig&) const = default;
};

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (infra index, ego index)
  std::vector<int> unmatched_infra;
  std::vector<int> unmatched_ego;
};

// Hungarian matching on xy reference-point distance; pairs farther apart
// than `gate` are forbidden inside the cost matrix.
MatchResult match_queries(const std::vector<core::AgentQuery>& infra, const std::vector<core::AgentQuery>& ego,
                          double gate);

// Confidence-weighted merge of a matched pair. Keeps the ego track id.
core::AgentQuery fuse_matched(const core::AgentQuery& infra_q, const core::AgentQuery& ego_q,
                              const FusionConfig& cfg);

// Hands out ego-namespace track ids for infrastructure-only tracks, stable
// across frames for the same infrastructure id.
class TrackIdAllocator {
 public:
  static constexpr std::int32_t kFirstId = 3'000'000;
  std::int32_t id_for(std::int32_t infra_track_id);
  bool operator==(const TrackIdAllocator&) const = default;

 private:
  std::map<std::int32_t, std::int32_t> ids_;
  std::int32_t next_ = kFirstId;
};

// Matched pairs fused, unmatched ego kept, unmatched infra appended with
// fresh ids and decayed confidence, then the conf_keep_threshold filter.
// Order: ego-side queries by ascending track id, then appended infra
// queries in input order.
std::vector<core::AgentQuery> fuse_agents(const std::vector<core::AgentQuery>& synced_infra,
                                          const std::vector<core::AgentQuery>& ego_queries, const FusionConfig& cfg,
                                          TrackIdAllocator& ids);

// Drops queries inside the ego rectangle and zeroes the grid cells whose
// centers fall inside it. Inputs are in the ego frame.
void ego_filter(std::vector<core::AgentQuery>& queries, core::ProbGrid& grid, const EgoRect& rect);

// Mean distance from each point of `a` to the polyline `b`.
double mean_polyline_distance(const std::vector<core::Vec2>& a, const std::vector<core::Vec2>& b);

// Ego lanes first, then infrastructure lanes not already covered by a
// same-class ego lane (mean distance < dedup_distance).
std::vector<core::LaneQuery> fuse_lanes(const std::vector<core::LaneQuery>& synced_infra_lanes,
                                        const std::vector<core::LaneQuery>& ego_lanes, double dedup_distance = 0.5);

// Resamples `src` (laid out on its own spec, in the source frame) onto
// `dst` (target frame) with bilinear interpolation. Points outside the
// source extent read 0; inside, samples clamp to the edge cells.
core::ProbGrid warp_grid(const core::ProbGrid& src, const core::Pose& target_from_source, const core::GridSpec& dst);
// warp_grid with the result clamped to [0, 1].
core::ProbGrid warp_occupancy(const core::ProbGrid& src, const core::Pose& target_from_source,
                              const core::GridSpec& dst);

core::OccupiedMask threshold_mask(const core::ProbGrid& grid, double theta);

// fused = max(a, b) cellwise, mask = fused >= theta. Throws on shape mismatch.
std::pair<core::ProbGrid, core::OccupiedMask> fuse_occupancy(const core::ProbGrid& a, const core::ProbGrid& b,
                                                             double theta);

}  // namespace coopsim::fusion

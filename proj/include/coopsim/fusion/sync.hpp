#pragma once

#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"

namespace coopsim::fusion {

// Linear latency compensation of agent queries:
//   ref_point.xy += dt * flow_ref, feature += dt * flow_feature,
// with dt = t_v - timestamp. Throws std::invalid_argument if t_v precedes a
// query's timestamp.
std::vector<core::AgentQuery> temporal_sync_queries(const std::vector<core::AgentQuery>& queries, double t_v);

// Restamps queries to t_v without moving them (no flow compensation).
std::vector<core::AgentQuery> restamp_queries(const std::vector<core::AgentQuery>& queries, double t_v);

// clamp(p0 + (t - timestamp) * p1, 0, 1) per cell.
core::ProbGrid temporal_sync_occupancy(const core::OccupancyMessage& msg, double t);

// Moves queries into the target frame: reference point through the full
// pose; heading, velocity, flow_ref and every feature pair (2k, 2k+1)
// rotated by the pose's yaw. The feature rotation is the same group action
// the oracle embedding uses for heading, so it composes exactly.
std::vector<core::AgentQuery> spatial_sync_queries(const std::vector<core::AgentQuery>& queries,
                                                   const core::Pose& target_from_source);

std::vector<core::LaneQuery> spatial_sync_lanes(const std::vector<core::LaneQuery>& lanes,
                                                const core::Pose& target_from_source);

}  // namespace coopsim::fusion

#include "coopsim/fusion/pipeline.hpp"

#include <stdexcept>

#include "coopsim/fusion/sync.hpp"
#include "coopsim/simd/kernels.hpp"

namespace coopsim::fusion {

EgoFusion::EgoFusion(FusionConfig cfg) : cfg_(cfg) {
  if (!cfg_.is_valid()) throw std::invalid_argument("invalid FusionConfig");
}

FusedScene EgoFusion::step(const scenario::PerceivedFrame& ego, const core::Pose& world_from_ego,
                           const std::optional<infra::V2XPayload>& payload) {
  const double t_v = ego.timestamp;
  const core::GridSpec& grid = ego.occupancy.grid();

  // Ego occupancy flow: previous map moved into the current ego frame, then
  // differenced. The first tick has no history and gets zero flow.
  core::ProbGrid ego_p1(grid, 0.0f);
  if (prev_p0_ && t_v > prev_time_) {
    const core::Pose now_from_prev = core::relative_pose(world_from_ego, prev_world_from_ego_);
    const core::ProbGrid prev = warp_occupancy(*prev_p0_, now_from_prev, grid);
    simd::finite_difference(prev.values(), ego.occupancy.p0.values(), static_cast<float>(t_v - prev_time_),
                            ego_p1.values());
  }
  prev_p0_ = ego.occupancy.p0;
  prev_world_from_ego_ = world_from_ego;
  prev_time_ = t_v;

  FusedScene out;
  out.timestamp = t_v;

  std::vector<core::LaneQuery> infra_lanes;
  core::ProbGrid infra_p0(grid, 0.0f);
  core::ProbGrid infra_p1(grid, 0.0f);
  if (payload) {
    if (payload->header.timestamp > t_v + 1e-9) throw std::invalid_argument("payload from the future");
    const core::Pose ego_from_infra = core::relative_pose(world_from_ego, payload->header.world_from_sensor);
    const auto timed = cfg_.flow_compensation ? temporal_sync_queries(payload->agent_queries, t_v)
                                              : restamp_queries(payload->agent_queries, t_v);
    out.synced_infra = spatial_sync_queries(timed, ego_from_infra);
    infra_lanes = spatial_sync_lanes(payload->lane_queries, ego_from_infra);
    if (payload->occupancy) {
      const core::OccupancyMessage& occ = *payload->occupancy;
      const core::ProbGrid p0 =
          cfg_.flow_compensation ? temporal_sync_occupancy(occ, t_v) : occ.p0;
      infra_p0 = warp_occupancy(p0, ego_from_infra, grid);
      infra_p1 = warp_grid(occ.p1, ego_from_infra, grid);
    }
  }

  out.agents = fuse_agents(out.synced_infra, ego.agent_queries, cfg_, ids_);
  out.lanes = fuse_lanes(infra_lanes, ego.lane_queries, cfg_.lane_dedup_distance);

  out.occupancy = core::OccupancyMessage(grid, t_v);
  // Ties go to the second operand, i.e. the ego side.
  simd::select_by_max(infra_p0.values(), infra_p1.values(), ego.occupancy.p0.values(), ego_p1.values(),
                      out.occupancy.p0.values(), out.occupancy.p1.values());
  ego_filter(out.agents, out.occupancy.p0, cfg_.ego_rect);
  {
    std::vector<core::AgentQuery> none;
    ego_filter(none, out.occupancy.p1, cfg_.ego_rect);
  }
  out.mask = threshold_mask(out.occupancy.p0, cfg_.occ_threshold);
  return out;
}

}  // namespace coopsim::fusion

#include "coopsim/infra/infra_node.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "coopsim/simd/kernels.hpp"

namespace coopsim::infra {

std::vector<core::AgentQuery> filter_queries(const std::vector<core::AgentQuery>& queries, double conf_threshold) {
  std::vector<core::AgentQuery> out;
  std::copy_if(queries.begin(), queries.end(), std::back_inserter(out),
               [&](const core::AgentQuery& q) { return q.confidence >= conf_threshold; });
  return out;
}

std::vector<core::LaneQuery> filter_lanes(const std::vector<core::LaneQuery>& lanes, double conf_threshold) {
  std::vector<core::LaneQuery> out;
  std::copy_if(lanes.begin(), lanes.end(), std::back_inserter(out),
               [&](const core::LaneQuery& q) { return q.confidence >= conf_threshold; });
  return out;
}

scenario::PerceivedFrame estimate_query_flow(const scenario::PerceivedFrame& prev,
                                             const scenario::PerceivedFrame& curr, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("estimate_query_flow: dt must be positive");
  std::unordered_map<std::int32_t, const core::AgentQuery*> by_id;
  for (const auto& q : prev.agent_queries) by_id.emplace(q.track_id, &q);

  scenario::PerceivedFrame out = curr;
  for (auto& q : out.agent_queries) {
    const auto it = by_id.find(q.track_id);
    q.flow_feature.assign(q.feature.size(), 0.0);
    if (it == by_id.end() || it->second->feature.size() != q.feature.size()) {
      q.flow_ref = q.velocity;
      continue;
    }
    const core::AgentQuery& p = *it->second;
    q.flow_ref = (q.ref_point.head<2>() - p.ref_point.head<2>()) / dt;
    for (std::size_t i = 0; i < q.feature.size(); ++i) q.flow_feature[i] = (q.feature[i] - p.feature[i]) / dt;
  }
  return out;
}

core::ProbGrid estimate_occupancy_flow(const core::ProbGrid& p_prev, const core::ProbGrid& p_curr, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("estimate_occupancy_flow: dt must be positive");
  core::require_same_shape(p_prev, p_curr, "estimate_occupancy_flow");
  core::ProbGrid p1(p_curr.spec(), 0.0f);
  simd::finite_difference(p_prev.values(), p_curr.values(), static_cast<float>(dt), p1.values());
  return p1;
}

V2XPayload build_payload(const scenario::PerceivedFrame& frame, const core::Pose& world_from_sensor,
                         std::uint32_t sender_id, double conf_threshold) {
  V2XPayload p;
  p.header = {sender_id, frame.timestamp, world_from_sensor};
  p.agent_queries = filter_queries(frame.agent_queries, conf_threshold);
  for (auto& q : p.agent_queries) q.timestamp = frame.timestamp;
  p.lane_queries = filter_lanes(frame.lane_queries, conf_threshold);
  core::OccupancyMessage occ = frame.occupancy;
  occ.timestamp = frame.timestamp;
  p.occupancy = std::move(occ);
  p.occupancy_encoding = OccupancyEncoding::Dense;
  return p;
}

std::size_t explicit_forecast_floats(const core::GridSpec& grid, int steps) {
  return static_cast<std::size_t>(std::max(steps, 0)) * grid.cell_count();
}

std::size_t flow_forecast_floats(const core::GridSpec& grid) { return 2 * grid.cell_count(); }

V2XPayload InfraNode::process(const scenario::PerceivedFrame& frame) {
  scenario::PerceivedFrame with_flow = frame;
  if (prev_ && frame.timestamp > prev_->timestamp) {
    const double dt = frame.timestamp - prev_->timestamp;
    with_flow = estimate_query_flow(*prev_, frame, dt);
    with_flow.occupancy.p1 = estimate_occupancy_flow(prev_->occupancy.p0, frame.occupancy.p0, dt);
  } else {
    for (auto& q : with_flow.agent_queries) {
      q.flow_ref = q.velocity;
      q.flow_feature.assign(q.feature.size(), 0.0);
    }
    with_flow.occupancy.p1 = core::ProbGrid(frame.occupancy.grid(), 0.0f);
  }
  prev_ = frame;
  return build_payload(with_flow, world_from_sensor_, sender_id_, conf_threshold_);
}

}  // namespace coopsim::infra

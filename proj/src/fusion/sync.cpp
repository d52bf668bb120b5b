#include "coopsim/fusion/sync.hpp"

#include <cmath>
#include <stdexcept>

#include "coopsim/simd/kernels.hpp"

namespace coopsim::fusion {

std::vector<core::AgentQuery> temporal_sync_queries(const std::vector<core::AgentQuery>& queries, double t_v) {
  std::vector<core::AgentQuery> out = queries;
  for (auto& q : out) {
    const double dt = t_v - q.timestamp;
    if (dt < 0.0) throw std::invalid_argument("temporal_sync_queries: target time precedes query timestamp");
    if (dt > 0.0) {
      q.ref_point.x() += dt * q.flow_ref.x();
      q.ref_point.y() += dt * q.flow_ref.y();
      if (q.flow_feature.size() == q.feature.size()) simd::axpy(dt, q.flow_feature, q.feature);
    }
    q.timestamp = t_v;
  }
  return out;
}

std::vector<core::AgentQuery> restamp_queries(const std::vector<core::AgentQuery>& queries, double t_v) {
  std::vector<core::AgentQuery> out = queries;
  for (auto& q : out) q.timestamp = t_v;
  return out;
}

core::ProbGrid temporal_sync_occupancy(const core::OccupancyMessage& msg, double t) {
  core::require_same_shape(msg.p0, msg.p1, "temporal_sync_occupancy");
  core::ProbGrid out(msg.grid(), 0.0f);
  simd::extrapolate_clamped(msg.p0.values(), msg.p1.values(), static_cast<float>(t - msg.timestamp), out.values());
  return out;
}

namespace {

core::Vec2 rotate(double c, double s, const core::Vec2& v) { return {c * v.x() - s * v.y(), s * v.x() + c * v.y()}; }

}  // namespace

std::vector<core::AgentQuery> spatial_sync_queries(const std::vector<core::AgentQuery>& queries,
                                                   const core::Pose& target_from_source) {
  const double yaw = target_from_source.yaw();
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  std::vector<core::AgentQuery> out = queries;
  for (auto& q : out) {
    q.ref_point = core::transform_point(target_from_source, q.ref_point);
    q.heading = core::wrap_angle(q.heading + yaw);
    q.velocity = rotate(c, s, q.velocity);
    q.flow_ref = rotate(c, s, q.flow_ref);
    if (q.feature.size() % 2 == 0) simd::rotate_pairs(c, s, q.feature);
    if (q.flow_feature.size() % 2 == 0) simd::rotate_pairs(c, s, q.flow_feature);
  }
  return out;
}

std::vector<core::LaneQuery> spatial_sync_lanes(const std::vector<core::LaneQuery>& lanes,
                                                const core::Pose& target_from_source) {
  const double yaw = target_from_source.yaw();
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  std::vector<core::LaneQuery> out = lanes;
  for (auto& l : out) {
    for (auto& p : l.points) p = core::transform_point(target_from_source, core::Vec3(p.x(), p.y(), 0.0)).head<2>();
    if (l.feature.size() % 2 == 0) simd::rotate_pairs(c, s, l.feature);
  }
  return out;
}

}  // namespace coopsim::fusion

#include "coopsim/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coopsim/fusion/hungarian.hpp"
#include "coopsim/simd/kernels.hpp"

namespace coopsim::fusion {

bool FusionConfig::is_valid() const {
  return gate_distance > 0.0 && conf_keep_threshold >= 0.0 && conf_keep_threshold <= 1.0 && occ_threshold >= 0.0 &&
         occ_threshold <= 1.0 && unmatched_conf_decay >= 0.0 && ego_rect.length > 0.0 && ego_rect.width > 0.0 &&
         ego_rect.margin >= 0.0 && lane_dedup_distance >= 0.0;
}

MatchResult match_queries(const std::vector<core::AgentQuery>& infra, const std::vector<core::AgentQuery>& ego,
                          double gate) {
  const int n = static_cast<int>(infra.size());
  const int m = static_cast<int>(ego.size());
  CostMatrix cost(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = (infra[i].ref_point.head<2>() - ego[j].ref_point.head<2>()).norm();
      cost(i, j) = d <= gate ? d : std::numeric_limits<double>::infinity();
    }
  }
  MatchResult r;
  r.pairs = hungarian(cost);
  std::vector<char> infra_used(n, 0), ego_used(m, 0);
  for (const auto& [i, j] : r.pairs) {
    infra_used[i] = 1;
    ego_used[j] = 1;
  }
  for (int i = 0; i < n; ++i)
    if (!infra_used[i]) r.unmatched_infra.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!ego_used[j]) r.unmatched_ego.push_back(j);
  return r;
}

core::AgentQuery fuse_matched(const core::AgentQuery& infra_q, const core::AgentQuery& ego_q,
                              const FusionConfig& /*cfg*/) {
  const double total = infra_q.confidence + ego_q.confidence;
  const double wi = total > 0.0 ? infra_q.confidence / total : 0.5;
  const double we = 1.0 - wi;

  core::AgentQuery out = ego_q;
  out.ref_point = wi * infra_q.ref_point + we * ego_q.ref_point;
  out.velocity = wi * infra_q.velocity + we * ego_q.velocity;
  out.flow_ref = wi * infra_q.flow_ref + we * ego_q.flow_ref;
  if (infra_q.feature.size() == ego_q.feature.size()) {
    simd::blend(wi, infra_q.feature, we, ego_q.feature, out.feature);
  }
  if (infra_q.flow_feature.size() == ego_q.flow_feature.size()) {
    simd::blend(wi, infra_q.flow_feature, we, ego_q.flow_feature, out.flow_feature);
  }
  // Circular mean; identical inputs come back unchanged.
  if (infra_q.heading != ego_q.heading) {
    const double sx = wi * std::cos(infra_q.heading) + we * std::cos(ego_q.heading);
    const double sy = wi * std::sin(infra_q.heading) + we * std::sin(ego_q.heading);
    out.heading = std::atan2(sy, sx);
  }
  out.confidence = std::max(infra_q.confidence, ego_q.confidence);
  out.track_id = ego_q.track_id;
  out.agent_class = infra_q.confidence > ego_q.confidence ? infra_q.agent_class : ego_q.agent_class;
  out.box_size = {wi * infra_q.box_size.length + we * ego_q.box_size.length,
                  wi * infra_q.box_size.width + we * ego_q.box_size.width,
                  wi * infra_q.box_size.height + we * ego_q.box_size.height};
  if (infra_q.box_size == ego_q.box_size) out.box_size = ego_q.box_size;
  return out;
}

std::int32_t TrackIdAllocator::id_for(std::int32_t infra_track_id) {
  const auto [it, inserted] = ids_.try_emplace(infra_track_id, next_);
  if (inserted) ++next_;
  return it->second;
}

std::vector<core::AgentQuery> fuse_agents(const std::vector<core::AgentQuery>& synced_infra,
                                          const std::vector<core::AgentQuery>& ego_queries, const FusionConfig& cfg,
                                          TrackIdAllocator& ids) {
  const MatchResult match = match_queries(synced_infra, ego_queries, cfg.gate_distance);

  std::vector<core::AgentQuery> ego_side = ego_queries;
  for (const auto& [i, j] : match.pairs) ego_side[j] = fuse_matched(synced_infra[i], ego_queries[j], cfg);
  std::stable_sort(ego_side.begin(), ego_side.end(),
                   [](const auto& a, const auto& b) { return a.track_id < b.track_id; });

  std::vector<core::AgentQuery> out;
  out.reserve(ego_side.size() + match.unmatched_infra.size());
  for (auto& q : ego_side) {
    if (q.confidence >= cfg.conf_keep_threshold) out.push_back(std::move(q));
  }
  for (int i : match.unmatched_infra) {
    core::AgentQuery q = synced_infra[i];
    q.track_id = ids.id_for(q.track_id);
    q.confidence *= cfg.unmatched_conf_decay;
    if (q.confidence >= cfg.conf_keep_threshold) out.push_back(std::move(q));
  }
  return out;
}

void ego_filter(std::vector<core::AgentQuery>& queries, core::ProbGrid& grid, const EgoRect& rect) {
  std::erase_if(queries, [&](const core::AgentQuery& q) { return rect.contains(q.ref_point.head<2>()); });
  const auto& g = grid.spec();
  const double hx = 0.5 * rect.length + rect.margin;
  const double hy = 0.5 * rect.width + rect.margin;
  const int c0 = std::max(0, static_cast<int>(std::floor((-hx - g.x_min) / g.resolution)));
  const int c1 = std::min(g.width - 1, static_cast<int>(std::floor((hx - g.x_min) / g.resolution)));
  const int r0 = std::max(0, static_cast<int>(std::floor((-hy - g.y_min) / g.resolution)));
  const int r1 = std::min(g.height - 1, static_cast<int>(std::floor((hy - g.y_min) / g.resolution)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (rect.contains(g.cell_to_center({r, c}))) grid.at({r, c}) = 0.0f;
    }
  }
}

namespace {

double point_segment_distance(const core::Vec2& p, const core::Vec2& a, const core::Vec2& b) {
  const core::Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double point_polyline_distance(const core::Vec2& p, const std::vector<core::Vec2>& line) {
  if (line.size() == 1) return (p - line.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < line.size(); ++k) best = std::min(best, point_segment_distance(p, line[k], line[k + 1]));
  return best;
}

}  // namespace

double mean_polyline_distance(const std::vector<core::Vec2>& a, const std::vector<core::Vec2>& b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& p : a) sum += point_polyline_distance(p, b);
  return sum / static_cast<double>(a.size());
}

std::vector<core::LaneQuery> fuse_lanes(const std::vector<core::LaneQuery>& synced_infra_lanes,
                                        const std::vector<core::LaneQuery>& ego_lanes, double dedup_distance) {
  std::vector<core::LaneQuery> out = ego_lanes;
  for (const auto& l : synced_infra_lanes) {
    const bool duplicate = std::any_of(ego_lanes.begin(), ego_lanes.end(), [&](const core::LaneQuery& e) {
      return e.lane_class == l.lane_class && mean_polyline_distance(l.points, e.points) < dedup_distance;
    });
    if (!duplicate) out.push_back(l);
  }
  return out;
}

namespace {

// Continuous cell coordinate, snapped to the nearest integer when within
// rounding noise so integer shifts copy exactly.
double cell_coord(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

core::ProbGrid warp_grid(const core::ProbGrid& src, const core::Pose& target_from_source, const core::GridSpec& dst) {
  const auto& sg = src.spec();
  const core::Pose source_from_target = core::invert(target_from_source);
  core::ProbGrid out(dst, 0.0f);
  for (int r = 0; r < dst.height; ++r) {
    for (int c = 0; c < dst.width; ++c) {
      const core::Vec2 x = dst.cell_to_center({r, c});
      const core::Vec3 p = core::transform_point(source_from_target, core::Vec3(x.x(), x.y(), 0.0));
      if (!(p.x() >= sg.x_min && p.x() < sg.x_max() && p.y() >= sg.y_min && p.y() < sg.y_max())) continue;
      const double u = cell_coord((p.x() - sg.x_min) / sg.resolution - 0.5);
      const double v = cell_coord((p.y() - sg.y_min) / sg.resolution - 0.5);
      const double fu = std::floor(u);
      const double fv = std::floor(v);
      const double ax = u - fu;
      const double ay = v - fv;
      const auto sample = [&](double col, double row) {
        const int cc = std::clamp(static_cast<int>(col), 0, sg.width - 1);
        const int rr = std::clamp(static_cast<int>(row), 0, sg.height - 1);
        return static_cast<double>(src.at({rr, cc}));
      };
      double value;
      if (ax == 0.0 && ay == 0.0) {
        value = sample(fu, fv);
      } else {
        value = (1.0 - ax) * (1.0 - ay) * sample(fu, fv) + ax * (1.0 - ay) * sample(fu + 1, fv) +
                (1.0 - ax) * ay * sample(fu, fv + 1) + ax * ay * sample(fu + 1, fv + 1);
      }
      out.at({r, c}) = static_cast<float>(value);
    }
  }
  return out;
}

core::ProbGrid warp_occupancy(const core::ProbGrid& src, const core::Pose& target_from_source,
                              const core::GridSpec& dst) {
  core::ProbGrid out = warp_grid(src, target_from_source, dst);
  for (auto& v : out.raw()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

core::OccupiedMask threshold_mask(const core::ProbGrid& grid, double theta) {
  core::OccupiedMask mask{core::MaskGrid(grid.spec(), 0), theta};
  simd::threshold(grid.values(), static_cast<float>(theta), mask.cells.values());
  return mask;
}

std::pair<core::ProbGrid, core::OccupiedMask> fuse_occupancy(const core::ProbGrid& a, const core::ProbGrid& b,
                                                             double theta) {
  core::require_same_shape(a, b, "fuse_occupancy");
  core::ProbGrid fused(a.spec(), 0.0f);
  simd::max_fuse(a.values(), b.values(), fused.values());
  core::OccupiedMask mask = threshold_mask(fused, theta);
  return {std::move(fused), std::move(mask)};
}

}  // namespace coopsim::fusion

#include "coopsim/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "coopsim/fusion/hungarian.hpp"

namespace coopsim::metrics {

namespace {

double cross(const core::Vec2& a, const core::Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<core::Vec2>& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += cross(p[i], p[(i + 1) % p.size()]);
  return 0.5 * s;
}

}  // namespace

double convex_intersection_area(const std::vector<core::Vec2>& a, const std::vector<core::Vec2>& b) {
  // Sutherland-Hodgman: clip a against each edge of b.
  std::vector<core::Vec2> poly = a;
  for (std::size_t e = 0; e < b.size() && !poly.empty(); ++e) {
    const core::Vec2& p = b[e];
    const core::Vec2& q = b[(e + 1) % b.size()];
    const core::Vec2 edge = q - p;
    const auto side = [&](const core::Vec2& v) { return cross(edge, v - p); };
    std::vector<core::Vec2> next;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const core::Vec2& cur = poly[i];
      const core::Vec2& nxt = poly[(i + 1) % poly.size()];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) next.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        next.push_back(cur + t * (nxt - cur));
      }
    }
    poly = std::move(next);
  }
  return poly.size() < 3 ? 0.0 : std::abs(polygon_area(poly));
}

double bev_iou(const core::BevBox& a, const core::BevBox& b) {
  if (!(a.length > 0.0 && a.width > 0.0 && b.length > 0.0 && b.width > 0.0)) {
    throw std::invalid_argument("bev_iou: box dimensions must be positive");
  }
  const auto ca = a.corners();
  const auto cb = b.corners();
  const double inter = convex_intersection_area({ca.begin(), ca.end()}, {cb.begin(), cb.end()});
  const double uni = a.length * a.width + b.length * b.width - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double average_precision(const std::vector<Detection>& detections, const std::vector<GroundTruthBox>& gts,
                         double iou_thresh) {
  const std::size_t n_gt = gts.size();
  if (n_gt == 0) return 0.0;

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].confidence > detections[b].confidence; });

  std::vector<char> claimed(n_gt, 0);
  std::vector<std::size_t> tp_at;  // cumulative TP after each detection
  tp_at.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t idx : order) {
    const Detection& d = detections[idx];
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (claimed[g] || gts[g].frame != d.frame) continue;
      const double iou = bev_iou(d.box, gts[g].box);
      if (iou >= iou_thresh && iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      claimed[best] = 1;
      ++tp;
    }
    tp_at.push_back(tp);
  }

  double sum = 0.0;
  for (std::size_t i = 0; i <= 10; ++i) {
    double p_max = 0.0;
    for (std::size_t k = 0; k < tp_at.size(); ++k) {
      // recall >= i/10 without rounding: tp * 10 >= i * n_gt
      if (tp_at[k] * 10 >= i * n_gt) {
        p_max = std::max(p_max, static_cast<double>(tp_at[k]) / static_cast<double>(k + 1));
      }
    }
    sum += p_max;
  }
  return sum / 11.0;
}

std::map<core::AgentClass, double> average_precision_per_class(const std::vector<Detection>& detections,
                                                               const std::vector<GroundTruthBox>& gts,
                                                               double iou_thresh) {
  std::map<core::AgentClass, double> out;
  for (auto cls : core::kAgentClasses) {
    std::vector<Detection> d;
    std::vector<GroundTruthBox> g;
    std::copy_if(detections.begin(), detections.end(), std::back_inserter(d),
                 [&](const Detection& x) { return x.agent_class == cls; });
    std::copy_if(gts.begin(), gts.end(), std::back_inserter(g),
                 [&](const GroundTruthBox& x) { return x.agent_class == cls; });
    out[cls] = average_precision(d, g, iou_thresh);
  }
  return out;
}

namespace {

fusion::AssignmentPairs center_matching(const std::vector<core::Vec2>& a, const std::vector<core::Vec2>& b,
                                        double gate) {
  fusion::CostMatrix cost(static_cast<int>(a.size()), static_cast<int>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = (a[i] - b[j]).norm();
      cost(static_cast<int>(i), static_cast<int>(j)) = d <= gate ? d : std::numeric_limits<double>::infinity();
    }
  }
  return fusion::hungarian(cost);
}

std::vector<core::Vec2> centers(const std::vector<TrackPoint>& pts) {
  std::vector<core::Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(p.center);
  return out;
}

}  // namespace

int matched_count(const std::vector<core::Vec2>& predicted, const std::vector<core::Vec2>& truth, double gate) {
  return static_cast<int>(center_matching(truth, predicted, gate).size());
}

TrackingResult tracking_metrics(const std::vector<std::vector<TrackPoint>>& tracks,
                                const std::vector<std::vector<TrackPoint>>& gts, double gate) {
  if (tracks.size() != gts.size()) throw std::invalid_argument("tracking_metrics: frame count mismatch");
  TrackingResult r;
  std::map<std::int64_t, std::int64_t> last_track;  // gt id -> track id at its last match
  for (std::size_t f = 0; f < gts.size(); ++f) {
    const auto pairs = center_matching(centers(gts[f]), centers(tracks[f]), gate);
    r.gt_total += static_cast<int>(gts[f].size());
    r.false_negatives += static_cast<int>(gts[f].size() - pairs.size());
    r.false_positives += static_cast<int>(tracks[f].size() - pairs.size());
    for (const auto& [g, t] : pairs) {
      const std::int64_t gid = gts[f][g].id;
      const std::int64_t tid = tracks[f][t].id;
      const auto it = last_track.find(gid);
      if (it != last_track.end() && it->second != tid) ++r.id_switches;
      last_track[gid] = tid;
    }
  }
  if (r.gt_total > 0) {
    r.mota = 1.0 - static_cast<double>(r.false_negatives + r.false_positives + r.id_switches) / r.gt_total;
  }
  return r;
}

IouCounts occupancy_iou_counts(const core::MaskGrid& pred, const core::MaskGrid& gt, double half_extent) {
  if (!(pred.spec() == gt.spec())) throw std::invalid_argument("occupancy_iou: grid mismatch");
  const auto& g = gt.spec();
  IouCounts c;
  for (int r = 0; r < g.height; ++r) {
    for (int col = 0; col < g.width; ++col) {
      const core::Vec2 x = g.cell_to_center({r, col});
      if (std::abs(x.x()) > half_extent || std::abs(x.y()) > half_extent) continue;
      const bool a = pred.at({r, col}) != 0;
      const bool b = gt.at({r, col}) != 0;
      c.intersection += a && b;
      c.uni += a || b;
    }
  }
  return c;
}

double occupancy_iou(const core::OccupiedMask& pred, const core::MaskGrid& gt, double half_extent) {
  return occupancy_iou_counts(pred.cells, gt, half_extent).iou();
}

void rasterize_polyline(const std::vector<core::Vec2>& points, double half_width, core::MaskGrid& mask) {
  const auto& g = mask.spec();
  const auto mark = [&](const core::Vec2& a, const core::Vec2& b) {
    const double x0 = std::min(a.x(), b.x()) - half_width, x1 = std::max(a.x(), b.x()) + half_width;
    const double y0 = std::min(a.y(), b.y()) - half_width, y1 = std::max(a.y(), b.y()) + half_width;
    const int c0 = std::max(0, static_cast<int>(std::floor((x0 - g.x_min) / g.resolution)));
    const int c1 = std::min(g.width - 1, static_cast<int>(std::floor((x1 - g.x_min) / g.resolution)));
    const int r0 = std::max(0, static_cast<int>(std::floor((y0 - g.y_min) / g.resolution)));
    const int r1 = std::min(g.height - 1, static_cast<int>(std::floor((y1 - g.y_min) / g.resolution)));
    const core::Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const core::Vec2 p = g.cell_to_center({r, c});
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        if ((p - (a + t * ab)).norm() <= half_width) mask.at({r, c}) = 1;
      }
    }
  };
  if (points.size() == 1) mark(points[0], points[0]);
  for (std::size_t k = 0; k + 1 < points.size(); ++k) mark(points[k], points[k + 1]);
}

LaneIouCounts lane_iou(const std::vector<LaneLine>& pred, const std::vector<LaneLine>& gt, const core::GridSpec& grid,
                       double half_width) {
  LaneIouCounts out;
  for (auto cls : {core::LaneClass::Lane, core::LaneClass::Crosswalk}) {
    core::MaskGrid a(grid, 0), b(grid, 0);
    for (const auto& l : pred)
      if (l.lane_class == cls) rasterize_polyline(l.points, half_width, a);
    for (const auto& l : gt)
      if (l.lane_class == cls) rasterize_polyline(l.points, half_width, b);
    IouCounts c;
    for (std::size_t i = 0; i < a.size(); ++i) {
      c.intersection += a[i] && b[i];
      c.uni += a[i] || b[i];
    }
    (cls == core::LaneClass::Lane ? out.lane : out.crosswalk) = c;
  }
  return out;
}

PlanningSample planning_metrics(const planner::Trajectory& planned, const std::vector<core::Vec2>& gt_future,
                                const std::vector<core::MaskGrid>& gt_masks, const planner::DrivableView& road,
                                const planner::PlannerConfig& cfg) {
  PlanningSample s;
  for (std::size_t h = 0; h < kPlanningHorizons.size(); ++h) {
    const double t = kPlanningHorizons[h];
    const core::Vec2 p = planned.position_at(t);
    const auto k = static_cast<std::size_t>(std::llround(t / planned.dt));
    if (k >= gt_future.size() || k >= gt_masks.size()) {
      throw std::out_of_range("planning_metrics: horizon beyond ground truth");
    }
    s.l2[h] = (p - gt_future[k]).norm();
    s.collision[h] = planner::box_hits_mask(planner::ego_footprint(planned.waypoints[k], cfg), gt_masks[k]);
    s.offroad[h] = !road.is_drivable(p);
  }
  return s;
}

std::string horizon_key(double h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs", h);
  return buf;
}

}  // namespace coopsim::metrics

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"
#include "coopsim/planner/planner.hpp"

namespace coopsim::metrics {

// Intersection area over union area of two oriented rectangles.
double bev_iou(const core::BevBox& a, const core::BevBox& b);

// Area of the intersection of two convex polygons given counter-clockwise.
double convex_intersection_area(const std::vector<core::Vec2>& a, const std::vector<core::Vec2>& b);

struct Detection {
  int frame = 0;
  core::BevBox box;
  double confidence = 0.0;
  core::AgentClass agent_class = core::AgentClass::Car;
};

struct GroundTruthBox {
  int frame = 0;
  core::BevBox box;
  core::AgentClass agent_class = core::AgentClass::Car;
};

// 11-point interpolated AP. Detections are taken by descending confidence
// (input order on ties) and each claims the unclaimed same-frame ground
// truth with the highest IoU >= iou_thresh. No ground truth gives 0.
// Class is ignored; filter beforehand for per-class AP.
double average_precision(const std::vector<Detection>& detections, const std::vector<GroundTruthBox>& gts,
                         double iou_thresh = 0.5);

std::map<core::AgentClass, double> average_precision_per_class(const std::vector<Detection>& detections,
                                                               const std::vector<GroundTruthBox>& gts,
                                                               double iou_thresh = 0.5);

struct TrackPoint {
  std::int64_t id = 0;
  core::Vec2 center = core::Vec2::Zero();
};

struct TrackingResult {
  double mota = 0.0;
  int id_switches = 0;
  int false_negatives = 0;
  int false_positives = 0;
  int gt_total = 0;
  bool operator==(const TrackingResult&) const = default;
};

// Per-frame Hungarian matching on center distance within `gate`.
// MOTA = 1 - (FN + FP + IDSW) / GT_total, and 0 when there is no ground truth.
TrackingResult tracking_metrics(const std::vector<std::vector<TrackPoint>>& tracks,
                                const std::vector<std::vector<TrackPoint>>& gts, double gate = 2.0);

// Class-agnostic matched count: Hungarian on center distance within `gate`.
int matched_count(const std::vector<core::Vec2>& predicted, const std::vector<core::Vec2>& truth, double gate = 2.0);

// Intersection and union cell counts, so runs can aggregate before dividing.
struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;

  // Empty against empty counts as a perfect match.
  double iou() const { return uni == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(uni); }
  IouCounts& operator+=(const IouCounts& o) {
    intersection += o.intersection;
    uni += o.uni;
    return *this;
  }
  bool operator==(const IouCounts&) const = default;
};

inline constexpr double kNearHalfExtent = 15.0;  // 30 m x 30 m
inline constexpr double kFarHalfExtent = 25.0;   // 50 m x 50 m

// Counts over cells whose centers lie within the centered square of the
// given half extent. Throws on grid mismatch.
IouCounts occupancy_iou_counts(const core::MaskGrid& pred, const core::MaskGrid& gt, double half_extent);
double occupancy_iou(const core::OccupiedMask& pred, const core::MaskGrid& gt, double half_extent);

// Cells whose centers lie within half_width of the polyline.
void rasterize_polyline(const std::vector<core::Vec2>& points, double half_width, core::MaskGrid& mask);

struct LaneIouCounts {
  IouCounts lane;
  IouCounts crosswalk;
  LaneIouCounts& operator+=(const LaneIouCounts& o) {
    lane += o.lane;
    crosswalk += o.crosswalk;
    return *this;
  }
};

struct LaneLine {
  std::vector<core::Vec2> points;
  core::LaneClass lane_class = core::LaneClass::Lane;
};

inline constexpr double kLaneHalfWidth = 0.5;

LaneIouCounts lane_iou(const std::vector<LaneLine>& pred, const std::vector<LaneLine>& gt, const core::GridSpec& grid,
                       double half_width = kLaneHalfWidth);

inline constexpr std::array<double, 3> kPlanningHorizons = {2.5, 3.5, 4.5};

struct PlanningSample {
  std::array<double, 3> l2{};
  std::array<bool, 3> collision{};
  std::array<bool, 3> offroad{};
};

// `gt_future[k]` is the true ego position at k*dt in the planning frame and
// `gt_masks[k]` the true occupancy at that time (ego excluded). Throws
// std::out_of_range if a horizon lies beyond the trajectory or the ground truth.
PlanningSample planning_metrics(const planner::Trajectory& planned, const std::vector<core::Vec2>& gt_future,
                                const std::vector<core::MaskGrid>& gt_masks, const planner::DrivableView& road,
                                const planner::PlannerConfig& cfg);

struct EvalReport {
  std::map<std::string, double> ap_per_class;
  double mota = 0.0;
  int id_switches = 0;
  double detection_recall = 0.0;
  double iou_lane = 0.0;
  double iou_crosswalk = 0.0;
  double iou_n = 0.0;
  double iou_f = 0.0;
  std::map<std::string, double> l2_at;
  std::map<std::string, double> collision_rate_at;
  std::map<std::string, double> offroad_rate_at;
  double avg_bps = 0.0;

  bool operator==(const EvalReport&) const = default;
};

// "2.5s" style key used in EvalReport maps.
std::string horizon_key(double h);

}  // namespace coopsim::metrics

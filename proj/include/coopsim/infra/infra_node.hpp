#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "coopsim/core/grid.hpp"
#include "coopsim/core/pose.hpp"
#include "coopsim/core/types.hpp"
#include "coopsim/scenario/perception.hpp"

namespace coopsim::infra {

struct PayloadHeader {
  std::uint32_t sender_id = 0;
  double timestamp = 0.0;  // t_i
  core::Pose world_from_sensor;
  bool operator==(const PayloadHeader&) const = default;
};

// How the occupancy section travels. Sparse carries only the listed nonzero
// cells; the receiver treats every other cell as zero.
enum class OccupancyEncoding : std::uint8_t { Dense = 1, Sparse = 2 };

// One infrastructure-to-vehicle transmission: sparse instance queries plus
// the dense occupied probability map and its flow.
struct V2XPayload {
  PayloadHeader header;
  std::vector<core::AgentQuery> agent_queries;
  std::vector<core::LaneQuery> lane_queries;
  std::optional<core::OccupancyMessage> occupancy;
  OccupancyEncoding occupancy_encoding = OccupancyEncoding::Dense;

  bool operator==(const V2XPayload&) const = default;
};

inline constexpr double kDefaultConfThreshold = 0.3;

// Keeps queries with confidence >= threshold, order preserved.
std::vector<core::AgentQuery> filter_queries(const std::vector<core::AgentQuery>& queries, double conf_threshold);
std::vector<core::LaneQuery> filter_lanes(const std::vector<core::LaneQuery>& lanes, double conf_threshold);

// Two-frame finite-difference query flow. Queries whose track id is absent
// from `prev` fall back to flow_ref = velocity and zero feature flow.
// Throws std::invalid_argument for dt <= 0.
scenario::PerceivedFrame estimate_query_flow(const scenario::PerceivedFrame& prev,
                                             const scenario::PerceivedFrame& curr, double dt);

// p1 = (p_curr - p_prev) / dt per cell. Throws on dt <= 0 or shape mismatch.
core::ProbGrid estimate_occupancy_flow(const core::ProbGrid& p_prev, const core::ProbGrid& p_curr, double dt);

// Assumes flows are already estimated on `frame`.
V2XPayload build_payload(const scenario::PerceivedFrame& frame, const core::Pose& world_from_sensor,
                         std::uint32_t sender_id, double conf_threshold = kDefaultConfThreshold);

// Grid floats needed to convey a T-step occupancy forecast: explicitly
// (T maps) versus as one map plus its flow (always 2 maps).
std::size_t explicit_forecast_floats(const core::GridSpec& grid, int steps);
std::size_t flow_forecast_floats(const core::GridSpec& grid);

// Roadside unit: remembers the previous perceived frame to estimate flows.
class InfraNode {
 public:
  InfraNode(std::uint32_t sender_id, core::Pose world_from_sensor, double conf_threshold = kDefaultConfThreshold)
      : sender_id_(sender_id), world_from_sensor_(std::move(world_from_sensor)), conf_threshold_(conf_threshold) {}

  // Estimates flows against the previous frame (if any) and builds the payload.
  V2XPayload process(const scenario::PerceivedFrame& frame);

 private:
  std::uint32_t sender_id_;
  core::Pose world_from_sensor_;
  double conf_threshold_;
  std::optional<scenario::PerceivedFrame> prev_;
};

}  // namespace coopsim::infra

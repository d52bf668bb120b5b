#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "coopsim/channel/codec.hpp"
#include "coopsim/infra/infra_node.hpp"
#include "coopsim/scenario/rng.hpp"

namespace coopsim::channel {

// Body bytes of one transmission. Magic, header (pose, timestamp, sender)
// and section counts are excluded.
struct CostReport {
  std::size_t feature_bytes = 0;
  std::size_t geometry_bytes = 0;
  std::size_t occupancy_bytes = 0;
  std::size_t total_body_bytes = 0;
  double bps = 0.0;

  bool operator==(const CostReport&) const = default;
};

CostReport cost(const infra::V2XPayload& payload, double frequency_hz);

// Cost of shipping a dense float tensor with the given shape (e.g. a BEV
// feature map), accounted as feature bytes.
CostReport dense_tensor_cost(std::size_t channels, std::size_t height, std::size_t width, double frequency_hz);

// Cost of a late-fusion box list: a u32 count plus 32-byte boxes
// (x, y, heading, l, w, h, conf as f32, class u8, 3 pad bytes).
inline constexpr std::size_t kLateFusionBoxBytes = 32;
CostReport box_list_cost(std::size_t n_boxes, double frequency_hz);

std::size_t agent_query_bytes(int feature_dim);
std::size_t lane_query_bytes(const core::LaneQuery& lane, int feature_dim);
std::size_t dense_occupancy_bytes(const core::GridSpec& grid);
std::size_t sparse_occupancy_bytes(std::size_t n_cells);

// Number of cells a sparse encoding of `occ` would carry.
std::size_t nonzero_cells(const core::OccupancyMessage& occ);

// Greedy prefix over (agents by descending confidence, lanes by descending
// confidence, occupancy): stops at the first item whose cost would push the
// running total past the budget. Occupancy that does not fit densely
// degrades to a sparse list of the highest-p0 cells (ties by cell index).
// Retained queries keep their original relative order.
infra::V2XPayload fit_to_budget(const infra::V2XPayload& payload, std::size_t budget_bytes);

// Removes floor(drop_fraction * N) agent queries chosen by a seeded shuffle.
// The shuffle does not depend on drop_fraction, so for one stream the
// dropped sets are nested as the fraction grows. Lanes and occupancy are
// left alone.
infra::V2XPayload corrupt(const infra::V2XPayload& payload, double drop_fraction, scenario::RngStream& rng);

struct ChannelConfig {
  double latency = 0.0;                             // seconds
  std::optional<std::size_t> bandwidth_budget;      // bytes per payload
  double drop_fraction = 0.0;
  double frequency_hz = 2.0;
  std::uint64_t seed = 0;

  bool is_valid() const;
  bool operator==(const ChannelConfig&) const = default;
};

// Converts a link rate in megabits per second into a per-payload byte budget.
std::size_t budget_from_mbps(double mbps, double frequency_hz);

// One simulated infrastructure-to-ego link. Payloads are budgeted,
// corrupted, encoded and held until send_time + latency.
class Channel {
 public:
  explicit Channel(ChannelConfig config, int feature_dim = core::kDefaultFeatureDim);

  // Throws std::invalid_argument if send_time goes backwards.
  CostReport submit(const infra::V2XPayload& payload, double send_time);
  // Everything due by `now`, in send order, decoded from the wire bytes.
  std::vector<infra::V2XPayload> poll(double now);

  const ChannelConfig& config() const { return config_; }
  const std::vector<CostReport>& costs() const { return costs_; }
  std::size_t in_flight() const { return queue_.size(); }

 private:
  struct InFlight {
    double deliver_at;
    std::vector<std::uint8_t> bytes;
  };
  ChannelConfig config_;
  int feature_dim_;
  std::deque<InFlight> queue_;
  std::vector<CostReport> costs_;
  std::optional<double> last_send_;
  std::uint64_t submitted_ = 0;
};

// Seeded stream used by Channel for the n-th submission.
scenario::RngStream corruption_stream(std::uint64_t seed, std::uint64_t submission_index);

}  // namespace coopsim::channel

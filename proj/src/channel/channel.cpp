#include "coopsim/channel/channel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coopsim::channel {

std::size_t agent_query_bytes(int feature_dim) { return kAgentGeometryBytes + 8 * static_cast<std::size_t>(feature_dim); }

std::size_t lane_query_bytes(const core::LaneQuery& lane, int feature_dim) {
  return kLaneFixedBytes + 8 * lane.points.size() + 4 * static_cast<std::size_t>(feature_dim);
}

std::size_t dense_occupancy_bytes(const core::GridSpec& grid) { return kOccupancyMetaBytes + 8 * grid.cell_count(); }

std::size_t sparse_occupancy_bytes(std::size_t n_cells) { return kOccupancyMetaBytes + 4 + kSparseCellBytes * n_cells; }

namespace {

bool cell_is_zero(const core::OccupancyMessage& occ, std::size_t i) {
  return std::bit_cast<std::uint32_t>(occ.p0[i]) == 0 && std::bit_cast<std::uint32_t>(occ.p1[i]) == 0;
}

}  // namespace

std::size_t nonzero_cells(const core::OccupancyMessage& occ) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < occ.p0.size(); ++i) n += cell_is_zero(occ, i) ? 0 : 1;
  return n;
}

CostReport cost(const infra::V2XPayload& payload, double frequency_hz) {
  CostReport c;
  for (const auto& q : payload.agent_queries) {
    c.feature_bytes += 4 * (q.feature.size() + q.flow_feature.size());
    c.geometry_bytes += kAgentGeometryBytes;
  }
  for (const auto& l : payload.lane_queries) {
    c.feature_bytes += 4 * l.feature.size();
    c.geometry_bytes += kLaneFixedBytes + 8 * l.points.size();
  }
  if (payload.occupancy) {
    c.occupancy_bytes = payload.occupancy_encoding == infra::OccupancyEncoding::Dense
                            ? dense_occupancy_bytes(payload.occupancy->grid())
                            : sparse_occupancy_bytes(nonzero_cells(*payload.occupancy));
  }
  c.total_body_bytes = c.feature_bytes + c.geometry_bytes + c.occupancy_bytes;
  c.bps = static_cast<double>(c.total_body_bytes) * frequency_hz;
  return c;
}

CostReport dense_tensor_cost(std::size_t channels, std::size_t height, std::size_t width, double frequency_hz) {
  CostReport c;
  c.feature_bytes = channels * height * width * 4;
  c.total_body_bytes = c.feature_bytes;
  c.bps = static_cast<double>(c.total_body_bytes) * frequency_hz;
  return c;
}

CostReport box_list_cost(std::size_t n_boxes, double frequency_hz) {
  CostReport c;
  if (n_boxes > 0) {
    c.geometry_bytes = 4 + kLateFusionBoxBytes * n_boxes;
    c.total_body_bytes = c.geometry_bytes;
  }
  c.bps = static_cast<double>(c.total_body_bytes) * frequency_hz;
  return c;
}

namespace {

template <class Q>
std::vector<std::size_t> by_descending_confidence(const std::vector<Q>& items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a].confidence > items[b].confidence; });
  return order;
}

template <class Q>
std::vector<Q> keep_in_original_order(const std::vector<Q>& items, std::vector<std::size_t> kept) {
  std::sort(kept.begin(), kept.end());
  std::vector<Q> out;
  out.reserve(kept.size());
  for (auto i : kept) out.push_back(items[i]);
  return out;
}

}  // namespace

infra::V2XPayload fit_to_budget(const infra::V2XPayload& payload, std::size_t budget_bytes) {
  infra::V2XPayload out;
  out.header = payload.header;
  out.occupancy_encoding = payload.occupancy_encoding;
  std::size_t used = 0;
  bool stopped = false;

  const auto admit = [&](std::size_t bytes) {
    if (stopped || used + bytes > budget_bytes) {
      stopped = true;
      return false;
    }
    used += bytes;
    return true;
  };

  std::vector<std::size_t> kept_agents;
  for (auto i : by_descending_confidence(payload.agent_queries)) {
    const auto& q = payload.agent_queries[i];
    if (!admit(kAgentGeometryBytes + 4 * (q.feature.size() + q.flow_feature.size()))) break;
    kept_agents.push_back(i);
  }
  out.agent_queries = keep_in_original_order(payload.agent_queries, std::move(kept_agents));

  std::vector<std::size_t> kept_lanes;
  for (auto i : by_descending_confidence(payload.lane_queries)) {
    const auto& l = payload.lane_queries[i];
    if (!admit(kLaneFixedBytes + 8 * l.points.size() + 4 * l.feature.size())) break;
    kept_lanes.push_back(i);
  }
  out.lane_queries = keep_in_original_order(payload.lane_queries, std::move(kept_lanes));

  if (!payload.occupancy || stopped) return out;
  const auto& occ = *payload.occupancy;
  const std::size_t remaining = budget_bytes - used;
  if (payload.occupancy_encoding == infra::OccupancyEncoding::Dense && dense_occupancy_bytes(occ.grid()) <= remaining) {
    out.occupancy = occ;
    return out;
  }
  if (remaining < sparse_occupancy_bytes(1)) return out;

  std::vector<std::uint32_t> cells;
  for (std::size_t i = 0; i < occ.p0.size(); ++i) {
    if (!cell_is_zero(occ, i)) cells.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t capacity = (remaining - sparse_occupancy_bytes(0)) / kSparseCellBytes;
  const std::size_t n = std::min(capacity, cells.size());
  if (n == 0) return out;
  std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n), cells.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (occ.p0[a] != occ.p0[b]) return occ.p0[a] > occ.p0[b];
                      return a < b;
                    });
  core::OccupancyMessage sparse(occ.grid(), occ.timestamp);
  for (std::size_t k = 0; k < n; ++k) {
    sparse.p0[cells[k]] = occ.p0[cells[k]];
    sparse.p1[cells[k]] = occ.p1[cells[k]];
  }
  out.occupancy = std::move(sparse);
  out.occupancy_encoding = infra::OccupancyEncoding::Sparse;
  return out;
}

infra::V2XPayload corrupt(const infra::V2XPayload& payload, double drop_fraction, scenario::RngStream& rng) {
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0)) throw std::invalid_argument("drop_fraction must be in [0,1]");
  const std::size_t n = payload.agent_queries.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const auto n_drop = std::min(n, static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(n) + 1e-9)));

  std::vector<std::uint8_t> dropped(n, 0);
  for (std::size_t k = 0; k < n_drop; ++k) dropped[perm[k]] = 1;
  infra::V2XPayload out = payload;
  out.agent_queries.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) out.agent_queries.push_back(payload.agent_queries[i]);
  }
  return out;
}

bool ChannelConfig::is_valid() const {
  return latency >= 0.0 && drop_fraction >= 0.0 && drop_fraction <= 1.0 && frequency_hz > 0.0;
}

std::size_t budget_from_mbps(double mbps, double frequency_hz) {
  if (!(mbps >= 0.0) || !(frequency_hz > 0.0)) throw std::invalid_argument("bandwidth must be >= 0, frequency > 0");
  return static_cast<std::size_t>(std::floor(mbps * 1e6 / 8.0 / frequency_hz));
}

scenario::RngStream corruption_stream(std::uint64_t seed, std::uint64_t submission_index) {
  return scenario::RngStream(seed, scenario::StreamPurpose::Corruption, {submission_index});
}

Channel::Channel(ChannelConfig config, int feature_dim) : config_(config), feature_dim_(feature_dim) {
  if (!config_.is_valid()) throw std::invalid_argument("invalid ChannelConfig");
}

CostReport Channel::submit(const infra::V2XPayload& payload, double send_time) {
  if (last_send_ && send_time < *last_send_) throw std::invalid_argument("channel send times must not decrease");
  last_send_ = send_time;
  infra::V2XPayload shaped = config_.bandwidth_budget ? fit_to_budget(payload, *config_.bandwidth_budget) : payload;
  auto rng = corruption_stream(config_.seed, submitted_++);
  if (config_.drop_fraction > 0.0) shaped = corrupt(shaped, config_.drop_fraction, rng);
  const CostReport c = cost(shaped, config_.frequency_hz);
  costs_.push_back(c);
  queue_.push_back({send_time + config_.latency, encode(shaped)});
  return c;
}

std::vector<infra::V2XPayload> Channel::poll(double now) {
  // Tolerates frame-time rounding, e.g. 0.1 * k + latency.
  constexpr double kEps = 1e-9;
  std::vector<infra::V2XPayload> out;
  while (!queue_.empty() && now + kEps >= queue_.front().deliver_at) {
    out.push_back(decode(queue_.front().bytes, feature_dim_));
    queue_.pop_front();
  }
  return out;
}

}  // namespace coopsim::channel

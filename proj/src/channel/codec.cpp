#include "coopsim/channel/codec.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <limits>

namespace coopsim::channel {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    const T le = to_little(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&le);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void f32(double v) { put(static_cast<float>(v)); }
  void bytes(const char* s, std::size_t n) { buf_.insert(buf_.end(), s, s + n); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  void reserve(std::size_t n) { buf_.reserve(n); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  template <class T>
  T get(const char* what) {
    if (data_.size() - pos_ < sizeof(T)) {
      throw DecodeError(DecodeError::Kind::Truncated, pos_, std::string("stream truncated reading ") + what);
    }
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  double f32(const char* what) { return static_cast<double>(get<float>(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  // Fails early when a declared element count cannot possibly fit.
  void require(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw DecodeError(DecodeError::Kind::Truncated, data_.size(), std::string("stream truncated in ") + what);
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

[[noreturn]] void structure_error(std::size_t offset, const std::string& what) {
  throw DecodeError(DecodeError::Kind::Structure, offset, what);
}

void check_dim(int& dim, std::size_t n, const char* what) {
  if (dim < 0) {
    dim = static_cast<int>(n);
  } else if (static_cast<std::size_t>(dim) != n) {
    throw std::invalid_argument(std::string("encode: inconsistent feature length in ") + what);
  }
}

}  // namespace

int payload_feature_dim(const infra::V2XPayload& payload, int fallback) {
  if (!payload.agent_queries.empty()) return static_cast<int>(payload.agent_queries.front().feature.size());
  if (!payload.lane_queries.empty()) return static_cast<int>(payload.lane_queries.front().feature.size());
  return fallback;
}

std::vector<std::uint8_t> encode(const infra::V2XPayload& payload) {
  int dim = -1;
  for (const auto& q : payload.agent_queries) {
    check_dim(dim, q.feature.size(), "agent feature");
    check_dim(dim, q.flow_feature.size(), "agent flow_feature");
  }
  for (const auto& l : payload.lane_queries) {
    check_dim(dim, l.feature.size(), "lane feature");
    if (l.points.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("encode: lane polyline too long for u16 point count");
    }
  }

  Writer w;
  w.bytes("UVX1", 4);
  w.put<std::uint32_t>(payload.header.sender_id);
  w.put<double>(payload.header.timestamp);
  const auto& pose = payload.header.world_from_sensor;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) w.put<double>(pose.rotation(i, k));
  for (int i = 0; i < 3; ++i) w.put<double>(pose.translation(i));

  w.put<std::uint32_t>(static_cast<std::uint32_t>(payload.agent_queries.size()));
  for (const auto& q : payload.agent_queries) {
    w.put<std::int32_t>(q.track_id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(q.agent_class));
    w.f32(q.confidence);
    for (int i = 0; i < 3; ++i) w.f32(q.ref_point(i));
    w.f32(q.heading);
    w.f32(q.velocity.x());
    w.f32(q.velocity.y());
    w.f32(q.flow_ref.x());
    w.f32(q.flow_ref.y());
    w.f32(q.box_size.length);
    w.f32(q.box_size.width);
    w.f32(q.box_size.height);
    for (double v : q.feature) w.f32(v);
    for (double v : q.flow_feature) w.f32(v);
  }

  w.put<std::uint32_t>(static_cast<std::uint32_t>(payload.lane_queries.size()));
  for (const auto& l : payload.lane_queries) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.lane_class));
    w.f32(l.confidence);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(l.points.size()));
    for (const auto& p : l.points) {
      w.f32(p.x());
      w.f32(p.y());
    }
    for (double v : l.feature) w.f32(v);
  }

  if (!payload.occupancy) {
    w.put<std::uint8_t>(0);
    return w.take();
  }
  const auto& occ = *payload.occupancy;
  const auto& g = occ.grid();
  if (g.width > 0xFFFF || g.height > 0xFFFF) throw std::invalid_argument("encode: grid too large for u16 dims");
  core::require_same_shape(occ.p0, occ.p1, "encode");
  w.put<std::uint8_t>(static_cast<std::uint8_t>(payload.occupancy_encoding));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(g.width));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(g.height));
  w.f32(g.resolution);
  w.f32(g.x_min);
  w.f32(g.y_min);
  if (payload.occupancy_encoding == infra::OccupancyEncoding::Dense) {
    for (float v : occ.p0.values()) w.put<float>(v);
    for (float v : occ.p1.values()) w.put<float>(v);
  } else {
    std::vector<std::uint32_t> cells;
    for (std::size_t i = 0; i < occ.p0.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(occ.p0[i]) != 0 || std::bit_cast<std::uint32_t>(occ.p1[i]) != 0) {
        cells.push_back(static_cast<std::uint32_t>(i));
      }
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cells.size()));
    for (auto c : cells) {
      w.put<std::uint32_t>(c);
      w.put<float>(occ.p0[c]);
      w.put<float>(occ.p1[c]);
    }
  }
  return w.take();
}

infra::V2XPayload decode(std::span<const std::uint8_t> bytes, int feature_dim) {
  if (feature_dim < 0) throw std::invalid_argument("decode: negative feature dimension");
  Reader r(bytes);
  if (bytes.size() < 4) throw DecodeError(DecodeError::Kind::Truncated, bytes.size(), "stream truncated in magic");
  if (std::memcmp(bytes.data(), "UVX1", 4) != 0) throw DecodeError(DecodeError::Kind::Format, 0, "bad magic");
  (void)r.get<std::uint32_t>("magic");

  infra::V2XPayload p;
  p.header.sender_id = r.get<std::uint32_t>("sender");
  p.header.timestamp = r.get<double>("timestamp");
  const std::size_t pose_at = r.pos();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.header.world_from_sensor.rotation(i, k) = r.get<double>("rotation");
  for (int i = 0; i < 3; ++i) p.header.world_from_sensor.translation(i) = r.get<double>("translation");
  if (!p.header.world_from_sensor.is_valid(1e-6)) structure_error(pose_at, "header pose is not a rigid transform");

  const std::size_t dim = static_cast<std::size_t>(feature_dim);
  const std::size_t agent_bytes = kAgentGeometryBytes + 8 * dim;
  const std::size_t agents_at = r.pos();
  const auto n_agents = r.get<std::uint32_t>("agent count");
  if (n_agents > r.remaining() / agent_bytes + 1) structure_error(agents_at, "agent count exceeds stream length");
  p.agent_queries.reserve(n_agents);
  for (std::uint32_t n = 0; n < n_agents; ++n) {
    core::AgentQuery q;
    q.track_id = r.get<std::int32_t>("track_id");
    const std::size_t cls_at = r.pos();
    const auto cls = r.get<std::uint8_t>("class");
    if (cls > static_cast<std::uint8_t>(core::AgentClass::TrafficCone)) structure_error(cls_at, "bad agent class");
    q.agent_class = static_cast<core::AgentClass>(cls);
    q.confidence = r.f32("confidence");
    for (int i = 0; i < 3; ++i) q.ref_point(i) = r.f32("ref_point");
    q.heading = r.f32("heading");
    q.velocity.x() = r.f32("velocity");
    q.velocity.y() = r.f32("velocity");
    q.flow_ref.x() = r.f32("flow_ref");
    q.flow_ref.y() = r.f32("flow_ref");
    q.box_size.length = r.f32("box");
    q.box_size.width = r.f32("box");
    q.box_size.height = r.f32("box");
    q.feature.resize(dim);
    for (auto& v : q.feature) v = r.f32("feature");
    q.flow_feature.resize(dim);
    for (auto& v : q.flow_feature) v = r.f32("flow_feature");
    q.timestamp = p.header.timestamp;
    p.agent_queries.push_back(std::move(q));
  }

  const std::size_t lanes_at = r.pos();
  const auto n_lanes = r.get<std::uint32_t>("lane count");
  if (n_lanes > r.remaining() / (kLaneFixedBytes + 4 * dim) + 1) {
    structure_error(lanes_at, "lane count exceeds stream length");
  }
  for (std::uint32_t n = 0; n < n_lanes; ++n) {
    core::LaneQuery l;
    const std::size_t cls_at = r.pos();
    const auto cls = r.get<std::uint8_t>("lane class");
    if (cls > static_cast<std::uint8_t>(core::LaneClass::Crosswalk)) structure_error(cls_at, "bad lane class");
    l.lane_class = static_cast<core::LaneClass>(cls);
    l.confidence = r.f32("lane confidence");
    const std::size_t npts_at = r.pos();
    const auto n_pts = r.get<std::uint16_t>("point count");
    if (n_pts < 2) structure_error(npts_at, "lane polyline needs at least 2 points");
    l.points.resize(n_pts);
    for (auto& pt : l.points) {
      pt.x() = r.f32("lane point");
      pt.y() = r.f32("lane point");
    }
    l.feature.resize(dim);
    for (auto& v : l.feature) v = r.f32("lane feature");
    p.lane_queries.push_back(std::move(l));
  }

  const std::size_t occ_at = r.pos();
  const auto present = r.get<std::uint8_t>("occupancy flag");
  if (present > 2) structure_error(occ_at, "bad occupancy flag");
  if (present != 0) {
    core::GridSpec g;
    g.width = r.get<std::uint16_t>("grid width");
    g.height = r.get<std::uint16_t>("grid height");
    g.resolution = r.f32("grid resolution");
    g.x_min = r.f32("grid x_min");
    g.y_min = r.f32("grid y_min");
    if (!g.is_valid()) structure_error(occ_at, "invalid occupancy grid spec");
    core::OccupancyMessage occ(g, p.header.timestamp);
    if (present == 1) {
      r.require(8 * g.cell_count(), "dense occupancy");
      for (auto& v : occ.p0.raw()) v = r.get<float>("p0");
      for (auto& v : occ.p1.raw()) v = r.get<float>("p1");
      p.occupancy_encoding = infra::OccupancyEncoding::Dense;
    } else {
      const std::size_t n_at = r.pos();
      const auto n = r.get<std::uint32_t>("sparse cell count");
      if (n > g.cell_count()) structure_error(n_at, "sparse cell count exceeds grid");
      r.require(static_cast<std::size_t>(n) * kSparseCellBytes, "sparse occupancy");
      std::int64_t last = -1;
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::size_t cell_at = r.pos();
        const auto cell = r.get<std::uint32_t>("cell index");
        if (cell >= g.cell_count() || static_cast<std::int64_t>(cell) <= last) {
          structure_error(cell_at, "sparse cell index out of range or not increasing");
        }
        last = cell;
        occ.p0[cell] = r.get<float>("p0");
        occ.p1[cell] = r.get<float>("p1");
      }
      p.occupancy_encoding = infra::OccupancyEncoding::Sparse;
    }
    p.occupancy = std::move(occ);
  }
  if (r.remaining() != 0) structure_error(r.pos(), "trailing bytes after payload");
  return p;
}

}  // namespace coopsim::channel

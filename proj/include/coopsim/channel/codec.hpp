#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopsim/infra/infra_node.hpp"

namespace coopsim::channel {

// Little-endian wire layout:
//
//   magic "UVX1"
//   header   sender u32 | t_i f64 | rotation 9 x f64 (row-major) | translation 3 x f64
//   AGT      count u32, then per query:
//              track_id i32 | class u8 | conf f32 | ref_point 3 x f32 | heading f32 |
//              velocity 2 x f32 | flow_ref 2 x f32 | box 3 x f32 | feature D x f32 | flow_feature D x f32
//   LAN      count u32, then per query:
//              class u8 | conf f32 | n_pts u16 | n_pts x (x f32, y f32) | feature D x f32
//   OCC      present u8 (0 none, 1 dense, 2 sparse)
//              W u16 | H u16 | res f32 | x_min f32 | y_min f32
//              dense:  p0 W*H x f32 | p1 W*H x f32
//              sparse: n u32 | n x (cell u32, p0 f32, p1 f32), cells strictly increasing
//
// D is a protocol constant shared by both ends, not carried on the wire.
inline constexpr std::size_t kMagicBytes = 4;
inline constexpr std::size_t kHeaderBytes = 4 + 8 + 12 * 8;
inline constexpr std::size_t kAgentGeometryBytes = 4 + 1 + 4 + 12 + 4 + 8 + 8 + 12;  // 53
inline constexpr std::size_t kLaneFixedBytes = 1 + 4 + 2;
inline constexpr std::size_t kOccupancyMetaBytes = 1 + 2 + 2 + 4 + 4 + 4;  // 17
inline constexpr std::size_t kSparseCellBytes = 12;

class DecodeError : public std::runtime_error {
 public:
  enum class Kind { Format, Truncated, Structure };
  DecodeError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), kind_(kind), offset_(offset) {}
  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

// Throws std::invalid_argument if feature lengths disagree within the
// payload or a count does not fit its wire field.
std::vector<std::uint8_t> encode(const infra::V2XPayload& payload);

// Inverse of encode for payloads whose values are representable in f32.
infra::V2XPayload decode(std::span<const std::uint8_t> bytes, int feature_dim = core::kDefaultFeatureDim);

// Feature dimension used by `payload`, or `fallback` when it has no queries.
int payload_feature_dim(const infra::V2XPayload& payload, int fallback = core::kDefaultFeatureDim);

}  // namespace coopsim::channel

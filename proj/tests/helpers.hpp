#pragma once

#include <cstdint>
#include <vector>

#include "coopsim/core/types.hpp"
#include "coopsim/infra/infra_node.hpp"
#include "coopsim/scenario/rng.hpp"

namespace coopsim::testing {

inline scenario::RngStream test_rng(std::uint64_t seed, std::uint64_t id = 0) {
  return scenario::RngStream(seed, scenario::StreamPurpose::Test, {id});
}

// Values that survive an f32 round trip unchanged.
inline double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline std::vector<double> random_feature(scenario::RngStream& rng, int dim, bool f32_exact = false) {
  std::vector<double> v(dim);
  for (auto& x : v) {
    x = rng.uniform(-1.0, 1.0);
    if (f32_exact) x = f32(x);
  }
  return v;
}

inline core::AgentQuery make_query(double x, double y, double conf, std::int32_t id = 1, int dim = 4) {
  core::AgentQuery q;
  q.ref_point = core::Vec3(x, y, 0.0);
  q.confidence = conf;
  q.track_id = id;
  q.feature.assign(dim, 0.0);
  q.flow_feature.assign(dim, 0.0);
  return q;
}

// Random payload whose every wire field is exactly representable, so an
// encode/decode round trip must reproduce it bit for bit.
inline infra::V2XPayload random_payload(scenario::RngStream& rng, int dim) {
  infra::V2XPayload p;
  p.header.sender_id = static_cast<std::uint32_t>(rng.next_u64());
  p.header.timestamp = rng.uniform(0.0, 1e4);
  p.header.world_from_sensor = core::Pose::from_yaw(rng.uniform(-3.1, 3.1), rng.uniform(-200, 200),
                                                    rng.uniform(-200, 200), rng.uniform(-2, 2));
  const auto n_agents = rng.below(6);
  for (std::uint64_t i = 0; i < n_agents; ++i) {
    core::AgentQuery q;
    q.track_id = static_cast<std::int32_t>(rng.below(4'000'000)) - 1'000'000;
    q.agent_class = core::kAgentClasses[rng.below(core::kAgentClasses.size())];
    q.confidence = f32(rng.uniform());
    q.ref_point = core::Vec3(f32(rng.uniform(-60, 60)), f32(rng.uniform(-60, 60)), f32(rng.uniform(-1, 1)));
    q.heading = f32(rng.uniform(-3.14, 3.14));
    q.velocity = core::Vec2(f32(rng.uniform(-15, 15)), f32(rng.uniform(-15, 15)));
    q.flow_ref = core::Vec2(f32(rng.uniform(-15, 15)), f32(rng.uniform(-15, 15)));
    q.box_size = {f32(rng.uniform(0.3, 6)), f32(rng.uniform(0.3, 3)), f32(rng.uniform(0.5, 3))};
    q.feature = random_feature(rng, dim, true);
    q.flow_feature = random_feature(rng, dim, true);
    q.timestamp = p.header.timestamp;
    p.agent_queries.push_back(std::move(q));
  }
  const auto n_lanes = rng.below(4);
  for (std::uint64_t i = 0; i < n_lanes; ++i) {
    core::LaneQuery l;
    l.lane_class = rng.below(2) ? core::LaneClass::Crosswalk : core::LaneClass::Lane;
    l.confidence = f32(rng.uniform());
    const auto n_pts = 2 + rng.below(8);
    for (std::uint64_t k = 0; k < n_pts; ++k) l.points.emplace_back(f32(rng.uniform(-50, 50)), f32(rng.uniform(-50, 50)));
    l.feature = random_feature(rng, dim, true);
    p.lane_queries.push_back(std::move(l));
  }
  switch (rng.below(3)) {
    case 0: break;
    case 1:
    case 2: {
      const core::GridSpec g{1 + static_cast<int>(rng.below(12)), 1 + static_cast<int>(rng.below(12)),
                             f32(rng.uniform(0.1, 1.0)), f32(rng.uniform(-50, 0)), f32(rng.uniform(-50, 0))};
      core::OccupancyMessage occ(g, p.header.timestamp);
      for (std::size_t c = 0; c < g.cell_count(); ++c) {
        if (rng.below(3) == 0) continue;
        occ.p0[c] = static_cast<float>(rng.uniform());
        occ.p1[c] = static_cast<float>(rng.uniform(-2, 2));
      }
      p.occupancy = std::move(occ);
      p.occupancy_encoding = rng.below(2) ? infra::OccupancyEncoding::Dense : infra::OccupancyEncoding::Sparse;
    }
  }
  return p;
}

}  // namespace coopsim::testing

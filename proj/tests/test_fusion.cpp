#include <cmath>
#include <limits>
#include <numbers>

#include <doctest.h>

#include "coopsim/fusion/fusion.hpp"
#include "coopsim/fusion/hungarian.hpp"
#include "coopsim/fusion/pipeline.hpp"
#include "coopsim/fusion/sync.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace coopsim;
using namespace coopsim::fusion;
using core::Pose;
using core::Vec2;
using testing::make_query;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

core::ProbGrid random_grid(scenario::RngStream& rng, const core::GridSpec& g) {
  core::ProbGrid p(g, 0.0f);
  for (auto& v : p.raw()) v = static_cast<float>(rng.uniform());
  return p;
}

core::AgentQuery random_query(scenario::RngStream& rng, int dim) {
  auto q = make_query(rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(), 1, dim);
  q.heading = rng.uniform(-3, 3);
  q.velocity = Vec2(rng.uniform(-10, 10), rng.uniform(-10, 10));
  q.flow_ref = Vec2(rng.uniform(-10, 10), rng.uniform(-10, 10));
  q.feature = testing::random_feature(rng, dim);
  q.flow_feature = testing::random_feature(rng, dim);
  return q;
}

bool queries_near(const core::AgentQuery& a, const core::AgentQuery& b, double tol) {
  auto close = [&](double x, double y) { return std::abs(x - y) <= tol; };
  if ((a.ref_point - b.ref_point).norm() > tol) return false;
  if (std::abs(core::wrap_angle(a.heading - b.heading)) > tol) return false;
  if ((a.velocity - b.velocity).norm() > tol || (a.flow_ref - b.flow_ref).norm() > tol) return false;
  for (std::size_t i = 0; i < a.feature.size(); ++i)
    if (!close(a.feature[i], b.feature[i]) || !close(a.flow_feature[i], b.flow_feature[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("temporal_sync_queries") {
  auto q = make_query(10, 0, 0.9);
  q.flow_ref = Vec2(2, 0);
  q.timestamp = 1.0;
  CHECK(temporal_sync_queries({q}, 1.0)[0] == q);

  const auto moved = temporal_sync_queries({q}, 1.5)[0];
  CHECK(moved.ref_point == core::Vec3(11, 0, 0));
  CHECK(moved.timestamp == 1.5);

  auto still = make_query(3, 4, 0.5);
  still.feature = {1, 2, 3, 4};
  still.flow_feature.assign(4, 0.0);
  const auto s = temporal_sync_queries({still}, 7.0)[0];
  CHECK(s.ref_point == still.ref_point);
  CHECK(s.feature == still.feature);
  CHECK(s.timestamp == 7.0);

  auto feat = make_query(0, 0, 0.5);
  feat.feature = {1, 0, 0, 0};
  feat.flow_feature = {2, 0, 0, -1};
  CHECK(temporal_sync_queries({feat}, 0.5)[0].feature == std::vector<double>{2, 0, 0, -0.5});

  CHECK_THROWS_AS(temporal_sync_queries({q}, 0.5), std::invalid_argument);
  CHECK(restamp_queries({q}, 3.0)[0].ref_point == q.ref_point);
}

TEST_CASE("temporal_sync_occupancy") {
  core::OccupancyMessage m(core::GridSpec{2, 1, 1.0, 0, 0}, 1.0);
  m.p0[0] = 0.2f;
  m.p1[0] = 0.1f;
  m.p0[1] = 0.9f;
  m.p1[1] = 0.5f;
  CHECK(temporal_sync_occupancy(m, 1.0) == m.p0);
  const auto two = temporal_sync_occupancy(m, 3.0);
  CHECK(two[0] == doctest::Approx(0.4f));
  CHECK(two[1] == 1.0f);
  CHECK(temporal_sync_occupancy(m, 2.0)[1] == 1.0f);
}

TEST_CASE("spatial_sync_queries") {
  auto q = make_query(1, 0, 0.8);
  q.feature = {0.6, 0.8, 1.0, 0.0};
  CHECK(spatial_sync_queries({q}, Pose::identity())[0] == q);

  const auto r = spatial_sync_queries({q}, Pose::from_yaw(std::numbers::pi / 2, 1, 0, 0))[0];
  CHECK((r.ref_point - core::Vec3(1, 1, 0)).norm() < 1e-12);
  CHECK(r.heading == doctest::Approx(std::numbers::pi / 2));

  auto rng = testing::test_rng(17);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_query(rng, 16);
    const Pose p = Pose::from_yaw(rng.uniform(-3, 3), rng.uniform(-50, 50), rng.uniform(-50, 50));
    const auto b = spatial_sync_queries({a}, p)[0];
    double na = 0, nb = 0;
    for (std::size_t k = 0; k < a.feature.size(); ++k) {
      na += a.feature[k] * a.feature[k];
      nb += b.feature[k] * b.feature[k];
    }
    CHECK(std::abs(std::sqrt(na) - std::sqrt(nb)) < 1e-9);
  }
}

TEST_CASE("spatial sync is a homomorphism") {
  auto rng = testing::test_rng(18);
  for (int i = 0; i < 500; ++i) {
    const auto q = random_query(rng, 8);
    const Pose a = Pose::from_yaw(rng.uniform(-3, 3), rng.uniform(-50, 50), rng.uniform(-50, 50));
    const Pose b = Pose::from_yaw(rng.uniform(-3, 3), rng.uniform(-50, 50), rng.uniform(-50, 50));
    const auto twice = spatial_sync_queries(spatial_sync_queries({q}, a), b)[0];
    const auto once = spatial_sync_queries({q}, core::compose(b, a))[0];
    CHECK(queries_near(twice, once, 1e-9));

    core::LaneQuery l;
    l.points = {{rng.uniform(-9, 9), rng.uniform(-9, 9)}, {rng.uniform(-9, 9), rng.uniform(-9, 9)}};
    l.feature = testing::random_feature(rng, 8);
    const auto lt = spatial_sync_lanes(spatial_sync_lanes({l}, a), b)[0];
    const auto lo = spatial_sync_lanes({l}, core::compose(b, a))[0];
    for (std::size_t k = 0; k < 2; ++k) CHECK((lt.points[k] - lo.points[k]).norm() < 1e-9);
    for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(lt.feature[k] - lo.feature[k]) < 1e-9);
  }
}

TEST_CASE("hungarian") {
  CostMatrix c(2, 2);
  c << 1, 2, 2, 4;
  const auto pairs = hungarian(c);
  CHECK(pairs == AssignmentPairs{{0, 1}, {1, 0}});
  CHECK(assignment_cost(c, pairs) == 4.0);

  CostMatrix d = CostMatrix::Constant(4, 4, 9.0);
  d.diagonal().setZero();
  CHECK(hungarian(d) == AssignmentPairs{{0, 0}, {1, 1}, {2, 2}, {3, 3}});

  CHECK(hungarian(CostMatrix(0, 0)).empty());
  CHECK(hungarian(CostMatrix(0, 3)).empty());

  CostMatrix rect(1, 3);
  rect << 5, 1, 3;
  CHECK(hungarian(rect) == AssignmentPairs{{0, 1}});

  CostMatrix forbidden(2, 2);
  forbidden << 1, kInf, kInf, kInf;
  CHECK(hungarian(forbidden) == AssignmentPairs{{0, 0}});

  // Prefer more permitted pairs over a cheaper partial assignment.
  CostMatrix more(2, 2);
  more << 0, 5, 5, kInf;
  CHECK(hungarian(more) == AssignmentPairs{{0, 1}, {1, 0}});

  CostMatrix ties = CostMatrix::Constant(3, 3, 1.0);
  CHECK(hungarian(ties) == AssignmentPairs{{0, 0}, {1, 1}, {2, 2}});
}

TEST_CASE("hungarian matches brute force") {
  auto rng = testing::test_rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto c = oracle::random_cost_matrix(rng, i % 2 == 1);
    const auto got = hungarian(c);
    const auto want = oracle::brute_force_assignment(c);
    CAPTURE(c);
    CHECK(static_cast<int>(got.size()) == want.pairs);
    CHECK(assignment_cost(c, got) == want.cost);
    CHECK(got == want.assignment);
  }
}

TEST_CASE("match_queries") {
  const auto far = match_queries({make_query(0, 0, 1), make_query(1, 0, 1)},
                                 {make_query(100, 0, 1), make_query(101, 0, 1)}, 2.0);
  CHECK(far.pairs.empty());
  CHECK(far.unmatched_infra == std::vector<int>{0, 1});
  CHECK(far.unmatched_ego == std::vector<int>{0, 1});

  const auto one = match_queries({make_query(1, 0, 1)}, {make_query(1.5, 0, 1)}, 2.0);
  CHECK(one.pairs == AssignmentPairs{{0, 0}});

  // Points placed so the distance matrix is [[1,2],[2,4]].
  const auto crossed = match_queries({make_query(0, 0, 1), make_query(1.5, std::sqrt(3.75), 1)},
                                     {make_query(1, 0, 1), make_query(-2, 0, 1)}, 5.0);
  CHECK(crossed.pairs == AssignmentPairs{{0, 1}, {1, 0}});
}

TEST_CASE("fuse_matched") {
  const FusionConfig cfg;
  auto q = make_query(3, 4, 0.6, 7);
  q.feature = {0.1, 0.2, 0.3, 0.4};
  q.heading = 0.7;
  CHECK(fuse_matched(q, q, cfg) == q);

  const auto sym = fuse_matched(make_query(0, 0, 0.5, 1), make_query(1, 0, 0.5, 2), cfg);
  CHECK(sym.ref_point.x() == doctest::Approx(0.5));
  CHECK(sym.track_id == 2);

  const auto weighted = fuse_matched(make_query(0, 0, 0.9, 1), make_query(1, 0, 0.3, 2), cfg);
  CHECK(weighted.ref_point.x() == doctest::Approx(0.25));
  CHECK(weighted.confidence == 0.9);

  auto hi = make_query(0, 0, 0.9, 1);
  hi.agent_class = core::AgentClass::Bicycle;
  CHECK(fuse_matched(hi, make_query(0, 0, 0.3, 2), cfg).agent_class == core::AgentClass::Bicycle);
  auto a = make_query(0, 0, 0.0, 1);
  a.heading = 0.2;
  auto b = make_query(2, 0, 0.0, 2);
  b.heading = -0.2;
  const auto zero = fuse_matched(a, b, cfg);
  CHECK(zero.ref_point.x() == doctest::Approx(1.0));
  CHECK(zero.heading == doctest::Approx(0.0));
}

TEST_CASE("fuse_agents") {
  FusionConfig cfg;
  TrackIdAllocator ids;
  const std::vector<core::AgentQuery> ego = {make_query(0, 0, 0.9, 20), make_query(5, 5, 0.2, 10),
                                             make_query(9, 9, 0.5, 5)};
  const auto only_ego = fuse_agents({}, ego, cfg, ids);
  REQUIRE(only_ego.size() == 2u);
  CHECK(only_ego[0].track_id == 5);
  CHECK(only_ego[1].track_id == 20);

  const auto only_infra = fuse_agents({make_query(1, 1, 0.5, 2'000'001), make_query(2, 2, 0.3, 2'000'002)}, {},
                                      cfg, ids);
  REQUIRE(only_infra.size() == 1u);  // 0.3 * 0.8 falls below the keep threshold
  CHECK(only_infra[0].confidence == doctest::Approx(0.4));
  CHECK(only_infra[0].track_id == TrackIdAllocator::kFirstId);

  const auto mixed = fuse_agents({make_query(0.5, 0, 0.7, 2'000'003), make_query(30, 30, 0.9, 2'000'004)},
                                 {make_query(0, 0, 0.7, 1'000'001), make_query(-30, 0, 0.8, 1'000'002)}, cfg, ids);
  CHECK(mixed.size() == 3u);
  CHECK(mixed[0].ref_point.x() == doctest::Approx(0.25));
  CHECK(mixed[2].track_id == TrackIdAllocator::kFirstId + 2);  // 2'000'001 and 2'000'002 already have ids
}

TEST_CASE("track ids for infrastructure-only tracks are stable") {
  TrackIdAllocator ids;
  CHECK(ids.id_for(42) == TrackIdAllocator::kFirstId);
  CHECK(ids.id_for(7) == TrackIdAllocator::kFirstId + 1);
  CHECK(ids.id_for(42) == TrackIdAllocator::kFirstId);
}

TEST_CASE("ego_filter") {
  std::vector<core::AgentQuery> qs = {make_query(0, 0, 1), make_query(10, 10, 1), make_query(2.7, 0, 1),
                                      make_query(2.9, 0, 1), make_query(0, 1.4, 1), make_query(0, 1.5, 1)};
  core::ProbGrid g(core::GridSpec::ego_default(), 1.0f);
  ego_filter(qs, g, EgoRect{});
  REQUIRE(qs.size() == 3u);
  CHECK(qs[0].ref_point.x() == 10);
  CHECK(qs[1].ref_point.x() == 2.9);
  CHECK(qs[2].ref_point.y() == 1.5);
  CHECK(g.at(*g.spec().world_to_cell(Vec2(0.1, 0.1))) == 0.0f);
  CHECK(g.at(*g.spec().world_to_cell(Vec2(2.6, 1.1))) == 0.0f);
  CHECK(g.at(*g.spec().world_to_cell(Vec2(3.1, 0.1))) == 1.0f);
  std::size_t zeroed = 0;
  for (float v : g.raw()) zeroed += v == 0.0f;
  CHECK(zeroed == 12u * 6u);  // centers within |x| <= 2.8, |y| <= 1.4
}

TEST_CASE("fuse_lanes") {
  core::LaneQuery a;
  a.points = {{0, 0}, {10, 0}};
  core::LaneQuery b;
  b.points = {{0, 20}, {10, 20}};
  CHECK(fuse_lanes({b}, {a}).size() == 2u);
  CHECK(fuse_lanes({a}, {a}).size() == 1u);

  auto near = a;
  near.points = {{0, 0.3}, {10, 0.3}};
  CHECK(fuse_lanes({near}, {a}).size() == 1u);
  auto off = a;
  off.points = {{0, 2}, {10, 2}};
  CHECK(fuse_lanes({off}, {a}).size() == 2u);
  auto cross = a;
  cross.lane_class = core::LaneClass::Crosswalk;
  CHECK(fuse_lanes({cross}, {a}).size() == 2u);

  CHECK(mean_polyline_distance({{5, 3}, {5, -1}}, a.points) == doctest::Approx(2.0));
}

TEST_CASE("warp_occupancy") {
  auto rng = testing::test_rng(31);
  const core::GridSpec g{20, 16, 0.5, -5, -4};
  const auto src = random_grid(rng, g);
  CHECK(warp_occupancy(src, Pose::identity(), g) == src);

  // +1 m in x is exactly two cells.
  const auto shifted = warp_occupancy(src, Pose::from_yaw(0, 1.0, 0), g);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      CHECK(shifted.at({r, c}) == (c < 2 ? 0.0f : src.at({r, c - 2})));
    }
  }

  const core::ProbGrid ones(g, 1.0f);
  const Pose p = Pose::from_yaw(0.4, 1.3, -0.7);
  const auto w = warp_occupancy(ones, p, g);
  const Pose inv = core::invert(p);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const Vec2 x = g.cell_to_center({r, c});
      const auto s = core::transform_point(inv, core::Vec3(x.x(), x.y(), 0));
      const bool inside = s.x() >= g.x_min && s.x() < g.x_max() && s.y() >= g.y_min && s.y() < g.y_max();
      CHECK(w.at({r, c}) == doctest::Approx(inside ? 1.0 : 0.0));
    }
  }

  // Different source and target grids: infra sensor frame into the ego frame.
  core::ProbGrid infra(core::GridSpec::infra_default(), 0.0f);
  infra.at(*infra.spec().world_to_cell(Vec2(30.25, 9.25))) = 1.0f;
  const auto ego = warp_occupancy(infra, Pose::from_yaw(0, -10, -9), core::GridSpec::ego_default());
  CHECK(ego.at(*ego.spec().world_to_cell(Vec2(20.25, 0.25))) == 1.0f);
}

TEST_CASE("fuse_occupancy") {
  const core::GridSpec g{4, 4, 1.0, 0, 0};
  auto rng = testing::test_rng(4);
  const auto a = random_grid(rng, g);
  const core::ProbGrid zero(g, 0.0f);
  CHECK(fuse_occupancy(a, zero, 0.5).first == a);

  core::ProbGrid x(g, 0.3f), y(g, 0.7f);
  const auto [f, m] = fuse_occupancy(x, y, 0.5);
  CHECK(f[0] == 0.7f);
  CHECK(m.cells[0] == 1);
  CHECK(m.threshold_used == 0.5);

  CHECK_THROWS_AS(fuse_occupancy(a, core::ProbGrid(core::GridSpec{3, 4, 1, 0, 0}), 0.5), std::invalid_argument);
}

TEST_CASE("max fusion algebra") {
  auto rng = testing::test_rng(77);
  const core::GridSpec g{37, 23, 0.5, 0, 0};
  for (int i = 0; i < 200; ++i) {
    const auto a = random_grid(rng, g);
    const auto b = random_grid(rng, g);
    const auto c = random_grid(rng, g);
    const auto ab = fuse_occupancy(a, b, 0.5);
    const auto ba = fuse_occupancy(b, a, 0.5);
    CHECK(ab.first == ba.first);
    CHECK(ab.second == ba.second);
    CHECK(fuse_occupancy(a, a, 0.5).first == a);
    CHECK(fuse_occupancy(fuse_occupancy(a, b, 0.5).first, c, 0.5).first ==
          fuse_occupancy(a, fuse_occupancy(b, c, 0.5).first, 0.5).first);
    // Raising an input never lowers the output.
    auto a_up = a;
    for (std::size_t k = 0; k < a_up.size(); ++k) a_up[k] = std::max(a_up[k], c[k]);
    const auto up = fuse_occupancy(a_up, b, 0.5);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(up.first[k] >= ab.first[k]);
      CHECK(up.second.cells[k] >= ab.second.cells[k]);
    }
  }
}

TEST_CASE("ego fusion step") {
  scenario::PerceivedFrame ego;
  ego.timestamp = 1.0;
  ego.occupancy = core::OccupancyMessage(core::GridSpec::ego_default(), 1.0);
  ego.agent_queries = {make_query(10, 0, 0.9, 1'000'001)};
  EgoFusion fusion;

  const auto alone = fusion.step(ego, Pose::identity(), std::nullopt);
  CHECK(alone.agents.size() == 1u);
  CHECK(alone.synced_infra.empty());
  CHECK(alone.timestamp == 1.0);

  // Infrastructure at world (-20,-9), reporting an agent 0.5 s earlier that
  // moves +4 m/s in x; the ego sits at the world origin.
  infra::V2XPayload p;
  p.header.timestamp = 1.5;
  p.header.world_from_sensor = Pose::from_yaw(0, -20, -9);
  auto q = make_query(40, 9, 0.8, 2'000'005);
  q.flow_ref = Vec2(4, 0);
  q.timestamp = 1.5;
  p.agent_queries = {q};
  ego.timestamp = 2.0;
  ego.occupancy.timestamp = 2.0;
  const auto fused = fusion.step(ego, Pose::identity(), p);
  REQUIRE(fused.synced_infra.size() == 1u);
  CHECK((fused.synced_infra[0].ref_point - core::Vec3(22, 0, 0)).norm() < 1e-9);
  CHECK(fused.agents.size() == 2u);

  FusionConfig stale;
  stale.flow_compensation = false;
  EgoFusion uncompensated(stale);
  const auto raw = uncompensated.step(ego, Pose::identity(), p);
  CHECK((raw.synced_infra[0].ref_point - core::Vec3(20, 0, 0)).norm() < 1e-9);

  ego.timestamp = 1.0;
  CHECK_THROWS(EgoFusion{}.step(ego, Pose::identity(), p));
}

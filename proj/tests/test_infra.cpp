#include <doctest.h>

#include "coopsim/infra/infra_node.hpp"
#include "coopsim/scenario/perception.hpp"
#include "helpers.hpp"

using namespace coopsim;
using infra::estimate_occupancy_flow;
using infra::estimate_query_flow;
using infra::filter_queries;
using testing::make_query;

namespace {

scenario::PerceivedFrame frame_with(std::vector<core::AgentQuery> qs, double t) {
  scenario::PerceivedFrame f;
  f.agent_queries = std::move(qs);
  f.timestamp = t;
  f.occupancy = core::OccupancyMessage(core::GridSpec{4, 4, 1.0, 0.0, 0.0}, t);
  return f;
}

}  // namespace

TEST_CASE("filter_queries") {
  const std::vector<core::AgentQuery> qs = {make_query(0, 0, 0.9, 1), make_query(0, 0, 0.3, 2),
                                            make_query(0, 0, 0.5, 3)};
  CHECK(filter_queries(qs, 0.0) == qs);
  CHECK(filter_queries(qs, 1.01).empty());
  const auto kept = filter_queries(qs, 0.5);
  REQUIRE(kept.size() == 2u);
  CHECK(kept[0].track_id == 1);
  CHECK(kept[1].track_id == 3);
}

TEST_CASE("estimate_query_flow") {
  auto a = make_query(5, 5, 0.9, 1);
  const auto f0 = frame_with({a}, 0.0);
  const auto still = estimate_query_flow(f0, frame_with({a}, 0.5), 0.5);
  CHECK(still.agent_queries[0].flow_ref == core::Vec2(0, 0));

  auto b0 = make_query(10, 0, 0.9, 2);
  auto b1 = make_query(11, 0, 0.9, 2);
  b1.feature = {1.0, 0.5, 0.0, 0.0};
  const auto moved = estimate_query_flow(frame_with({b0}, 0.0), frame_with({b1}, 0.5), 0.5);
  CHECK(moved.agent_queries[0].flow_ref == core::Vec2(2, 0));
  CHECK(moved.agent_queries[0].flow_feature == std::vector<double>{2.0, 1.0, 0.0, 0.0});

  auto c = make_query(0, 0, 0.9, 3);
  c.velocity = core::Vec2(3, 0);
  const auto fresh = estimate_query_flow(f0, frame_with({c}, 0.5), 0.5);
  CHECK(fresh.agent_queries[0].flow_ref == core::Vec2(3, 0));
  CHECK(fresh.agent_queries[0].flow_feature == std::vector<double>(4, 0.0));

  CHECK_THROWS_AS(estimate_query_flow(f0, f0, 0.0), std::invalid_argument);
}

TEST_CASE("estimate_occupancy_flow") {
  const core::GridSpec g{4, 4, 1.0, 0.0, 0.0};
  core::ProbGrid prev(g, 0.0f), curr(g, 0.0f);
  CHECK(estimate_occupancy_flow(prev, prev, 0.5) == core::ProbGrid(g, 0.0f));

  prev.at({1, 2}) = 0.2f;
  curr.at({1, 2}) = 0.6f;
  const auto p1 = estimate_occupancy_flow(prev, curr, 2.0);
  CHECK(p1.at({1, 2}) == doctest::Approx(0.2f));
  CHECK(p1.at({0, 0}) == 0.0f);

  CHECK_THROWS_AS(estimate_occupancy_flow(prev, curr, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_occupancy_flow(prev, core::ProbGrid(core::GridSpec{3, 4, 1.0, 0, 0}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("build_payload") {
  const auto pose = core::Pose::from_yaw(0.2, -20, -9);
  const auto empty = infra::build_payload(frame_with({}, 2.5), pose, 9, 0.3);
  CHECK(empty.agent_queries.empty());
  CHECK(empty.lane_queries.empty());
  REQUIRE(empty.occupancy.has_value());
  for (float v : empty.occupancy->p0.raw()) CHECK(v == 0.0f);
  for (float v : empty.occupancy->p1.raw()) CHECK(v == 0.0f);
  CHECK(empty.header.timestamp == 2.5);
  CHECK(empty.header.sender_id == 9u);
  CHECK(empty.header.world_from_sensor == pose);

  std::vector<core::AgentQuery> qs;
  for (double c : {0.9, 0.1, 0.5, 0.2, 0.7}) qs.push_back(make_query(0, 0, c));
  const auto p = infra::build_payload(frame_with(qs, 1.0), pose, 1, 0.3);
  CHECK(p.agent_queries.size() == 3u);
  for (const auto& q : p.agent_queries) CHECK(q.timestamp == 1.0);
}

TEST_CASE("infra node estimates flow from its previous frame") {
  infra::InfraNode node(1, core::Pose::identity(), 0.0);
  auto q = make_query(10, 0, 0.9, 5);
  q.velocity = core::Vec2(4, 0);
  auto f0 = frame_with({q}, 0.0);
  f0.occupancy.p0.at({0, 0}) = 0.5f;
  const auto first = node.process(f0);
  CHECK(first.agent_queries[0].flow_ref == core::Vec2(4, 0));  // no history yet

  q.ref_point.x() = 11.0;
  auto f1 = frame_with({q}, 0.5);
  f1.occupancy.p0.at({0, 0}) = 1.0f;
  const auto second = node.process(f1);
  CHECK(second.agent_queries[0].flow_ref == core::Vec2(2, 0));
  CHECK(second.occupancy->p1.at({0, 0}) == 1.0f);
}

TEST_CASE("flow forecast is cheaper than explicit forecast") {
  const auto g = core::GridSpec::infra_default();
  CHECK(infra::flow_forecast_floats(g) == 80000u);
  CHECK(infra::explicit_forecast_floats(g, 5) == 200000u);
  CHECK(infra::explicit_forecast_floats(g, 2) == infra::flow_forecast_floats(g));
}

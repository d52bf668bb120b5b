#include "coopsim/harness/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "coopsim/channel/channel.hpp"
#include "coopsim/fusion/pipeline.hpp"
#include "coopsim/infra/infra_node.hpp"
#include "coopsim/planner/planner.hpp"
#include "coopsim/scenario/perception.hpp"
#include "coopsim/scenario/scenario_io.hpp"

namespace coopsim::harness {

using nlohmann::json;

namespace {

constexpr std::uint32_t kInfraSenderId = 1;

core::Vec2 to_frame(const core::Pose& frame_from_world, const core::Vec2& p) {
  return core::transform_point(frame_from_world, core::Vec3(p.x(), p.y(), 0.0)).head<2>();
}

bool inside(const core::GridSpec& g, const core::Vec2& p) {
  return p.x() >= g.x_min && p.x() < g.x_max() && p.y() >= g.y_min && p.y() < g.y_max();
}

// What actually goes on the link for the given mode and flags.
infra::V2XPayload prepare_payload(infra::V2XPayload p, Mode mode, const TransmitFlags& flags) {
  if (!flags.agents) p.agent_queries.clear();
  if (!flags.lanes) p.lane_queries.clear();
  if (!flags.occupancy) p.occupancy.reset();
  if (mode == Mode::LateFusion) {
    // Plain boxes: no features, no motion, no map or occupancy.
    for (auto& q : p.agent_queries) {
      q.feature.clear();
      q.flow_feature.clear();
      q.velocity.setZero();
      q.flow_ref.setZero();
    }
    p.lane_queries.clear();
    p.occupancy.reset();
  }
  return p;
}

struct Accumulator {
  std::vector<metrics::Detection> detections;
  std::vector<metrics::GroundTruthBox> gts;
  std::vector<std::vector<metrics::TrackPoint>> tracks, gt_tracks;
  std::uint64_t matched = 0, gt_count = 0;
  metrics::IouCounts near, far;
  metrics::LaneIouCounts lanes;
  std::array<double, 3> l2{};
  std::array<std::uint64_t, 3> collisions{}, offroad{};
  std::uint64_t plan_samples = 0;
  double bps_sum = 0.0, bytes_sum = 0.0;
  std::size_t payloads = 0;
  double ref_err = 0.0, ref_expected = 0.0;
  std::size_t ref_samples = 0;
};

}  // namespace

MetricRow flatten(const metrics::EvalReport& r) {
  MetricRow row;
  double ap_sum = 0.0;
  for (auto cls : core::kAgentClasses) {
    const std::string name(core::to_string(cls));
    const auto it = r.ap_per_class.find(name);
    const double v = it == r.ap_per_class.end() ? 0.0 : it->second;
    row.emplace_back("ap_" + name, v);
    ap_sum += v;
  }
  row.emplace_back("map", ap_sum / static_cast<double>(core::kAgentClasses.size()));
  row.emplace_back("mota", r.mota);
  row.emplace_back("id_switches", r.id_switches);
  row.emplace_back("detection_recall", r.detection_recall);
  row.emplace_back("iou_lane", r.iou_lane);
  row.emplace_back("iou_crosswalk", r.iou_crosswalk);
  row.emplace_back("iou_n", r.iou_n);
  row.emplace_back("iou_f", r.iou_f);
  const auto horizon_block = [&](const char* prefix, const std::map<std::string, double>& m) {
    double sum = 0.0;
    for (double h : metrics::kPlanningHorizons) {
      const auto key = metrics::horizon_key(h);
      const auto it = m.find(key);
      const double v = it == m.end() ? 0.0 : it->second;
      row.emplace_back(std::string(prefix) + "_" + key, v);
      sum += v;
    }
    row.emplace_back(std::string(prefix) + "_avg", sum / static_cast<double>(metrics::kPlanningHorizons.size()));
  };
  horizon_block("l2", r.l2_at);
  horizon_block("collision", r.collision_rate_at);
  horizon_block("offroad", r.offroad_rate_at);
  row.emplace_back("avg_bps", r.avg_bps);
  return row;
}

VariantResult aggregate(std::string name, std::vector<SeedResult> seeds) {
  VariantResult v;
  v.name = std::move(name);
  v.seeds = std::move(seeds);
  if (v.seeds.empty()) return v;
  const double n = static_cast<double>(v.seeds.size());
  v.mean = flatten(v.seeds.front().report);
  for (auto& [k, x] : v.mean) x = 0.0;
  v.stddev = v.mean;
  for (const auto& s : v.seeds) {
    const MetricRow row = flatten(s.report);
    for (std::size_t i = 0; i < row.size(); ++i) v.mean[i].second += row[i].second;
    v.cost.payloads += s.cost.payloads;
    v.cost.mean_body_bytes += s.cost.mean_body_bytes;
    v.cost.avg_bps += s.cost.avg_bps;
  }
  for (auto& [k, x] : v.mean) x /= n;
  v.cost.mean_body_bytes /= n;
  v.cost.avg_bps /= n;
  for (const auto& s : v.seeds) {
    const MetricRow row = flatten(s.report);
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double d = row[i].second - v.mean[i].second;
      v.stddev[i].second += d * d;
    }
  }
  for (auto& [k, x] : v.stddev) x = std::sqrt(x / n);
  return v;
}

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::Bandwidth: return "bandwidth";
    case Axis::Latency: return "latency";
    case Axis::Corruption: return "corruption";
  }
  return "unknown";
}

Axis axis_from_string(std::string_view s) {
  for (auto a : {Axis::Bandwidth, Axis::Latency, Axis::Corruption}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown sweep axis: " + std::string(s));
}

int default_workers() {
  if (const char* env = std::getenv("COOPSIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const scenario::Scenario* fixed) {
  scenario::Scenario generated;
  if (fixed == nullptr) {
    scenario::ScenarioConfig sc = cfg.scenario;
    sc.seed = seed;
    generated = scenario::generate_scenario(sc);
    fixed = &generated;
  }
  const scenario::Scenario& scn = *fixed;
  const auto& frames = scn.frames;
  const int n_frames = static_cast<int>(frames.size());

  scenario::SensorSpec ego_sensor = scenario::default_ego_sensor();
  scenario::SensorSpec infra_sensor = scenario::default_infra_sensor();
  if (cfg.noiseless_sensors) {
    ego_sensor = scenario::noiseless(ego_sensor);
    infra_sensor = scenario::noiseless(infra_sensor);
  }
  const core::GridSpec grid = ego_sensor.grid;

  const bool transmits = cfg.mode != Mode::NoFusion;
  channel::ChannelConfig chan_cfg = cfg.channel;
  chan_cfg.seed = seed;
  channel::Channel link(chan_cfg, cfg.mode == Mode::LateFusion ? 0 : ego_sensor.feature_dim);
  infra::InfraNode node(kInfraSenderId, scenario::world_from_sensor(frames.front(), infra_sensor));
  fusion::EgoFusion ego_fusion(cfg.fusion);
  const planner::Planner planner(cfg.planner);
  const int plan_steps = cfg.planner.steps();
  const int frame_stride = static_cast<int>(std::llround(cfg.planner.dt / scn.config.dt));
  if (frame_stride < 1 || std::abs(frame_stride * scn.config.dt - cfg.planner.dt) > 1e-9) {
    throw std::invalid_argument("planner dt must be a whole multiple of the scenario dt");
  }

  Accumulator acc;
  for (int f = 0; f < n_frames; ++f) {
    const scenario::WorldFrame& frame = frames[f];
    auto ego_rng = scenario::perception_stream(seed, ego_sensor.view_id, f);
    const scenario::PerceivedFrame ego_view = scenario::perceive(frame, ego_sensor, ego_rng);

    std::optional<infra::V2XPayload> received;
    if (transmits) {
      auto infra_rng = scenario::perception_stream(seed, infra_sensor.view_id, f);
      const scenario::PerceivedFrame infra_view = scenario::perceive(frame, infra_sensor, infra_rng);
      const infra::V2XPayload sent = prepare_payload(node.process(infra_view), cfg.mode, cfg.transmit);
      channel::CostReport c = link.submit(sent, frame.time);
      if (cfg.mode == Mode::DenseBev) {
        c = channel::dense_tensor_cost(core::kDefaultFeatureDim, grid.height, grid.width, chan_cfg.frequency_hz);
      } else if (cfg.mode == Mode::LateFusion) {
        // Billed as a box list; with no features or lanes the geometry
        // bytes count the boxes that made it onto the link.
        c = channel::box_list_cost(c.geometry_bytes / channel::kAgentGeometryBytes, chan_cfg.frequency_hz);
      }
      acc.bps_sum += c.bps;
      acc.bytes_sum += static_cast<double>(c.total_body_bytes);
      ++acc.payloads;
      auto arrived = link.poll(frame.time);
      if (!arrived.empty()) received = std::move(arrived.back());
    }

    const fusion::FusedScene fused = ego_fusion.step(ego_view, frame.ego_pose, received);
    const core::Pose ego_from_world = core::invert(frame.ego_pose);

    // Latency diagnostics.
    if (received) {
      const double lag = fused.timestamp - received->header.timestamp;
      for (const auto& q : fused.synced_infra) {
        const std::int64_t id = static_cast<std::int64_t>(q.track_id) - scenario::kInfraViewPrefix;
        if (q.track_id <= 0 || id <= 0) continue;
        for (const auto& a : frame.agents) {
          if (a.id != id) continue;
          acc.ref_err += (q.ref_point.head<2>() - to_frame(ego_from_world, a.position)).norm();
          acc.ref_expected += a.speed * lag;
          ++acc.ref_samples;
        }
      }
    }

    // Detection and tracking inside the ego grid.
    std::vector<metrics::TrackPoint> track_pts, gt_pts;
    std::vector<core::Vec2> pred_centers, gt_centers;
    for (const auto& q : fused.agents) {
      const core::Vec2 c = q.ref_point.head<2>();
      if (!inside(grid, c)) continue;
      acc.detections.push_back({f, {c, q.box_size.length, q.box_size.width, q.heading}, q.confidence, q.agent_class});
      track_pts.push_back({q.track_id, c});
      pred_centers.push_back(c);
    }
    for (const auto& a : frame.agents) {
      const core::Vec2 c = to_frame(ego_from_world, a.position);
      if (!inside(grid, c)) continue;
      const double heading = core::wrap_angle(a.heading - frame.ego.heading);
      acc.gts.push_back({f, {c, a.box_size.length, a.box_size.width, heading}, a.agent_class});
      gt_pts.push_back({a.id, c});
      gt_centers.push_back(c);
    }
    acc.matched += static_cast<std::uint64_t>(metrics::matched_count(pred_centers, gt_centers));
    acc.gt_count += gt_centers.size();
    acc.tracks.push_back(std::move(track_pts));
    acc.gt_tracks.push_back(std::move(gt_pts));

    // Occupancy.
    const core::MaskGrid gt_occ = scenario::rasterize_agents(frame, grid, frame.ego_pose);
    acc.near += metrics::occupancy_iou_counts(fused.mask.cells, gt_occ, metrics::kNearHalfExtent);
    acc.far += metrics::occupancy_iou_counts(fused.mask.cells, gt_occ, metrics::kFarHalfExtent);

    // Map.
    std::vector<metrics::LaneLine> pred_lanes, gt_lanes;
    for (const auto& l : fused.lanes) pred_lanes.push_back({l.points, l.lane_class});
    for (const auto& l : frame.lanes()) {
      metrics::LaneLine line{{}, l.lane_class};
      for (const auto& p : l.points) line.points.push_back(to_frame(ego_from_world, p));
      gt_lanes.push_back(std::move(line));
    }
    acc.lanes += metrics::lane_iou(pred_lanes, gt_lanes, grid);

    // Planning, where the ground truth covers the full horizon.
    const int last = f + (plan_steps - 1) * frame_stride;
    if (last < n_frames) {
      const auto masks = planner::forecast_agents(fused.agents, cfg.planner.horizon, cfg.planner.dt, grid,
                                                  &fused.occupancy, cfg.fusion.occ_threshold);
      const planner::DrivableView road{&scn.road->drivable_mask, frame.ego_pose};
      const planner::PlanResult plan = planner.plan(masks, road, scn.config.ego_command, frame.ego.speed);
      std::vector<core::Vec2> gt_future;
      std::vector<core::MaskGrid> gt_masks;
      for (int k = 0; k < plan_steps; ++k) {
        const scenario::WorldFrame& fk = frames[f + k * frame_stride];
        gt_future.push_back(to_frame(ego_from_world, fk.ego.position));
        gt_masks.push_back(scenario::rasterize_agents(fk, grid, frame.ego_pose));
      }
      const metrics::PlanningSample s = metrics::planning_metrics(plan.trajectory, gt_future, gt_masks, road, cfg.planner);
      for (std::size_t h = 0; h < 3; ++h) {
        acc.l2[h] += s.l2[h];
        acc.collisions[h] += s.collision[h];
        acc.offroad[h] += s.offroad[h];
      }
      ++acc.plan_samples;
    }
  }

  SeedResult out;
  out.seed = seed;
  metrics::EvalReport& r = out.report;
  for (const auto& [cls, ap] : metrics::average_precision_per_class(acc.detections, acc.gts)) {
    r.ap_per_class[std::string(core::to_string(cls))] = ap;
  }
  const metrics::TrackingResult tr = metrics::tracking_metrics(acc.tracks, acc.gt_tracks);
  r.mota = tr.mota;
  r.id_switches = tr.id_switches;
  r.detection_recall = acc.gt_count == 0 ? 0.0 : static_cast<double>(acc.matched) / static_cast<double>(acc.gt_count);
  r.iou_lane = acc.lanes.lane.iou();
  r.iou_crosswalk = acc.lanes.crosswalk.iou();
  r.iou_n = acc.near.iou();
  r.iou_f = acc.far.iou();
  const double ns = acc.plan_samples == 0 ? 1.0 : static_cast<double>(acc.plan_samples);
  for (std::size_t h = 0; h < 3; ++h) {
    const auto key = metrics::horizon_key(metrics::kPlanningHorizons[h]);
    r.l2_at[key] = acc.l2[h] / ns;
    r.collision_rate_at[key] = static_cast<double>(acc.collisions[h]) / ns;
    r.offroad_rate_at[key] = static_cast<double>(acc.offroad[h]) / ns;
  }
  if (acc.payloads > 0) {
    r.avg_bps = acc.bps_sum / static_cast<double>(acc.payloads);
    out.cost.payloads = acc.payloads;
    out.cost.mean_body_bytes = acc.bytes_sum / static_cast<double>(acc.payloads);
    out.cost.avg_bps = r.avg_bps;
  }
  if (acc.ref_samples > 0) {
    out.infra_ref_error = acc.ref_err / static_cast<double>(acc.ref_samples);
    out.infra_ref_expected = acc.ref_expected / static_cast<double>(acc.ref_samples);
  }
  out.infra_ref_samples = acc.ref_samples;
  return out;
}

std::vector<SeedResult> run_seeds(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  std::optional<scenario::Scenario> fixed;
  if (cfg.scenario_path) fixed = scenario::load_scenario(*cfg.scenario_path);

  const std::size_t n = cfg.seeds.size();
  std::vector<SeedResult> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = run_seed(cfg, cfg.seeds[i], fixed ? &*fixed : nullptr);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

RunRecord run_mode(const ExperimentConfig& cfg, int workers) {
  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.mode = std::string(to_string(cfg.mode));
  rec.variants.push_back(aggregate(rec.mode, run_seeds(cfg, workers)));
  return rec;
}

ExperimentConfig sweep_config(Axis axis, double value, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  switch (axis) {
    case Axis::Bandwidth:
      if (!(value >= 0.0)) throw ConfigError("bandwidth values must be >= 0 Mb/s");
      c.channel.bandwidth_budget = channel::budget_from_mbps(value, c.channel.frequency_hz);
      break;
    case Axis::Latency:
      if (!(value >= 0.0)) throw ConfigError("latency values must be >= 0 s");
      c.channel.latency = value;
      break;
    case Axis::Corruption:
      if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("corruption values must lie in [0, 1]");
      c.channel.drop_fraction = value;
      c.transmit = {true, false, false};
      break;
  }
  return c;
}

std::vector<RunRecord> sweep(Axis axis, const std::vector<double>& values, const ExperimentConfig& base,
                             int workers) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<RunRecord> out;
  for (double v : values) {
    const ExperimentConfig c = sweep_config(axis, v, base);
    RunRecord rec = run_mode(c, workers);
    rec.axis = std::string(to_string(axis));
    rec.value = v;
    if (axis == Axis::Latency && c.mode != Mode::NoFusion) {
      ExperimentConfig raw = c;
      raw.fusion.flow_compensation = false;
      rec.variants.push_back(aggregate(rec.mode + "_no_flow", run_seeds(raw, workers)));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

json row_to_json(const MetricRow& row) {
  json j = json::array();
  for (const auto& [k, v] : row) j.push_back({k, v});
  return j;
}

MetricRow row_from_json(const json& j) {
  MetricRow row;
  for (const auto& e : j) row.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
  return row;
}

json cost_to_json(const CostSummary& c) {
  return {{"payloads", c.payloads}, {"mean_body_bytes", c.mean_body_bytes}, {"avg_bps", c.avg_bps}};
}

CostSummary cost_from_json(const json& j) {
  return {j.at("payloads").get<std::size_t>(), j.at("mean_body_bytes").get<double>(), j.at("avg_bps").get<double>()};
}

json report_to_json(const metrics::EvalReport& r) {
  return {{"ap_per_class", r.ap_per_class},
          {"mota", r.mota},
          {"id_switches", r.id_switches},
          {"detection_recall", r.detection_recall},
          {"iou_lane", r.iou_lane},
          {"iou_crosswalk", r.iou_crosswalk},
          {"iou_n", r.iou_n},
          {"iou_f", r.iou_f},
          {"l2_at", r.l2_at},
          {"collision_rate_at", r.collision_rate_at},
          {"offroad_rate_at", r.offroad_rate_at},
          {"avg_bps", r.avg_bps}};
}

metrics::EvalReport report_from_json(const json& j) {
  metrics::EvalReport r;
  r.ap_per_class = j.at("ap_per_class").get<std::map<std::string, double>>();
  r.mota = j.at("mota").get<double>();
  r.id_switches = j.at("id_switches").get<int>();
  r.detection_recall = j.at("detection_recall").get<double>();
  r.iou_lane = j.at("iou_lane").get<double>();
  r.iou_crosswalk = j.at("iou_crosswalk").get<double>();
  r.iou_n = j.at("iou_n").get<double>();
  r.iou_f = j.at("iou_f").get<double>();
  r.l2_at = j.at("l2_at").get<std::map<std::string, double>>();
  r.collision_rate_at = j.at("collision_rate_at").get<std::map<std::string, double>>();
  r.offroad_rate_at = j.at("offroad_rate_at").get<std::map<std::string, double>>();
  r.avg_bps = j.at("avg_bps").get<double>();
  return r;
}

}  // namespace

json to_json(const RunRecord& r) {
  json variants = json::array();
  for (const auto& v : r.variants) {
    json seeds = json::array();
    for (const auto& s : v.seeds) {
      seeds.push_back({{"seed", s.seed},
                       {"report", report_to_json(s.report)},
                       {"cost", cost_to_json(s.cost)},
                       {"infra_ref_error", s.infra_ref_error},
                       {"infra_ref_expected", s.infra_ref_expected},
                       {"infra_ref_samples", s.infra_ref_samples}});
    }
    variants.push_back({{"name", v.name},
                        {"mean", row_to_json(v.mean)},
                        {"stddev", row_to_json(v.stddev)},
                        {"cost", cost_to_json(v.cost)},
                        {"seeds", std::move(seeds)}});
  }
  return {{"config_hash", r.config_hash},
          {"mode", r.mode},
          {"axis", r.axis},
          {"value", r.value ? json(*r.value) : json(nullptr)},
          {"variants", std::move(variants)}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.axis = j.at("axis").get<std::string>();
  if (!j.at("value").is_null()) r.value = j.at("value").get<double>();
  for (const auto& jv : j.at("variants")) {
    VariantResult v;
    v.name = jv.at("name").get<std::string>();
    v.mean = row_from_json(jv.at("mean"));
    v.stddev = row_from_json(jv.at("stddev"));
    v.cost = cost_from_json(jv.at("cost"));
    for (const auto& js : jv.at("seeds")) {
      SeedResult s;
      s.seed = js.at("seed").get<std::uint64_t>();
      s.report = report_from_json(js.at("report"));
      s.cost = cost_from_json(js.at("cost"));
      s.infra_ref_error = js.at("infra_ref_error").get<double>();
      s.infra_ref_expected = js.at("infra_ref_expected").get<double>();
      s.infra_ref_samples = js.at("infra_ref_samples").get<std::size_t>();
      v.seeds.push_back(std::move(s));
    }
    r.variants.push_back(std::move(v));
  }
  return r;
}

json records_to_json(const std::vector<RunRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return {{"format", "coopsim-report/1"}, {"records", std::move(arr)}};
}

std::vector<RunRecord> records_from_json(const json& j) {
  if (j.value("format", "") != "coopsim-report/1") throw std::invalid_argument("not a coopsim report");
  std::vector<RunRecord> out;
  for (const auto& r : j.at("records")) out.push_back(record_from_json(r));
  return out;
}

}  // namespace coopsim::harness

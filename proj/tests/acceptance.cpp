// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "coopsim/channel/channel.hpp"
#include "coopsim/channel/codec.hpp"
#include "coopsim/fusion/fusion.hpp"
#include "coopsim/fusion/hungarian.hpp"
#include "coopsim/fusion/sync.hpp"
#include "coopsim/harness/config.hpp"
#include "coopsim/harness/report.hpp"
#include "coopsim/harness/runner.hpp"
#include "coopsim/metrics/metrics.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace coopsim;
using harness::Axis;
using harness::ExperimentConfig;
using harness::Mode;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::vector<std::uint64_t> seed_range(int n) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i) s[i] = static_cast<std::uint64_t>(i);
  return s;
}

ExperimentConfig base_config(Mode mode, int n_seeds) {
  ExperimentConfig c;
  c.mode = mode;
  c.seeds = seed_range(n_seeds);
  return c;
}

double metric(const harness::VariantResult& v, const std::string& name) {
  for (const auto& [k, x] : v.mean)
    if (k == name) return x;
  throw std::logic_error("no metric " + name);
}

// Per-seed evaluation reports, which is everything the pipeline outputs.
std::vector<metrics::EvalReport> reports(const harness::VariantResult& v) {
  std::vector<metrics::EvalReport> out;
  for (const auto& s : v.seeds) out.push_back(s.report);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Outcome cost_arithmetic() {
  Outcome o;
  infra::V2XPayload lane_only;
  core::LaneQuery l;
  l.points = {{0, 0}, {1, 0}};
  l.feature.assign(256, 0.25);
  lane_only.lane_queries = {l};
  const auto with = channel::encode(lane_only).size();
  lane_only.lane_queries[0].feature.clear();
  const auto block = with - channel::encode(lane_only).size();
  o.require(block == 1024, "feature block bytes");

  infra::V2XPayload one;
  core::AgentQuery q;
  q.feature.assign(256, 0.0);
  one.agent_queries = {q};
  o.require(channel::cost(one, 2.0).feature_bytes == 1024, "agent feature cost");

  const auto grid = channel::dense_tensor_cost(24, 36, 36, 2.0);
  o.require(grid.total_body_bytes == 124416, "grid bytes");
  o.require(grid.bps == 248832.0, "grid B/s");
  // The quoted 1.2e5 and 2.4e5 keep two significant digits, truncated.
  o.require(std::floor(grid.total_body_bytes / 1e4) == 12.0, "1.2e5 to two digits");
  o.require(std::floor(grid.bps / 1e4) == 24.0, "2.4e5 to two digits");
  o.detail << "block=" << block << " B, grid=" << grid.total_body_bytes << " B, " << fmt(grid.bps) << " B/s";
  return o;
}

Outcome hybrid_vs_dense() {
  Outcome o;
  const auto uni = harness::run_mode(base_config(Mode::UniV2X, 3), harness::default_workers());
  const auto dense = harness::run_mode(base_config(Mode::DenseBev, 3), harness::default_workers());
  const double ratio = dense.variants[0].cost.avg_bps / uni.variants[0].cost.avg_bps;
  o.require(ratio >= 50.0, "ratio >= 50");
  o.detail << "univ2x " << fmt(uni.variants[0].cost.avg_bps) << " B/s, dense_bev "
           << fmt(dense.variants[0].cost.avg_bps) << " B/s, ratio " << fmt(ratio);
  return o;
}

Outcome corruption() {
  Outcome o;
  const int workers = harness::default_workers();
  const std::vector<double> drops = {0.0, 0.1, 0.3, 0.5, 0.7, 1.0};
  const auto recs = harness::sweep(Axis::Corruption, drops, base_config(Mode::UniV2X, 20), workers);
  const auto none = harness::run_mode(base_config(Mode::NoFusion, 20), workers);
  double prev_recall = 2.0, prev_col = -1.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double recall = metric(recs[i].variants[0], "detection_recall");
    const double col = metric(recs[i].variants[0], "collision_avg");
    o.require(recall <= prev_recall, "recall non-increasing at drop " + fmt(drops[i]));
    o.require(col >= prev_col, "collision non-decreasing at drop " + fmt(drops[i]));
    o.detail << fmt(drops[i]) << ":recall=" << fmt(recall) << ",col=" << fmt(col) << " ";
    prev_recall = recall;
    prev_col = col;
  }
  o.require(reports(recs.back().variants[0]) == reports(none.variants[0]), "drop 1.0 identical to no_fusion");
  return o;
}

Outcome latency() {
  Outcome o;
  auto cfg = base_config(Mode::UniV2X, 20);
  cfg.scenario.constant_velocity = true;
  cfg.noiseless_sensors = true;
  const auto rec = harness::sweep(Axis::Latency, {0.5}, cfg, harness::default_workers()).at(0);
  const auto& comp = rec.variants.at(0);
  const auto& raw = rec.variants.at(1);
  const auto weighted = [](const harness::VariantResult& v, double harness::SeedResult::*field) {
    double sum = 0.0, n = 0.0;
    for (const auto& s : v.seeds) {
      sum += s.*field * static_cast<double>(s.infra_ref_samples);
      n += static_cast<double>(s.infra_ref_samples);
    }
    return n > 0 ? sum / n : 0.0;
  };
  const double comp_err = weighted(comp, &harness::SeedResult::infra_ref_error);
  const double raw_err = weighted(raw, &harness::SeedResult::infra_ref_error);
  const double expected = weighted(raw, &harness::SeedResult::infra_ref_expected);
  const double rc = metric(comp, "detection_recall");
  const double rr = metric(raw, "detection_recall");
  o.require(expected > 0.0, "infrastructure agents observed");
  o.require(comp_err < 0.05, "compensated error < 0.05 m");
  o.require(std::abs(raw_err - expected) <= 0.1 * expected, "uncompensated error within 10% of speed*0.5");
  o.require(rc >= rr, "recall with compensation >= without");
  o.detail << "compensated " << fmt(comp_err) << " m, uncompensated " << fmt(raw_err) << " m vs speed*0.5 "
           << fmt(expected) << " m, recall " << fmt(rc) << " vs " << fmt(rr);
  return o;
}

Outcome bandwidth() {
  Outcome o;
  const int workers = harness::default_workers();
  const std::vector<double> budgets = {0.0, 0.3, 0.5, 0.7, 1.0};
  const auto recs = harness::sweep(Axis::Bandwidth, budgets, base_config(Mode::UniV2X, 20), workers);
  const auto none = harness::run_mode(base_config(Mode::NoFusion, 20), workers);
  double prev_recall = -1.0, prev_iou = -1.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double recall = metric(recs[i].variants[0], "detection_recall");
    const double iou = metric(recs[i].variants[0], "iou_f");
    o.require(recall >= prev_recall, "recall non-decreasing at " + fmt(budgets[i]) + " Mb/s");
    o.require(iou >= prev_iou, "IoU-f non-decreasing at " + fmt(budgets[i]) + " Mb/s");
    o.detail << fmt(budgets[i]) << ":recall=" << fmt(recall) << ",iou_f=" << fmt(iou) << " ";
    prev_recall = recall;
    prev_iou = iou;
  }
  o.require(reports(recs.front().variants[0]) == reports(none.variants[0]), "budget 0 identical to no_fusion");
  return o;
}

Outcome hungarian_oracle() {
  Outcome o;
  auto rng = testing::test_rng(1006);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = oracle::random_cost_matrix(rng, i % 2 == 1);
    const auto got = fusion::hungarian(c);
    const auto want = oracle::brute_force_assignment(c);
    if (static_cast<int>(got.size()) != want.pairs || fusion::assignment_cost(c, got) != want.cost) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " mismatches");
  o.detail << "1000 matrices, " << bad << " mismatches";
  return o;
}

Outcome fusion_algebra() {
  Outcome o;
  auto rng = testing::test_rng(1007);
  const core::GridSpec g{41, 29, 0.5, -10, -7};
  const auto grid = [&] {
    core::ProbGrid p(g, 0.0f);
    for (auto& v : p.raw()) v = static_cast<float>(rng.uniform());
    return p;
  };
  int algebra_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = grid(), b = grid(), c = grid();
    const auto ab = fusion::fuse_occupancy(a, b, 0.5);
    const auto ba = fusion::fuse_occupancy(b, a, 0.5);
    bool ok = ab.first == ba.first && ab.second == ba.second;
    ok = ok && fusion::fuse_occupancy(a, a, 0.5).first == a;
    auto a_up = a;
    for (std::size_t k = 0; k < a.size(); ++k) a_up[k] = std::max(a[k], c[k]);
    const auto up = fusion::fuse_occupancy(a_up, b, 0.5);
    for (std::size_t k = 0; k < a.size() && ok; ++k) {
      ok = up.first[k] >= ab.first[k] && up.second.cells[k] >= ab.second.cells[k];
    }
    algebra_bad += !ok;
  }

  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto q = testing::make_query(rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(), 1, 8);
    q.heading = rng.uniform(-3, 3);
    q.velocity = core::Vec2(rng.uniform(-10, 10), rng.uniform(-10, 10));
    q.flow_ref = core::Vec2(rng.uniform(-10, 10), rng.uniform(-10, 10));
    q.feature = testing::random_feature(rng, 8);
    q.flow_feature = testing::random_feature(rng, 8);
    const auto a = core::Pose::from_yaw(rng.uniform(-3, 3), rng.uniform(-50, 50), rng.uniform(-50, 50));
    const auto b = core::Pose::from_yaw(rng.uniform(-3, 3), rng.uniform(-50, 50), rng.uniform(-50, 50));
    const auto twice = fusion::spatial_sync_queries(fusion::spatial_sync_queries({q}, a), b)[0];
    const auto once = fusion::spatial_sync_queries({q}, core::compose(b, a))[0];
    worst = std::max({worst, (twice.ref_point - once.ref_point).norm(), (twice.velocity - once.velocity).norm(),
                      (twice.flow_ref - once.flow_ref).norm(),
                      std::abs(core::wrap_angle(twice.heading - once.heading))});
    for (std::size_t k = 0; k < 8; ++k) {
      worst = std::max({worst, std::abs(twice.feature[k] - once.feature[k]),
                        std::abs(twice.flow_feature[k] - once.flow_feature[k])});
    }
  }

  int codec_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int dim = 2 * static_cast<int>(rng.below(9));
    const auto p = testing::random_payload(rng, dim);
    const auto bytes = channel::encode(p);
    const auto back = channel::decode(bytes, dim);
    codec_bad += !(back == p && channel::encode(back) == bytes);
  }

  o.require(algebra_bad == 0, "max-fusion laws");
  o.require(worst <= 1e-9, "sync homomorphism within 1e-9");
  o.require(codec_bad == 0, "codec round trip");
  o.detail << "max-fusion violations " << algebra_bad << ", homomorphism max dev " << fmt(worst)
           << ", codec mismatches " << codec_bad << " (1000 cases each)";
  return o;
}

Outcome complementary_fov() {
  Outcome o;
  const int workers = harness::default_workers();
  const auto uni = harness::run_mode(base_config(Mode::UniV2X, 50), workers).variants[0];
  const auto none = harness::run_mode(base_config(Mode::NoFusion, 50), workers).variants[0];
  const double ru = metric(uni, "detection_recall"), rn = metric(none, "detection_recall");
  const double iu = metric(uni, "iou_f"), in = metric(none, "iou_f");
  const double cu = metric(uni, "collision_avg"), cn = metric(none, "collision_avg");
  o.require(ru > rn, "recall");
  o.require(iu > in, "IoU-f");
  o.require(cu < cn, "collision rate");
  o.detail << "recall " << fmt(ru) << " vs " << fmt(rn) << ", IoU-f " << fmt(iu) << " vs " << fmt(in)
           << ", collision " << fmt(cu) << " vs " << fmt(cn);
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  auto rng = testing::test_rng(1009);
  int ap_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto c = oracle::random_ap_case(rng);
    ap_bad += metrics::average_precision(c.dets, c.gts, 0.5) != oracle::brute_force_ap(c.dets, c.gts, 0.5);
  }
  o.require(ap_bad == 0, "AP oracle");

  const core::BevBox a{core::Vec2(0, 0), 2, 2, 0};
  const core::BevBox b{core::Vec2(1, 0), 2, 2, 0};
  const core::BevBox r{core::Vec2(0, 0), 2, 2, std::numbers::pi / 4};
  double dev = std::abs(metrics::bev_iou(a, b) - 1.0 / 3.0);
  dev = std::max(dev, std::abs(metrics::bev_iou(a, r) - 1.0 / std::numbers::sqrt2));
  dev = std::max(dev, std::abs(metrics::bev_iou(a, a) - 1.0));
  for (int i = 0; i < 200; ++i) {
    const core::BevBox p{core::Vec2(rng.uniform(-3, 3), rng.uniform(-3, 3)), rng.uniform(0.5, 5), rng.uniform(0.5, 3), 0};
    const core::BevBox q{core::Vec2(rng.uniform(-3, 3), rng.uniform(-3, 3)), rng.uniform(0.5, 5), rng.uniform(0.5, 3), 0};
    dev = std::max(dev, std::abs(metrics::bev_iou(p, q) - oracle::axis_aligned_iou(p, q)));
  }
  o.require(dev <= 1e-9, "bev_iou within 1e-9");

  const planner::PlannerConfig cfg;
  const auto plan = planner::generate_candidates(4.0, core::Command::KeepForward, cfg).front();
  std::vector<core::Vec2> truth(10, core::Vec2::Zero());
  truth[5] = core::Vec2(13, 4);
  const std::vector<core::MaskGrid> masks(10, core::MaskGrid(core::GridSpec::ego_default(), 0));
  const double l2 = metrics::planning_metrics(plan, truth, masks, planner::DrivableView{}, cfg).l2[0];
  o.require(l2 == 5.0, "L2 == 5.0");
  o.detail << "AP mismatches " << ap_bad << "/200, bev_iou max dev " << fmt(dev) << ", L2 " << fmt(l2);
  return o;
}

int run_cli(const std::string& env, const std::string& args) {
  const std::string cmd = env + " " + std::string(COOPSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("coopsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cfg = base_config(Mode::UniV2X, 8);
  harness::write_text(dir / "cfg.json", harness::config_to_json(cfg).dump(2));
  std::vector<std::string> outputs;
  for (int threads : {1, 8}) {
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / ("t" + std::to_string(threads) + "_" + std::to_string(rep));
      const int rc = run_cli("COOPSIM_THREADS=" + std::to_string(threads),
                             "run --config " + (dir / "cfg.json").string() + " --out " + out.string());
      o.require(rc == 0, "cli exit code");
      outputs.push_back(fs::exists(out / "run.json") ? harness::read_text(out / "run.json") : std::string());
    }
  }
  const bool same = std::all_of(outputs.begin(), outputs.end(), [&](const auto& s) { return s == outputs[0]; });
  o.require(!outputs[0].empty() && same, "byte-identical run.json");
  o.detail << "4 runs (workers 1,1,8,8), " << outputs[0].size() << " bytes each, identical=" << same;
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"transmission cost arithmetic", cost_arithmetic},
      {"hybrid payload vs dense BEV", hybrid_vs_dense},
      {"corruption ablation", corruption},
      {"latency ablation", latency},
      {"bandwidth sweep", bandwidth},
      {"hungarian vs brute force", hungarian_oracle},
      {"fusion algebra and codec", fusion_algebra},
      {"complementary field of view", complementary_fov},
      {"metric oracles", metric_oracles},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <doctest.h>

#include "coopsim/harness/config.hpp"
#include "coopsim/harness/report.hpp"
#include "coopsim/harness/runner.hpp"
#include "coopsim/scenario/scenario_io.hpp"

using namespace coopsim;
using namespace coopsim::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(Mode mode, int n_seeds = 3) {
  ExperimentConfig c;
  c.mode = mode;
  c.seeds.clear();
  for (int s = 0; s < n_seeds; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  return c;
}

double metric(const VariantResult& v, const std::string& name) {
  for (const auto& [k, x] : v.mean)
    if (k == name) return x;
  FAIL("no metric " << name);
  return 0.0;
}

// Everything but the transmission cost.
MetricRow perception_and_planning(const VariantResult& v) {
  MetricRow out;
  for (const auto& kv : v.mean)
    if (kv.first != "avg_bps") out.push_back(kv);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coopsim_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(COOPSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto def = config_from_json(json::object());
  CHECK(def == ExperimentConfig{});

  CHECK_THROWS_AS(config_from_json(json{{"mdoe", "univ2x"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"channel", {{"latncy", 0.5}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"planner", {{"weights", {{"colision", 1.0}}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"mode", "early"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"seeds", json::array()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"channel", {{"latency", -1.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"planner", {{"weights", {{"collision", 10.0}}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"seeds", "zero"}}), ConfigError);

  const auto c = config_from_json(json{{"mode", "late_fusion"},
                                       {"seeds", {4, 5}},
                                       {"channel", {{"latency", 0.5}, {"bandwidth_mbps", 1.0}}},
                                       {"fusion", {{"flow_compensation", false}}},
                                       {"scenario", {{"n_agents", 3}}},
                                       {"output", "out/x"}});
  CHECK(c.mode == Mode::LateFusion);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.channel.latency == 0.5);
  CHECK(c.channel.bandwidth_budget == std::optional<std::size_t>(62500));
  CHECK_FALSE(c.fusion.flow_compensation);
  CHECK(c.scenario.n_agents == 3);
  CHECK(config_from_json(config_to_json(c)) == c);

  auto moved = c;
  moved.output = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  CHECK(config_hash(c).size() == 16u);
  moved.mode = Mode::UniV2X;
  CHECK(config_hash(moved) != config_hash(c));

  const auto dir = scratch("cfg");
  write_text(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS(load_config(dir / "missing.json"));
  write_text(dir / "ok.json", config_to_json(c).dump());
  CHECK(load_config(dir / "ok.json") == c);
  fs::remove_all(dir);

  CHECK(mode_from_string("dense_bev") == Mode::DenseBev);
  CHECK(to_string(Mode::UniV2X) == "univ2x");
  CHECK(axis_from_string("latency") == Axis::Latency);
  CHECK_THROWS_AS(axis_from_string("speed"), ConfigError);
}

TEST_CASE("modes") {
  const auto none = run_mode(small(Mode::NoFusion), 1);
  const auto late = run_mode(small(Mode::LateFusion), 1);
  const auto uni = run_mode(small(Mode::UniV2X), 1);
  const auto dense = run_mode(small(Mode::DenseBev), 1);

  CHECK(none.variants.size() == 1u);
  CHECK(none.variants[0].seeds.size() == 3u);
  CHECK(none.variants[0].cost.avg_bps == 0.0);
  CHECK(metric(none.variants[0], "avg_bps") == 0.0);
  CHECK(late.variants[0].cost.avg_bps > 0.0);
  CHECK(late.variants[0].cost.avg_bps < uni.variants[0].cost.avg_bps);
  CHECK(dense.variants[0].cost.avg_bps >= 50.0 * uni.variants[0].cost.avg_bps);

  // Infrastructure data raises recall over ego-only perception.
  CHECK(metric(uni.variants[0], "detection_recall") > metric(none.variants[0], "detection_recall"));

  // Results do not depend on the number of workers.
  CHECK(run_mode(small(Mode::UniV2X), 3) == uni);

  // A recorded scenario replaces generation; the seed still drives sensor noise.
  const auto dir = scratch("fixed");
  const auto base = small(Mode::UniV2X, 2);
  auto scene = base.scenario;
  scene.seed = 41;
  const auto recorded = scenario::generate_scenario(scene);
  scenario::save_scenario(recorded, dir / "s.json");
  auto fixed = base;
  fixed.scenario_path = (dir / "s.json").string();
  const auto rec = run_mode(fixed, 1);
  CHECK(rec.variants[0].seeds[1] == run_seed(base, 1, &recorded));
  CHECK(rec.variants[0].seeds[1].report != uni.variants[0].seeds[1].report);
  fs::remove_all(dir);
}

TEST_CASE("aggregate") {
  SeedResult a, b;
  a.report.mota = 0.5;
  b.report.mota = 1.0;
  a.cost.avg_bps = 100.0;
  b.cost.avg_bps = 300.0;
  const auto v = aggregate("x", {a, b});
  CHECK(metric(v, "mota") == 0.75);
  CHECK(v.cost.avg_bps == 200.0);
  for (const auto& [k, s] : v.stddev)
    if (k == "mota") CHECK(s == 0.25);
  CHECK(v.mean.size() == flatten(a.report).size());
}

TEST_CASE("sweeps") {
  const auto base = small(Mode::UniV2X);
  const auto none = run_mode(small(Mode::NoFusion), 1);

  const auto corr = sweep(Axis::Corruption, {0.0, 1.0}, base, 1);
  REQUIRE(corr.size() == 2u);
  CHECK(corr[1].axis == "corruption");
  CHECK(corr[1].value == 1.0);
  CHECK(perception_and_planning(corr[1].variants[0]) == perception_and_planning(none.variants[0]));
  CHECK(sweep_config(Axis::Corruption, 0.3, base).transmit == TransmitFlags{true, false, false});

  const auto bw = sweep(Axis::Bandwidth, {0.0}, base, 1);
  CHECK(perception_and_planning(bw[0].variants[0]) == perception_and_planning(none.variants[0]));
  CHECK(bw[0].variants[0].cost.avg_bps == 0.0);
  CHECK(sweep_config(Axis::Bandwidth, 1.0, base).channel.bandwidth_budget == std::optional<std::size_t>(62500));

  const auto lat = sweep(Axis::Latency, {0.5}, base, 1);
  REQUIRE(lat[0].variants.size() == 2u);
  CHECK(lat[0].variants[0].name != lat[0].variants[1].name);
  CHECK(sweep_config(Axis::Latency, 0.5, base).channel.latency == 0.5);

  CHECK_THROWS_AS(sweep(Axis::Corruption, {1.5}, base, 1), ConfigError);
  CHECK_THROWS_AS(sweep(Axis::Latency, {}, base, 1), ConfigError);
  CHECK_THROWS_AS(sweep_config(Axis::Bandwidth, -1.0, base), ConfigError);

  CHECK(records_from_json(records_to_json(corr)) == corr);
  CHECK(record_from_json(to_json(lat[0])) == lat[0]);
}

TEST_CASE("reports") {
  const auto rec = run_mode(small(Mode::UniV2X, 2), 1);
  CHECK_THROWS_AS(render_report({}, ReportFormat::Csv), std::invalid_argument);

  const auto md = render_report({rec}, ReportFormat::Markdown);
  CHECK(md == render_report({rec}, ReportFormat::Markdown));
  std::size_t rows = 0;
  std::istringstream in(md);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("| univ2x |", 0) == 0) ++rows;
  CHECK(rows == 2u);  // perception and planning tables

  // CSV values agree with the JSON record at nine significant digits.
  const auto csv = render_report({rec}, ReportFormat::Csv);
  std::istringstream cin(csv);
  std::string head, row;
  std::getline(cin, head);
  std::getline(cin, row);
  const auto names = split(head, ',');
  const auto cells = split(row, ',');
  REQUIRE(names.size() == cells.size());
  const json j = to_json(rec);
  std::size_t checked = 0;
  for (const auto& [k, v] : rec.variants[0].mean) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == k) {
        CHECK(cells[i] == g9(v));
        ++checked;
      }
    }
  }
  CHECK(checked == rec.variants[0].mean.size());
  CHECK(j.dump() == to_json(record_from_json(j)).dump());

  const auto dir = scratch("report");
  write_text(dir / "run.json", records_to_json({rec}).dump(2));
  write_text(dir / "notes.txt", "ignored");
  const auto loaded = load_records(dir);
  REQUIRE(loaded.size() == 1u);
  CHECK(loaded[0] == rec);
  CHECK_THROWS_AS(read_text(dir / "nope.json"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  auto cfg = small(Mode::UniV2X, 2);
  cfg.output = (dir / "out").string();
  write_text(dir / "cfg.json", config_to_json(cfg).dump(2));
  const std::string c = " --config " + (dir / "cfg.json").string();

  CHECK(cli("run" + c) == 0);
  REQUIRE(fs::exists(dir / "out" / "run.json"));
  const auto first = read_text(dir / "out" / "run.json");
  CHECK(cli("run" + c) == 0);
  CHECK(read_text(dir / "out" / "run.json") == first);
  CHECK(records_from_json(json::parse(first))[0] == run_mode(cfg, 1));

  CHECK(cli("sweep --axis corruption --values 0,0.5" + c + " --out " + (dir / "sw").string()) == 0);
  CHECK(load_records(dir / "sw").size() == 2u);

  CHECK(cli("report --in " + (dir / "out").string() + " --format csv") == 0);
  CHECK(fs::exists(dir / "out" / "report.csv"));
  CHECK(cli("report --in " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "report.md"));

  CHECK(cli("gen" + c + " --out " + (dir / "scene.json").string()) == 0);
  CHECK(scenario::scenarios_equal(scenario::load_scenario(dir / "scene.json"),
                                  scenario::generate_scenario(cfg.scenario)));

  // Config errors exit 1, runtime failures exit 2.
  write_text(dir / "bad.json", R"({"mode": "univ2x", "bogus": 1})");
  CHECK(cli("run --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 1);
  CHECK(cli("sweep --axis corruption --values 0,x" + c) == 1);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("run") == 1);
  CHECK(cli("report --in " + (dir / "missing").string()) == 2);
  auto broken = cfg;
  broken.scenario_path = (dir / "no_such_scene.json").string();
  write_text(dir / "broken.json", config_to_json(broken).dump());
  CHECK(cli("run --config " + (dir / "broken.json").string()) == 2);

  fs::remove_all(dir);
}

// coopsim command line: scenario generation, runs, sweeps and reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coopsim/harness/config.hpp"
#include "coopsim/harness/report.hpp"
#include "coopsim/harness/runner.hpp"
#include "coopsim/scenario/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace coopsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw harness::ConfigError("not a number in --values: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw harness::ConfigError("--values is empty");
  return out;
}

void write_records(const fs::path& dir, const std::string& name, const std::vector<harness::RunRecord>& records) {
  fs::create_directories(dir);
  const fs::path path = dir / name;
  harness::write_text(path, harness::records_to_json(records).dump(2) + "\n");
  std::cout << path.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coopsim: vehicle-infrastructure cooperative driving simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, axis_name, values_csv, in_dir, format_name = "markdown";

  auto* gen = app.add_subcommand("gen", "generate a scenario file from a config");
  gen->add_option("--config", config_path, "experiment config (JSON)")->required();
  gen->add_option("--out", out_path, "scenario file to write")->required();

  auto* run = app.add_subcommand("run", "run every seed of a config");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_path, "output directory (default: config.output)");

  auto* sw = app.add_subcommand("sweep", "ablation sweep over one axis");
  sw->add_option("--axis", axis_name, "bandwidth | latency | corruption")
      ->required()
      ->check(CLI::IsMember({"bandwidth", "latency", "corruption"}));
  sw->add_option("--values", values_csv, "comma-separated values (Mb/s, seconds or drop fractions)")->required();
  sw->add_option("--config", config_path, "base experiment config (JSON)")->required();
  sw->add_option("--out", out_path, "output directory (default: config.output)");

  auto* rep = app.add_subcommand("report", "render the records in a directory");
  rep->add_option("--in", in_dir, "directory holding run/sweep JSON")->required();
  rep->add_option("--format", format_name, "csv | markdown | json")
      ->check(CLI::IsMember({"csv", "markdown", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const int workers = harness::default_workers();
    if (*gen) {
      const harness::ExperimentConfig cfg = harness::load_config(config_path);
      const fs::path out(out_path);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      scenario::save_scenario(scenario::generate_scenario(cfg.scenario), out);
      std::cout << out.string() << '\n';
    } else if (*run) {
      const harness::ExperimentConfig cfg = harness::load_config(config_path);
      const fs::path dir = out_path.empty() ? fs::path(cfg.output) : fs::path(out_path);
      if (dir.empty()) throw harness::ConfigError("no output directory: pass --out or set output");
      write_records(dir, "run.json", {harness::run_mode(cfg, workers)});
    } else if (*sw) {
      const harness::ExperimentConfig cfg = harness::load_config(config_path);
      const harness::Axis axis = harness::axis_from_string(axis_name);
      const std::vector<double> values = parse_values(values_csv);
      const fs::path dir = out_path.empty() ? fs::path(cfg.output) : fs::path(out_path);
      if (dir.empty()) throw harness::ConfigError("no output directory: pass --out or set output");
      write_records(dir, "sweep_" + axis_name + ".json", harness::sweep(axis, values, cfg, workers));
    } else if (*rep) {
      const harness::ReportFormat format = harness::report_format_from_string(format_name);
      const auto records = harness::load_records(in_dir);
      const fs::path path = fs::path(in_dir) / ("report." + std::string(harness::extension(format)));
      harness::write_text(path, harness::render_report(records, format));
      std::cout << path.string() << '\n';
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// hvsim command line: run scenarios, export connectivity maps, time the
// simulator and check config files.
//
// Exit codes: 0 ok, 1 usage, 2 config error, 3 runtime failure.

#include "hvsim/config.hpp"
#include "hvsim/scenarios.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kConfig = 2;
constexpr int kRuntime = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<int> runs;
  std::optional<double> duration;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "scenario YAML file")->required();
  cmd->add_option("-s,--seed", c.seed, "base seed (run i uses seed + i)");
  cmd->add_option("-o,--output", c.output, "output directory");
  cmd->add_option("-r,--runs", c.runs, "number of replications")->check(CLI::PositiveNumber);
  cmd->add_option("-d,--duration", c.duration, "simulated seconds per run")
      ->check(CLI::PositiveNumber);
}

hvsim::ScenarioConfig load(const Common& c) {
  auto cfg = hvsim::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.output) cfg.output = *c.output;
  if (c.runs) cfg.runs = *c.runs;
  if (c.duration) cfg.duration_s = *c.duration;
  cfg.validate();
  return cfg;
}

int cmd_run(const Common& c, int threads, bool packet_logs) {
  const auto cfg = load(c);
  spdlog::info("{}: {} runs of {} s into {}", hvsim::to_string(cfg.kind), cfg.runs,
               cfg.duration_s, cfg.output.string());
  if (cfg.kind == hvsim::ScenarioKind::Scalability)
    throw hvsim::ConfigError("scenario: scalability configs are run with 'bench'");
  hvsim::RunnerOptions opt;
  opt.threads = threads;
  opt.write_files = true;
  opt.packet_logs = packet_logs;
  const auto result = hvsim::run_scenario(cfg, opt);
  hvsim::write_aggregate_csv(std::cout, result);
  if (!result.complete) {
    spdlog::error("{}", result.error);
    return kRuntime;
  }
  return kOk;
}

int cmd_heatmap(const Common& c, std::vector<double> altitudes, std::optional<double> cell) {
  const auto cfg = load(c);
  if (altitudes.empty()) altitudes = cfg.prediction.altitudes;
  const double cell_size = cell.value_or(cfg.prediction.cell_size);
  const auto world = hvsim::build_world(cfg);
  const auto maps = hvsim::build_heatmaps(cfg, world, altitudes, cell_size);
  std::filesystem::create_directories(cfg.output);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "heatmap_alt%g.csv", altitudes[i]);
    std::ofstream out(cfg.output / name);
    maps[i].write_csv(out);
    spdlog::info("wrote {}", (cfg.output / name).string());
  }
  return kOk;
}

int cmd_bench(const Common& c) {
  const auto cfg = load(c);
  const auto report = hvsim::run_scalability(cfg);
  std::filesystem::create_directories(cfg.output);
  std::ofstream out(cfg.output / "bench.csv");
  hvsim::write_bench_csv(out, report);
  hvsim::write_bench_csv(std::cout, report);
  std::printf("ue_fit_r_squared,%.4f\nmobility_only_share,%.4f\nmobility_handler_share,%.4f\n",
              report.ue_fit_r_squared, report.mobility_only_share,
              report.mobility_handler_share);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid vehicular network simulator"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  Common run_opts, heat_opts, bench_opts;
  int threads = 1;
  bool packet_logs = false;
  auto* run = app.add_subcommand("run", "run a scenario and aggregate its replications");
  add_common(run, run_opts);
  run->add_option("-j,--threads", threads, "parallel replications")->check(CLI::PositiveNumber);
  run->add_flag("--packet-logs", packet_logs, "write per-packet and power CSVs per run");

  std::vector<double> altitudes;
  std::optional<double> cell;
  auto* heat = app.add_subcommand("heatmap", "export RSRP connectivity maps");
  add_common(heat, heat_opts);
  heat->add_option("-a,--altitude", altitudes, "map altitudes in m");
  heat->add_option("--cell-size", cell, "grid resolution in m")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "time the aerial-BS scenario across sweeps");
  add_common(bench, bench_opts);

  std::string check_path;
  auto* check = app.add_subcommand("validate-config", "parse and validate a config file");
  check->add_option("config", check_path, "scenario YAML file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run) return cmd_run(run_opts, threads, packet_logs);
    if (*heat) return cmd_heatmap(heat_opts, altitudes, cell);
    if (*bench) return cmd_bench(bench_opts);
    if (*check) {
      const auto cfg = hvsim::load_config(check_path);
      cfg.validate();
      std::printf("%s: ok (%s, %d runs, %g s)\n", check_path.c_str(), hvsim::to_string(cfg.kind),
                  cfg.runs, cfg.duration_s);
      return kOk;
    }
  } catch (const hvsim::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kUsage;
}

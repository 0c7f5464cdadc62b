#pragma once

// Case-study runners: aerial sensors (CAM over cellular or sidelink), aerial
// base stations (CBR downlink), connectivity-map prediction, and the
// runtime scalability sweep.

#include "hvsim/config.hpp"
#include "hvsim/stats.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace hvsim {

// Metric name -> value for one replication. Ordered so CSVs are stable.
using RunMetrics = std::map<std::string, double>;

struct RunOptions {
  std::ostream* packet_csv = nullptr;  // per-packet outcomes of this run
  std::ostream* power_csv = nullptr;   // power trace of the first UAV
  bool profile = false;                // attribute wall time to event categories
};

// Prebuilt inputs shared by all replications of a scenario.
struct ScenarioAssets {
  World world;
  std::vector<ConnectivityMap> maps;  // prediction scenario, one per altitude
};

World build_world(const ScenarioConfig& config);
ScenarioAssets build_assets(const ScenarioConfig& config);

Vec3 enb_position(const ScenarioConfig& config, const World& world);

// One seeded replication; seed = config.seed + run.
RunMetrics run_once(const ScenarioConfig& config, const ScenarioAssets& assets, int run,
                     const RunOptions& options = {});

struct ScenarioResult {
  std::vector<RunMetrics> runs;  // completed replications, in run order
  std::vector<MetricSummary> summary;
  bool complete = true;
  std::string error;  // first failure when incomplete
};

struct RunnerOptions {
  int threads = 1;
  bool write_files = false;  // per-run and aggregate CSVs under config.output
  bool packet_logs = false;  // per-packet CSV per run (large)
};

// Runs all replications. A failing run stops the batch; completed runs are
// kept and the result is marked incomplete.
ScenarioResult run_scenario(const ScenarioConfig& config, const RunnerOptions& options = {});

void write_runs_csv(std::ostream& out, const ScenarioResult& result);
void write_aggregate_csv(std::ostream& out, const ScenarioResult& result);

// --- scalability ---------------------------------------------------------

struct BenchPoint {
  std::string sweep;  // "ues", "packet_size" or "interval"
  int ues = 0;
  std::uint32_t packet_size = 0;
  double interval_s = 0.0;
  bool radios = true;
  double wall_s = 0.0;
  double mobility_s = 0.0;  // instrumented handler time per category
  double network_s = 0.0;
  double other_s = 0.0;
  std::uint64_t events = 0;
  std::uint64_t network_events = 0;
  double normalized = 1.0;  // wall / wall of the sweep's first point
};

struct BenchReport {
  std::vector<BenchPoint> points;
  double ue_fit_r_squared = 0.0;
  double mobility_only_share = 0.0;  // mobility-only wall / full wall
  double mobility_handler_share = 0.0;  // mobility handler time / total in the full run
};

// One timed aerial-BS run with `ues` cars.
BenchPoint bench_point(const ScenarioConfig& config, const World& world, int ues,
                       std::uint32_t packet_size, double interval_s, bool radios);

BenchReport run_scalability(const ScenarioConfig& config);
void write_bench_csv(std::ostream& out, const BenchReport& report);

// --- heatmaps ------------------------------------------------------------

std::vector<ConnectivityMap> build_heatmaps(const ScenarioConfig& config, const World& world,
                                            const std::vector<double>& altitudes,
                                            double cell_size);

}  // namespace hvsim

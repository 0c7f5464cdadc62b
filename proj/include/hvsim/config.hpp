#pragma once

// Scenario configuration. Files are YAML; every key is optional and falls
// back to the defaults below (which follow the reference parameter table).
// The schema is documented in docs/config.md.

#include "hvsim/car.hpp"
#include "hvsim/channel.hpp"
#include "hvsim/environment.hpp"
#include "hvsim/netsim.hpp"
#include "hvsim/uav.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hvsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { AerialSensor, AerialBs, Prediction, Scalability };

const char* to_string(ScenarioKind k);
ScenarioKind scenario_kind_from(std::string_view name);  // throws ConfigError

struct WorldConfig {
  std::optional<std::filesystem::path> osm;  // synthetic world when empty
  bool use_cache = true;
  OsmOptions osm_options;
  SyntheticWorldSpec synthetic;
};

struct UavConfig {
  QuadrotorParams quadrotor;
  double cruise_altitude = 40.0;
  double battery_capacity = 1.0e6;  // J
  std::vector<SteeringConfig> steerings;  // empty -> scenario default
};

struct MobilityConfig {
  double step_s = 0.01;
  CarParams car;
  UavConfig uav;
};

struct AerialBsConfig {
  int uavs = 1;  // 0 = static eNB only
  double min_altitude = 50.0;
  double max_altitude = 100.0;
  double cluster_radius = 150.0;  // initial UE spread around a random point
};

struct PredictionConfig {
  std::vector<double> altitudes{10, 20, 30, 40};
  std::vector<double> horizons{1, 2, 5, 10};  // s
  double tau = 0.5;
  double cell_size = 10.0;
  double sample_interval = 1.0;
  double warmup = 5.0;
  int uavs_per_altitude = 4;
};

struct ScalabilityConfig {
  std::vector<int> ue_counts{4, 8, 16, 32, 64};
  std::vector<std::uint32_t> packet_sizes{100, 500, 1000, 2000, 4000, 8000};
  std::vector<double> intervals{0.01, 0.25, 0.5};
  int repeats = 1;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::AerialSensor;
  WorldConfig world;
  int cars = 8;
  int uavs = 8;
  MobilityConfig mobility;
  PathLossParams channel;
  RadioConfig radio = RadioConfig::cellular();
  CellularParams cellular;   // radio/path_loss copied in from the fields above
  SidelinkParams sidelink;
  double enb_height = 25.0;  // static eNB at the map center
  TrafficSpec traffic = traffic_cam();
  double duration_s = 1800.0;
  int runs = 10;
  std::uint64_t seed = 1;
  std::filesystem::path output = "results";
  AerialBsConfig aerial_bs;
  PredictionConfig prediction;
  ScalabilityConfig scalability;

  // Throws ConfigError naming the offending key.
  void validate() const;

  CellularParams cellular_params() const;
  SidelinkParams sidelink_params() const;
};

// Scenario defaults before any file overrides (traffic, radio and counts
// depend on the scenario kind).
ScenarioConfig default_config(ScenarioKind kind);

// `base_dir` resolves relative paths in the file.
ScenarioConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace hvsim

#include "hvsim/config.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>

using namespace hvsim;

namespace {

std::string error_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("reference defaults") {
  const auto c = default_config(ScenarioKind::AerialSensor);
  CHECK(c.runs == 10);
  CHECK(c.duration_s == 1800.0);
  CHECK(c.mobility.step_s == 0.01);
  CHECK(c.mobility.car.max_speed == doctest::Approx(14.0));
  CHECK(c.mobility.uav.quadrotor.max_speed == 20.0);
  CHECK(c.mobility.uav.cruise_altitude == 40.0);
  CHECK(c.radio.carrier_frequency == 2.1e9);
  CHECK(c.radio.bandwidth == 20e6);
  CHECK(c.radio.tx_power_ue_dbm == 23.0);
  CHECK(c.radio.tx_power_enb_dbm == 43.0);
  CHECK(c.traffic.size_bytes == 190);
  CHECK(c.traffic.interval_s == 0.1);
  CHECK(c.enb_height == 25.0);

  const auto bs = default_config(ScenarioKind::AerialBs);
  CHECK(bs.traffic.size_bytes == 8000);
  CHECK(bs.traffic.interval_s == 0.01);

  const auto sl = parse_config("scenario: aerial_sensor\nradio: {technology: sidelink}\n");
  CHECK(sl.radio.technology == Technology::Sidelink);
  CHECK(sl.radio.carrier_frequency == 5.9e9);
  CHECK(sl.radio.bandwidth == 20e6);
  CHECK(sl.radio.tx_power_ue_dbm == 23.0);
}

TEST_CASE("parsing overrides") {
  const auto c = parse_config(R"(
scenario: aerial_bs
duration: 300
runs: 3
seed: 42
vehicles: {cars: 16}
aerial_bs: {uavs: 2, cluster_radius: 200}
traffic: {packet_size: 1000, interval: 0.25}
channel: {wall_loss: 10, interior_loss: 0.5, counting: buildings}
mobility:
  uav:
    steerings:
      - {name: waypoint, weight: 2, params: {approach_gain: 0.3}}
)");
  CHECK(c.kind == ScenarioKind::AerialBs);
  CHECK(c.duration_s == 300);
  CHECK(c.runs == 3);
  CHECK(c.seed == 42);
  CHECK(c.cars == 16);
  CHECK(c.aerial_bs.uavs == 2);
  CHECK(c.uavs == 2);
  CHECK(c.aerial_bs.cluster_radius == 200);
  CHECK(c.traffic.size_bytes == 1000);
  CHECK(c.traffic.interval_s == 0.25);
  CHECK(c.channel.wall_loss_db == 10);
  CHECK(c.channel.counting == WallCounting::Buildings);
  REQUIRE(c.mobility.uav.steerings.size() == 1);
  CHECK(c.mobility.uav.steerings[0].weight == 2);
  CHECK(c.mobility.uav.steerings[0].params.at("approach_gain") == 0.3);

  // Paired drones follow the car count.
  CHECK(parse_config("scenario: aerial_sensor\nvehicles: {cars: 5}\n").uavs == 5);
}

TEST_CASE("table intervals are accepted") {
  for (const char* iv : {"0.01", "0.25", "0.5"})
    CHECK_NOTHROW(parse_config(std::string("scenario: aerial_bs\ntraffic: {interval: ") + iv + "}\n"));
}

TEST_CASE("errors name the offending key") {
  CHECK(error_of("scenario: aerial_bs\nraido: {}\n") == "raido: unknown key");
  CHECK(error_of("scenario: aerial_bs\nradio: {bandwith: 1}\n") == "radio.bandwith: unknown key");
  CHECK(error_of("scenario: aerial_bs\nduration: soon\n") == "duration: invalid value");
  CHECK(error_of("scenario: aerial_bs\nduration: -5\n") == "duration: must be > 0");
  CHECK(error_of("scenario: aerial_bs\nruns: 0\n") == "runs: must be >= 1");
  CHECK(error_of("scenario: flying\n").find("scenario: unknown kind") == 0);
  CHECK(error_of("duration: 5\n") == "scenario: required");
  CHECK(error_of("scenario: aerial_bs\nradio: {technology: wifi}\n") ==
        "radio.technology: expected cellular or sidelink");
  CHECK(error_of("scenario: aerial_bs\naerial_bs: {uavs: 3}\n") ==
        "aerial_bs.uavs: must be 0, 1 or 2");
  CHECK(error_of("scenario: prediction\nworld: {osm: /nonexistent/map.osm}\n")
            .find("world.osm: file not found") == 0);
  CHECK(error_of("scenario: aerial_bs\nmobility: {uav: {steerings: [{name: teleport}]}}\n") != "");
  CHECK(error_of("scenario: [\n").find("YAML syntax error") == 0);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("relative paths resolve against the config file") {
  const auto dir = std::filesystem::temp_directory_path() / "hvsim_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "map.osm") << "<osm></osm>\n";
    std::ofstream(dir / "c.yaml") << "scenario: prediction\nworld: {osm: map.osm}\noutput: out\n";
  }
  const auto c = load_config(dir / "c.yaml");
  REQUIRE(c.world.osm);
  CHECK(*c.world.osm == dir / "map.osm");
  CHECK(c.output == dir / "out");
  std::filesystem::remove_all(dir);
}

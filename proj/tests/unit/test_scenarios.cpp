#include "hvsim/scenarios.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>

using namespace hvsim;

namespace {

ScenarioConfig short_config(ScenarioKind kind, double duration = 30.0, int runs = 2) {
  auto c = default_config(kind);
  c.duration_s = duration;
  c.runs = runs;
  return c;
}

std::string aggregate_text(const ScenarioResult& r) {
  std::ostringstream out;
  write_aggregate_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("aerial sensors over both radios") {
  for (auto tech : {Technology::Cellular, Technology::Sidelink}) {
    auto c = short_config(ScenarioKind::AerialSensor);
    c.cars = c.uavs = 4;
    if (tech == Technology::Sidelink) c.radio = RadioConfig::sidelink();
    const auto assets = build_assets(c);
    const auto m = run_once(c, assets, 0);
    // 4 sources x 300 CAMs, give or take the first phase offset.
    CHECK(m.at("packets_sent") == 1200);
    CHECK(m.at("pdr") >= 0.0);
    CHECK(m.at("pdr") <= 1.0);
    CHECK(m.at("max_car_speed") <= 14.0);
    CHECK(m.at("max_uav_speed") <= 20.0);
    CHECK(m.at("uav_energy_j") > 0.0);
    if (tech == Technology::Sidelink) {
      CHECK(m.at("latency_mean_s") < 0.014);
      CHECK(m.count("collisions") == 1);
    } else {
      CHECK(m.at("latency_mean_s") >= 0.014 - 1e-9);
    }
  }
}

TEST_CASE("aerial base station rates") {
  auto c = short_config(ScenarioKind::AerialBs, 60.0, 1);
  c.cars = 2;
  const auto assets = build_assets(c);
  const auto aerial = run_once(c, assets, 0);
  c.aerial_bs.uavs = c.uavs = 0;
  const auto fixed = run_once(c, assets, 0);
  CHECK(aerial.at("rate_per_ue_mbps") <= 6.4 + 1e-9);
  CHECK(aerial.at("rate_per_ue_mbps") > fixed.at("rate_per_ue_mbps"));
  CHECK(fixed.count("rate_per_ue_mbps") == 1);
}

TEST_CASE("prediction metrics") {
  auto c = short_config(ScenarioKind::Prediction, 40.0, 1);
  c.prediction.altitudes = {20, 40};
  c.prediction.uavs_per_altitude = 2;
  const auto assets = build_assets(c);
  REQUIRE(assets.maps.size() == 2);
  const auto m = run_once(c, assets, 0);
  for (const char* key : {"rsrp_error_db_alt20", "rsrp_error_db_alt40", "position_error_m_h1",
                          "position_error_m_h10", "rsrp_error_db_alt40_h5"}) {
    REQUIRE(m.count(key) == 1);
    CHECK(m.at(key) >= 0.0);
  }
}

TEST_CASE("replications are reproducible and thread-independent") {
  auto c = short_config(ScenarioKind::AerialSensor, 20.0, 3);
  c.radio = RadioConfig::sidelink();
  RunnerOptions serial, parallel;
  parallel.threads = 3;
  const auto a = run_scenario(c, serial);
  const auto b = run_scenario(c, parallel);
  CHECK(a.complete);
  CHECK(aggregate_text(a) == aggregate_text(b));
  CHECK(aggregate_text(a) == aggregate_text(run_scenario(c, serial)));

  c.seed = 2;
  CHECK(aggregate_text(a) != aggregate_text(run_scenario(c, serial)));
}

TEST_CASE("aggregate csv format") {
  ScenarioResult r;
  r.runs = {{{"pdr", 1.0}}, {{"pdr", 0.5}}};
  r.summary = {aggregate("pdr", std::vector<double>{1.0, 0.5})};
  const auto text = aggregate_text(r);
  CHECK(text.rfind("metric,mean,ci95_half_width,runs\npdr,0.75,", 0) == 0);
  CHECK(text.find(",2\n") != std::string::npos);

  ScenarioResult single;
  single.runs = {{{"pdr", 1.0}}};
  single.summary = {aggregate("pdr", std::vector<double>{1.0})};
  CHECK(aggregate_text(single) == "metric,mean,ci95_half_width,runs\npdr,1,NA,1\n");

  single.complete = false;
  single.error = "run 1: boom";
  CHECK(aggregate_text(single).rfind("# partial", 0) == 0);

  std::ostringstream runs;
  write_runs_csv(runs, single);
  CHECK(runs.str() == "run,status,pdr\n0,ok,1\n1,failed\n");
}

TEST_CASE("a failing run keeps completed results") {
  auto c = short_config(ScenarioKind::AerialBs, 10.0, 3);
  // More cars than the map can hold makes every run fail at spawn time.
  c.world.synthetic.width = 200;
  c.world.synthetic.depth = 200;
  c.cars = 200;
  const auto r = run_scenario(c);
  CHECK_FALSE(r.complete);
  CHECK(r.error.find("run 0") == 0);
  CHECK(aggregate_text(r).rfind("# partial", 0) == 0);
}

TEST_CASE("bench point attributes handler time") {
  auto c = default_config(ScenarioKind::Scalability);
  c.duration_s = 10.0;
  const auto world = build_world(c);
  const auto full = bench_point(c, world, 4, 1000, 0.01, true);
  const auto quiet = bench_point(c, world, 4, 1000, 0.01, false);
  CHECK(full.network_events > 0);
  CHECK(quiet.network_events == 0);
  CHECK(full.events > quiet.events);
  CHECK(full.wall_s > 0.0);
}

#include "hvsim/car.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

using namespace hvsim;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent evaluation of the IDM expression.
double idm_oracle(double v, double v0, double gap, double dv, double s0, double th, double a,
                  double b, double delta) {
  const double s_star = s0 + v * th + v * dv / (2 * std::sqrt(a * b));
  return a * (1 - std::pow(v / v0, delta) - (s_star / gap) * (s_star / gap));
}

// Closed single-lane loop of `n` straight edges around a regular polygon.
RoadGraph ring_road(int n, double radius, std::uint32_t lanes = 1) {
  RoadGraph g;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * i / n;
    g.add_node(i, Vec2(radius * std::cos(a), radius * std::sin(a)));
  }
  for (int i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n, lanes, 13.89);
  return g;
}

RoadGraph straight_road(double length, std::uint32_t lanes) {
  RoadGraph g;
  g.add_node(0, Vec2(0, 0));
  g.add_node(1, Vec2(length, 0));
  g.add_edge(0, 1, lanes, 13.89);
  return g;
}

}  // namespace

TEST_CASE("idm examples") {
  IdmParams p;
  p.desired_speed = 14;
  CHECK(idm_acceleration(14, kInf, 0, p).acceleration == doctest::Approx(0.0));
  CHECK(idm_acceleration(0, kInf, 0, p).acceleration == doctest::Approx(1.0));
  const double expected = idm_oracle(10, 14, 20, 0, 2, 1.5, 1, 2, 4);
  CHECK(expected == doctest::Approx(0.017197).epsilon(1e-4));
  CHECK(idm_acceleration(10, 20, 0, p).acceleration == doctest::Approx(expected).epsilon(1e-12));
  CHECK(idm_acceleration(10, 20, 3, p).acceleration ==
        doctest::Approx(idm_oracle(10, 14, 20, 3, 2, 1.5, 1, 2, 4)).epsilon(1e-12));
  // free-road limit as the gap grows
  CHECK(idm_acceleration(8, 1e9, 0, p).acceleration ==
        doctest::Approx(1 - std::pow(8.0 / 14, 4)).epsilon(1e-9));

  const auto crash = idm_acceleration(10, 0, 0, p);
  CHECK(crash.emergency);
  CHECK(crash.acceleration == -p.emergency_decel);
  CHECK(idm_acceleration(10, -1, 0, p).emergency);
}

TEST_CASE("mobil decisions") {
  IdmParams idm;
  MobilParams mobil;

  SUBCASE("empty target lane behind a slow leader") {
    MobilSituation s;
    s.ego_speed = 12;
    s.current_leader = LaneNeighbor{15, 5};
    const auto d = mobil_should_change(s, idm, mobil);
    CHECK(d.safe);
    CHECK(d.change);
    CHECK(d.incentive > mobil.threshold);
  }
  SUBCASE("unsafe gap vetoes regardless of gain") {
    MobilSituation s;
    s.ego_speed = 5;
    s.current_leader = LaneNeighbor{3, 0};
    s.target_follower = LaneNeighbor{1.0, 14};
    const auto d = mobil_should_change(s, idm, mobil);
    CHECK_FALSE(d.safe);
    CHECK_FALSE(d.change);
  }
  SUBCASE("politeness zero is purely egoistic") {
    MobilSituation s;
    s.ego_speed = 12;
    s.current_leader = LaneNeighbor{20, 8};
    s.target_follower = LaneNeighbor{25, 13};
    MobilParams egoist = mobil;
    egoist.politeness = 0;
    const auto d = mobil_should_change(s, idm, egoist);
    const double own_gain = idm_acceleration(12, kInf, 0, idm).acceleration -
                            idm_acceleration(12, 20, 4, idm).acceleration;
    CHECK(d.incentive == doctest::Approx(own_gain));
  }
}

TEST_CASE("route_next") {
  std::mt19937_64 rng(1);
  SUBCASE("single successor") {
    RoadGraph g;
    for (int i = 0; i < 3; ++i) g.add_node(i, Vec2(100.0 * i, 0));
    const auto e0 = g.add_edge(0, 1, 1, 10);
    const auto e1 = g.add_edge(1, 2, 1, 10);
    CHECK(route_next(g, e0, RouteStrategy::Random, rng).edge == e1);
    const auto d = route_next(g, e0, RouteStrategy::Shortest, rng, 2u);
    CHECK(d.kind == RouteDecision::Kind::Next);
    CHECK(d.edge == e1);
  }
  SUBCASE("shortest path on a line picks the middle edge") {
    RoadGraph g;
    for (int i = 0; i < 4; ++i) g.add_node(i, Vec2(100.0 * i, 0));
    const auto e01 = g.add_edge(0, 1, 1, 10);
    const auto e12 = g.add_edge(1, 2, 1, 10);
    g.add_edge(2, 3, 1, 10);
    g.add_edge(1, 0, 1, 10);
    CHECK(route_next(g, e01, RouteStrategy::Shortest, rng, 3u).edge == e12);
  }
  SUBCASE("uniform branching at a three-way fork") {
    RoadGraph g;
    g.add_node(0, Vec2(0, 0));
    g.add_node(1, Vec2(100, 0));
    for (int i = 0; i < 3; ++i) g.add_node(2 + i, Vec2(200, 100.0 * (i - 1)));
    const auto in = g.add_edge(0, 1, 1, 10);
    std::vector<std::uint32_t> outs;
    for (int i = 0; i < 3; ++i) outs.push_back(g.add_edge(1, 2 + i, 1, 10));
    std::array<int, 3> counts{};
    for (int i = 0; i < 10000; ++i) {
      const auto e = route_next(g, in, RouteStrategy::Random, rng).edge;
      ++counts[std::find(outs.begin(), outs.end(), e) - outs.begin()];
    }
    for (int c : counts) CHECK(std::abs(c / 10000.0 - 1.0 / 3.0) < 0.02);
  }
  SUBCASE("dead ends") {
    RoadGraph g;
    g.add_node(0, Vec2(0, 0));
    g.add_node(1, Vec2(100, 0));
    const auto fwd = g.add_edge(0, 1, 1, 10);
    CHECK(route_next(g, fwd, RouteStrategy::Random, rng).kind == RouteDecision::Kind::DeadEnd);
    const auto back = g.add_edge(1, 0, 1, 10);
    const auto d = route_next(g, fwd, RouteStrategy::Random, rng);
    CHECK(d.kind == RouteDecision::Kind::UTurn);
    CHECK(d.edge == back);
    CHECK(route_next(g, fwd, RouteStrategy::Random, rng, {}, false).kind ==
          RouteDecision::Kind::DeadEnd);
  }
}

TEST_CASE("lane geometry") {
  const RoadGraph g = straight_road(200, 2);
  CHECK(lane_point(g, 0, 0, 50).isApprox(Vec3(50, -1.75, 0)));
  CHECK(lane_point(g, 0, 1, 50).isApprox(Vec3(50, -5.25, 0)));
  Car car(1, g, LanePosition{0, 1, 10, 5}, {}, 1);
  CHECK(car.position().z() == 0.0);
  CHECK(car.velocity().isApprox(Vec3(5, 0, 0)));
}

TEST_CASE("car removed at a dead end without U-turns") {
  const RoadGraph g = straight_road(50, 1);
  CarParams p;
  p.allow_u_turn = false;
  Car car(1, g, LanePosition{0, 0, 40, 10}, p, 1);
  SimTime t;
  for (int i = 0; i < 200 && !car.removed(); ++i) car.step(0.01, t += SimTime::from_ms(10));
  CHECK(car.removed());
}

TEST_CASE("single-lane ring platoon stays collision free") {
  const RoadGraph g = ring_road(16, 160.0);
  double ring = 0;
  for (const auto& e : g.edges()) ring += e.length;
  Traffic traffic(g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> speed(0, 14);
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    double s = ring * i / n;
    std::uint32_t e = 0;
    while (s > g.edge(e).length) s -= g.edge(e++).length;
    traffic.add(std::make_unique<Car>(i, g, LanePosition{e, 0, s, speed(rng)}, CarParams{}, i));
  }
  SimTime t;
  double top = 0;
  for (int step = 0; step < 30 * 60 * 100; ++step) {
    traffic.step(0.01, t += SimTime::from_ms(10));
    for (const auto& c : traffic.cars()) top = std::max(top, c->velocity().norm());
  }
  CHECK(traffic.stats().min_gap > 0.0);
  CHECK(traffic.stats().emergencies == 0);
  CHECK(top <= 14.0);
  CHECK(top > 5.0);
}

TEST_CASE("mirrored lane situations give mirrored decisions") {
  const RoadGraph g = straight_road(1000, 3);
  auto run = [&](std::uint32_t slow_lane) {
    Traffic traffic(g);
    CarParams p;
    p.lane_change_interval = 0.01;
    traffic.add(std::make_unique<Car>(0, g, LanePosition{0, 1, 100, 12}, p, 1));
    traffic.add(std::make_unique<Car>(1, g, LanePosition{0, 1, 125, 3}, p, 2));
    traffic.add(std::make_unique<Car>(2, g, LanePosition{0, slow_lane, 130, 2}, p, 3));
    traffic.step(0.01, SimTime::from_ms(10));
    return traffic.cars()[0]->lane_position().lane;
  };
  CHECK(run(0) == 2);
  CHECK(run(2) == 0);
}

TEST_CASE("free-road cars accelerate to the speed limit") {
  const RoadGraph g = ring_road(8, 200.0, 2);
  Traffic traffic(g);
  traffic.add(std::make_unique<Car>(0, g, LanePosition{0, 0, 0, 0}, CarParams{}, 1));
  SimTime t;
  for (int i = 0; i < 120 * 100; ++i) traffic.step(0.01, t += SimTime::from_ms(10));
  CHECK(traffic.cars()[0]->lane_position().speed == doctest::Approx(13.89).epsilon(0.02));
  CHECK(traffic.cars()[0]->lane_position().speed <= 13.89);
}

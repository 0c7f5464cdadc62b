#include "hvsim/netsim.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace hvsim;

namespace {

World open_field() {
  World w;
  w.bounds = Box3{Vec3(-5000, -5000, 0), Vec3(5000, 5000, 250)};
  w.finalize();
  return w;
}

// Straight-line mover for attachment checks.
class Walker final : public Vehicle {
public:
  Walker(std::uint32_t id, Vec3 v) : Vehicle(id, VehicleKind::Car, 50), v_(v) {}
  void step(double dt, SimTime now) override {
    commit(position() + v_ * dt, v_, Vec3::Zero(), now);
  }

private:
  Vec3 v_;
};

Packet make_packet(std::uint64_t id, std::uint32_t size, SimTime now, std::uint32_t flow) {
  Packet p;
  p.id = id;
  p.size_bytes = size;
  p.created = now;
  p.flow = flow;
  return p;
}

}  // namespace

TEST_CASE("sinr arithmetic") {
  const double noise = thermal_noise_dbm(20e6, 9);
  CHECK(noise == doctest::Approx(-174 + 73.0103 + 9).epsilon(1e-6));
  CHECK(sinr_db(-70, {}, noise) == doctest::Approx(-70 - noise));

  // Equal-power interferer: S / (S + N) in the linear domain.
  const double s = -60;
  const double interferer[] = {s};
  const double expected = 10 * std::log10(1.0 / (1.0 + std::pow(10, (noise - s) / 10)));
  CHECK(sinr_db(s, interferer, noise) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(sinr_db(s, interferer, noise) < 0.0);
  CHECK(sinr_db(s, interferer, noise) > -0.01);

  CHECK(thermal_noise_dbm(40e6, 9) - thermal_noise_dbm(20e6, 9) ==
        doctest::Approx(10 * std::log10(2.0)));
}

TEST_CASE("spectral efficiency table") {
  CHECK(spectral_efficiency(-20) == 0.0);
  CHECK(spectral_efficiency(min_decodable_sinr_db()) == doctest::Approx(0.15));
  CHECK(spectral_efficiency(40) == doctest::Approx(5.5));
  double prev = 0;
  for (double x = -10; x < 30; x += 0.1) {
    CHECK(spectral_efficiency(x) >= prev);
    prev = spectral_efficiency(x);
  }
  CHECK(resource_blocks_for(20e6) == 100);
}

TEST_CASE("round robin grants") {
  std::size_t cursor = 0;
  SUBCASE("one UE takes the whole cell") {
    const SchedulerRequest one[] = {{100, 1e9}};
    CHECK(round_robin_grant(one, 100, cursor)[0] == 100);
  }
  SUBCASE("equal UEs share within one block") {
    for (int n = 1; n <= 40; ++n) {
      std::vector<SchedulerRequest> r(n, {100, 1e9});
      const auto g = round_robin_grant(r, 100, cursor);
      const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
      CHECK(*hi - *lo <= 1);
      CHECK(std::accumulate(g.begin(), g.end(), 0) == 100);
    }
  }
  SUBCASE("satisfied UEs release blocks to others") {
    const SchedulerRequest r[] = {{100, 250}, {100, 1e9}};
    const auto g = round_robin_grant(r, 100, cursor);
    CHECK(g[0] == 3);
    CHECK(g[1] == 97);
  }
  SUBCASE("never grants more than the cell has") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> bits(0, 1000), demand(0, 1e5);
    std::uniform_int_distribution<int> count(0, 70);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<SchedulerRequest> r(count(rng));
      for (auto& q : r) q = {bits(rng), demand(rng)};
      const auto g = round_robin_grant(r, 100, cursor);
      int total = 0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        total += g[i];
        CHECK((g[i] - 1) * r[i].bits_per_rb < r[i].demand_bits + 1e-9);
      }
      CHECK(total <= 100);
    }
  }
}

TEST_CASE("traffic patterns") {
  CHECK(traffic_cbr().offered_bps() == doctest::Approx(6.4e6));
  for (double ms : {10.0, 250.0, 500.0}) CHECK_NOTHROW(TrafficSpec{1000, ms / 1000}.validate());
  CHECK_THROWS(TrafficSpec{0, 0.1}.validate());

  Simulator sim;
  int n = 0;
  start_traffic(sim, traffic_cam(), SimTime::from_ms(37), [&] { ++n; });
  sim.run_until(SimTime::from_seconds(30 * 60) + SimTime::from_ms(36));
  CHECK(n == 18000);
}

TEST_CASE("cellular downlink") {
  const World world = open_field();
  Simulator sim;
  TrafficLog log(true);
  CellularNetwork net(sim, world, {}, log);
  Infrastructure enb(0, Vec3(0, 0, 25));
  net.add_cell(enb);

  SUBCASE("single UE is served at full demand with exact latency parts") {
    Infrastructure ue(1, Vec3(100, 0, 1.5));
    const auto u = net.add_ue(ue);
    net.start();
    const auto flow = log.add_flow(Technology::Cellular, 0, 1);
    std::uint64_t id = 0;
    start_traffic(sim, traffic_cbr(), SimTime::from_ms(5),
                  [&] { net.send_downlink(u, make_packet(++id, 8000, sim.now(), flow)); });
    sim.run_until(SimTime::from_seconds(10));
    const auto& s = log.stats(flow);
    CHECK(s.sent == 1000);
    CHECK(s.delivered >= 999);
    for (const auto& r : log.records()) {
      CHECK(r.latency.total() == r.finished - r.created);
      CHECK(r.latency.transmission.ns() > 0);
    }
    CHECK(net.stats().max_grant_ratio <= 1.0);
  }
  SUBCASE("shared capacity falls below the request") {
    std::vector<std::unique_ptr<Infrastructure>> ues;
    std::vector<std::uint32_t> ids;
    for (int i = 0; i < 24; ++i) {
      ues.push_back(std::make_unique<Infrastructure>(10 + i, Vec3(300 + 10 * i, 50, 1.5)));
      ids.push_back(net.add_ue(*ues.back()));
    }
    net.start();
    std::vector<std::uint32_t> flows;
    std::uint64_t id = 0;
    for (int i = 0; i < 24; ++i) {
      flows.push_back(log.add_flow(Technology::Cellular, 0, ids[i]));
      start_traffic(sim, traffic_cbr(), SimTime::from_ms(1 + i % 10), [&, i] {
        net.send_downlink(ids[i], make_packet(++id, 8000, sim.now(), flows[i]));
      });
    }
    sim.run_until(SimTime::from_seconds(5));
    double total = 0;
    for (auto f : flows) {
      const double rate = log.stats(f).throughput_bps(5.0);
      CHECK(rate < 6.4e6);
      total += rate;
    }
    CHECK(total <= net.cell_capacity_bps(0) * 1.0001);
    CHECK(net.stats().max_grant_ratio <= 1.0);
  }
}

TEST_CASE("cellular CAM relay latency") {
  const World world = open_field();
  Simulator sim;
  TrafficLog log(true);
  CellularNetwork net(sim, world, {}, log);
  Infrastructure enb(0, Vec3(0, 0, 25));
  net.add_cell(enb);
  Infrastructure a(1, Vec3(200, 0, 40)), b(2, Vec3(200, 0, 0));
  const auto ua = net.add_ue(a);
  const auto ub = net.add_ue(b);
  net.start();
  const auto flow = log.add_flow(Technology::Cellular, 1, 2);
  std::uint64_t id = 0;
  start_traffic(sim, traffic_cam(), SimTime::from_ms(3),
                [&] { net.send_uplink(ua, make_packet(++id, 190, sim.now(), flow), ub); });
  sim.run_until(SimTime::from_seconds(10));
  CHECK(log.stats(flow).pdr() > 0.98);
  for (const auto& r : log.records()) {
    CHECK(r.latency.total() == r.finished - r.created);
    CHECK(r.latency.access == SimTime::from_ms(8));
    CHECK(r.latency.processing == SimTime::from_ms(4));
  }
  CHECK(log.stats(flow).mean_latency() >= 0.014);
}

TEST_CASE("attachment") {
  const World world = open_field();
  Simulator sim;
  TrafficLog log;
  CellularNetwork net(sim, world, {}, log);

  SUBCASE("single station") {
    Infrastructure enb(0, Vec3(0, 0, 25));
    net.add_cell(enb);
    Walker ue(1, Vec3(10, 0, 0));
    const auto u = net.add_ue(ue);
    net.start();
    for (int i = 0; i < 60; ++i) {
      ue.step(1.0, SimTime::from_seconds(i + 1));
      net.refresh_channels();
      net.evaluate_attachment();
      CHECK(net.serving_cell(u) == 0u);
    }
  }
  SUBCASE("hysteresis prevents ping-pong at the midpoint") {
    Infrastructure a(0, Vec3(0, 0, 25)), b(1, Vec3(1000, 0, 25));
    net.add_cell(a);
    net.add_cell(b);
    // Slow walk across the midpoint with small lateral jitter.
    Walker ue(2, Vec3(1, 0, 0));
    ue.place(Vec3(450, 0, 0));
    const auto u = net.add_ue(ue);
    net.start();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> jitter(-3, 3);
    int switches = 0;
    auto last = net.serving_cell(u);
    for (int i = 0; i < 100; ++i) {
      ue.step(1.0, SimTime::from_seconds(i + 1));
      ue.place(Vec3(ue.position().x() + jitter(rng), 0, 0));
      net.refresh_channels();
      net.evaluate_attachment();
      if (net.serving_cell(u) != last) ++switches;
      last = net.serving_cell(u);
    }
    CHECK(switches <= 1);
    CHECK(net.stats().handovers <= 1);
  }
  SUBCASE("aerial station overhead wins") {
    Infrastructure enb(0, Vec3(0, 0, 25)), uav(1, Vec3(800, 800, 80));
    net.add_cell(enb);
    net.add_cell(uav, 1);
    Infrastructure ue(2, Vec3(810, 790, 0));
    const auto u = net.add_ue(ue);
    net.start();
    CHECK(net.serving_cell(u) == 1u);
  }
  SUBCASE("no coverage detaches") {
    Infrastructure enb(0, Vec3(0, 0, 25));
    net.add_cell(enb);
    CellularParams p;
    p.min_rsrp_dbm = -40;
    CellularNetwork strict(sim, world, p, log);
    strict.add_cell(enb);
    Infrastructure ue(2, Vec3(500, 0, 0));
    const auto u = strict.add_ue(ue);
    strict.start();
    CHECK_FALSE(strict.serving_cell(u).has_value());
    const auto flow = log.add_flow(Technology::Cellular, 0, 2);
    strict.send_downlink(u, make_packet(1, 100, sim.now(), flow));
    CHECK(log.stats(flow).lost == 1);
  }
}

namespace {

struct SidelinkRun {
  double pdr = 0;
  double latency = 0;
  std::uint64_t collisions = 0;
};

// n transmitters at 40 m, each with a paired receiver on the ground below.
SidelinkRun run_sidelink(int n, std::uint64_t seed, double seconds = 20) {
  const World world = open_field();
  Simulator sim;
  TrafficLog log;
  SidelinkNetwork net(sim, world, {}, log, seed);
  std::vector<std::unique_ptr<Infrastructure>> nodes;
  std::vector<std::uint32_t> tx, rx, flows;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0, 600);
  std::uniform_int_distribution<int> phase(0, 99);
  for (int i = 0; i < n; ++i) {
    const Vec2 p(pos(rng), pos(rng));
    nodes.push_back(std::make_unique<Infrastructure>(2 * i, Vec3(p.x(), p.y(), 40)));
    tx.push_back(net.add_node(*nodes.back()));
    nodes.push_back(std::make_unique<Infrastructure>(2 * i + 1, Vec3(p.x(), p.y(), 0)));
    rx.push_back(net.add_node(*nodes.back()));
    flows.push_back(log.add_flow(Technology::Sidelink, tx[i], rx[i]));
  }
  std::uint64_t id = 0;
  for (int i = 0; i < n; ++i)
    start_traffic(sim, traffic_cam(), SimTime::from_ms(phase(rng)), [&, i] {
      net.broadcast(tx[i], make_packet(++id, 190, sim.now(), flows[i]), {rx[i]});
    });
  sim.run_until(SimTime::from_seconds(seconds));
  SidelinkRun out;
  std::uint64_t sent = 0, delivered = 0;
  double lat = 0;
  std::size_t samples = 0;
  for (auto f : flows) {
    sent += log.stats(f).sent;
    delivered += log.stats(f).delivered;
    for (double l : log.stats(f).latency_s) lat += l;
    samples += log.stats(f).latency_s.size();
  }
  out.pdr = static_cast<double>(delivered) / sent;
  out.latency = lat / samples;
  out.collisions = net.collisions();
  return out;
}

}  // namespace

TEST_CASE("sidelink single transmitter") {
  const auto r = run_sidelink(1, 4);
  CHECK(r.pdr > 0.99);
  CHECK(r.collisions == 0);
  CHECK(r.latency > 0.004);
  CHECK(r.latency <= 0.015);
  CHECK(r.latency < 0.014);  // below the cellular CAM floor (4 + 8 + 2 TTIs)
}

TEST_CASE("sidelink forced collision") {
  const World world = open_field();
  Simulator sim;
  TrafficLog log;
  SidelinkNetwork net(sim, world, {}, log, 1);
  Infrastructure a(0, Vec3(0, 0, 40)), b(1, Vec3(50, 0, 40));
  Infrastructure c(2, Vec3(0, 10, 0)), d(3, Vec3(50, 10, 0));
  const auto na = net.add_node(a);
  const auto nb = net.add_node(b);
  const auto nc = net.add_node(c);
  const auto nd = net.add_node(d);
  net.force_reservation(na, {10, 2});
  net.force_reservation(nb, {10, 2});
  const auto fa = log.add_flow(Technology::Sidelink, na, nb);
  const auto fb = log.add_flow(Technology::Sidelink, nb, na);
  net.broadcast(na, make_packet(1, 190, sim.now(), fa), {nb, nc});
  net.broadcast(nb, make_packet(2, 190, sim.now(), fb), {na, nd});
  sim.run_until(SimTime::from_seconds(1));
  CHECK(log.stats(fa).delivered == 0);
  CHECK(log.stats(fb).delivered == 0);
  CHECK(log.stats(fa).lost == 2);
  CHECK(net.collisions() == 4);

  // Same subframe, different subchannel: third parties decode both.
  net.force_reservation(nb, {10, 3});
  net.broadcast(na, make_packet(3, 190, sim.now(), fa), {nc});
  net.broadcast(nb, make_packet(4, 190, sim.now(), fb), {nd});
  sim.run_until(SimTime::from_seconds(2));
  CHECK(log.stats(fa).delivered == 1);
  CHECK(log.stats(fb).delivered == 1);
}

TEST_CASE("sidelink pdr falls with load and is reproducible") {
  auto mean_pdr = [](int n) {
    double s = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) s += run_sidelink(n, seed * 31 + n).pdr;
    return s / 6;
  };
  const double p2 = mean_pdr(2), p8 = mean_pdr(8), p32 = mean_pdr(32);
  CHECK(p2 >= p8);
  CHECK(p8 > p32);
  for (double p : {p2, p8, p32}) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  const auto a = run_sidelink(12, 77, 5), b = run_sidelink(12, 77, 5);
  CHECK(a.pdr == b.pdr);
  CHECK(a.collisions == b.collisions);
}

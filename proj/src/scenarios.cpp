#include "hvsim/scenarios.hpp"

#include "hvsim/energy.hpp"
#include "hvsim/prediction.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

namespace hvsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_value(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

enum : std::uint64_t {
  kStreamPlacement = 1,
  kStreamTraffic = 2,
  kStreamRadio = 3,
  kStreamMission = 4,
  kStreamCars = 5,
};

// Shared state of one replication.
struct RunContext {
  RunContext(const ScenarioConfig& c, const ScenarioAssets& a, int run)
      : cfg(c), assets(a), world(a.world), traffic(a.world.roads), seed(c.seed + run) {}

  std::mt19937_64 stream(std::uint64_t id, std::uint64_t sub = 0) const {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(id * 1000003ULL + sub)));
  }

  Uav& add_uav(const Vec3& start, std::vector<SteeringConfig> defaults) {
    const auto id = static_cast<std::uint32_t>(10000 + uavs.size());
    auto uav = std::make_unique<Uav>(id, start, cfg.mobility.uav.quadrotor);
    const auto& configured = cfg.mobility.uav.steerings;
    for (const auto& s : configured.empty() ? defaults : configured)
      uav->add_steering(make_steering(s));
    uav->set_bounds(world.bounds);
    uav->set_home(start);
    uav->set_cruise_altitude(start.z());
    uav->set_hold_point(start);
    uav->set_battery(std::make_shared<Battery>(cfg.mobility.uav.battery_capacity, false));
    uavs.push_back(std::move(uav));
    return *uavs.back();
  }

  void start_mobility() {
    const double dt = cfg.mobility.step_s;
    const SimTime period = SimTime::from_seconds(dt);
    sim.schedule_periodic(
        period, period,
        [this, dt] {
          for (auto& c : controllers) c();
          const SimTime now = sim.now();
          traffic.step(dt, now);
          for (auto& u : uavs) {
            u->step(dt, now);
            max_uav_speed = std::max(max_uav_speed, u->velocity().norm());
          }
          for (const auto& car : traffic.cars())
            max_car_speed = std::max(max_car_speed, car->velocity().norm());
        },
        EventCategory::Mobility);
  }

  void add_mobility_metrics(RunMetrics& m) const {
    m["max_uav_speed"] = max_uav_speed;
    m["max_car_speed"] = max_car_speed;
    m["car_emergencies"] = static_cast<double>(traffic.stats().emergencies);
    if (std::isfinite(traffic.stats().min_gap)) m["min_car_gap"] = traffic.stats().min_gap;
    if (!uavs.empty()) {
      double e = 0;
      for (const auto& u : uavs) e += u->battery()->capacity() - u->battery()->remaining();
      m["uav_energy_j"] = e / static_cast<double>(uavs.size());
    }
  }

  void start_power_trace(std::ostream* out) {
    if (!out || uavs.empty()) return;
    *out << "time,mobility_w,communication_w,remaining_j\n";
    sim.schedule_periodic(
        SimTime::from_seconds(1), SimTime::from_seconds(1),
        [this, out, last_m = 0.0, last_c = 0.0]() mutable {
          const auto& b = *uavs.front()->battery();
          const double m = b.drained(DrainSource::Mobility);
          const double c = b.drained(DrainSource::Communication);
          char buf[128];
          std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6f,%.6f\n", sim.now().seconds(), m - last_m,
                        c - last_c, b.remaining());
          *out << buf;
          last_m = m;
          last_c = c;
        },
        EventCategory::Other);
  }

  const ScenarioConfig& cfg;
  const ScenarioAssets& assets;
  const World& world;
  Simulator sim;
  Traffic traffic;
  std::vector<std::unique_ptr<Uav>> uavs;
  std::vector<std::function<void()>> controllers;
  std::uint64_t seed;
  std::uint64_t next_packet = 0;
  double max_uav_speed = 0.0;
  double max_car_speed = 0.0;
};

// Places `n` cars on random lanes; with `near`, only on edges whose midpoint
// lies within `radius` (falling back to the closest edges).
std::vector<Car*> spawn_cars(RunContext& ctx, int n, std::optional<Vec2> near, double radius) {
  const RoadGraph& g = ctx.world.roads;
  const CarParams& p = ctx.cfg.mobility.car;
  const double spacing = 2.0 * (p.length + p.idm.min_gap) + 10.0;
  std::vector<std::uint32_t> edges;
  std::vector<std::pair<double, std::uint32_t>> by_distance;
  for (std::uint32_t e = 0; e < g.edges().size(); ++e) {
    const auto& edge = g.edge(e);
    if (edge.length < 3.0 * p.length) continue;
    const Vec2 mid = 0.5 * (g.node(edge.from).position + g.node(edge.to).position);
    const double d = near ? (mid - *near).norm() : 0.0;
    by_distance.push_back({d, e});
    if (d <= radius) edges.push_back(e);
  }
  if (by_distance.empty()) throw std::runtime_error("road network has no drivable edges");
  const std::size_t want = std::max<std::size_t>(8, static_cast<std::size_t>(n));
  if (edges.size() < want) {
    std::sort(by_distance.begin(), by_distance.end());
    edges.clear();
    for (std::size_t i = 0; i < std::min(want, by_distance.size()); ++i)
      edges.push_back(by_distance[i].second);
  }

  auto rng = ctx.stream(kStreamPlacement);
  std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LanePosition> placed;
  std::vector<Car*> cars;
  for (int i = 0; i < n; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
      const auto e = edges[pick(rng)];
      const auto& edge = g.edge(e);
      LanePosition lp;
      lp.edge = e;
      lp.lane = static_cast<std::uint32_t>(unit(rng) * edge.lanes) % edge.lanes;
      lp.offset = unit(rng) * (edge.length - p.length);
      ok = std::none_of(placed.begin(), placed.end(), [&](const LanePosition& o) {
        return o.edge == lp.edge && o.lane == lp.lane && std::abs(o.offset - lp.offset) < spacing;
      });
      if (ok) {
        placed.push_back(lp);
        const auto id = static_cast<std::uint32_t>(ctx.traffic.cars().size());
        cars.push_back(&ctx.traffic.add(std::make_unique<Car>(
            id, g, lp, p, splitmix64(ctx.seed * 7919 + kStreamCars * 131 + id))));
      }
    }
    if (!ok) throw std::runtime_error("cannot place " + std::to_string(n) + " cars on the map");
  }
  return cars;
}

SteeringConfig waypoint_steering(double gain) {
  SteeringConfig s;
  s.name = "waypoint";
  s.params["approach_gain"] = gain;
  return s;
}

Packet next_packet(RunContext& ctx, std::uint32_t size, std::uint32_t src, std::uint32_t dst,
                   std::uint32_t flow) {
  Packet p;
  p.id = ++ctx.next_packet;
  p.size_bytes = size;
  p.created = ctx.sim.now();
  p.src = src;
  p.dst = dst;
  p.flow = flow;
  return p;
}

SimTime random_phase(std::mt19937_64& rng, double interval_s) {
  const auto ms = std::max<std::int64_t>(1, std::llround(interval_s * 1e3));
  return SimTime::from_ms(std::uniform_int_distribution<std::int64_t>(0, ms - 1)(rng));
}

void add_traffic_metrics(RunMetrics& m, const TrafficLog& log, double duration) {
  std::uint64_t sent = 0, delivered = 0;
  double latency_sum = 0.0;
  std::size_t latency_n = 0;
  for (std::uint32_t f = 0; f < log.flow_count(); ++f) {
    const auto& s = log.stats(f);
    sent += s.sent;
    delivered += s.delivered;
    for (double l : s.latency_s) latency_sum += l;
    latency_n += s.latency_s.size();
  }
  m["packets_sent"] = static_cast<double>(sent);
  m["packets_delivered"] = static_cast<double>(delivered);
  m["pdr"] = sent ? static_cast<double>(delivered) / static_cast<double>(sent) : 0.0;
  m["latency_mean_s"] = latency_n ? latency_sum / static_cast<double>(latency_n) : std::nan("");
  (void)duration;
}

// --- aerial sensors ---------------------------------------------------------

RunMetrics run_aerial_sensor(RunContext& ctx, const RunOptions& opt) {
  const auto& cfg = ctx.cfg;
  const auto cars = spawn_cars(ctx, cfg.cars, std::nullopt, 0.0);
  const double altitude = cfg.mobility.uav.cruise_altitude;
  const Vec3 lift(0, 0, altitude);
  for (Car* car : cars) {
    Uav& uav = ctx.add_uav(car->position() + lift, {waypoint_steering(0.5)});
    uav.set_role(UavRole::Relay);
    ctx.controllers.push_back([&uav, car, lift] { uav.set_hold_point(car->position() + lift); });
  }
  ctx.start_mobility();
  ctx.start_power_trace(opt.power_csv);

  TrafficLog log(opt.packet_csv != nullptr);
  const bool sidelink = cfg.radio.technology == Technology::Sidelink;
  const RadioPowerParams radio_power;
  const double tx_joules =
      communication_energy(RadioState::Tx, cfg.radio.tx_power_ue_dbm, kTti, radio_power);
  auto rng = ctx.stream(kStreamTraffic);
  const int n = cfg.cars;

  std::unique_ptr<Infrastructure> enb;
  std::unique_ptr<CellularNetwork> cell;
  std::unique_ptr<SidelinkNetwork> side;
  std::vector<std::uint32_t> tx_id(n), rx_id(n);
  if (sidelink) {
    side = std::make_unique<SidelinkNetwork>(ctx.sim, ctx.world, cfg.sidelink_params(), log,
                                             ctx.stream(kStreamRadio)());
    for (int i = 0; i < n; ++i) tx_id[i] = side->add_node(*ctx.uavs[i]);
    for (int i = 0; i < n; ++i) rx_id[i] = side->add_node(*cars[i]);
  } else {
    enb = std::make_unique<Infrastructure>(0, enb_position(cfg, ctx.world));
    cell = std::make_unique<CellularNetwork>(ctx.sim, ctx.world, cfg.cellular_params(), log);
    cell->add_cell(*enb);
    for (int i = 0; i < n; ++i) tx_id[i] = cell->add_ue(*ctx.uavs[i]);
    for (int i = 0; i < n; ++i) rx_id[i] = cell->add_ue(*cars[i]);
    cell->start();
  }
  const auto tech = sidelink ? Technology::Sidelink : Technology::Cellular;
  for (int i = 0; i < n; ++i) {
    const auto flow = log.add_flow(tech, ctx.uavs[i]->id(), cars[i]->id());
    Uav* uav = ctx.uavs[i].get();
    start_traffic(ctx.sim, cfg.traffic, random_phase(rng, cfg.traffic.interval_s),
                  [&, i, flow, uav] {
                    const auto p = next_packet(ctx, cfg.traffic.size_bytes, uav->id(),
                                               cars[i]->id(), flow);
                    uav->battery()->drain(tx_joules / kTti, kTti, DrainSource::Communication,
                                          ctx.sim.now());
                    if (side) side->broadcast(tx_id[i], p, {rx_id[i]});
                    else cell->send_uplink(tx_id[i], p, rx_id[i]);
                  });
  }

  ctx.sim.run_until(SimTime::from_seconds(cfg.duration_s));
  RunMetrics m;
  add_traffic_metrics(m, log, cfg.duration_s);
  if (side) {
    m["collisions"] = static_cast<double>(side->collisions());
  } else {
    m["handovers"] = static_cast<double>(cell->stats().handovers);
  }
  ctx.add_mobility_metrics(m);
  if (opt.packet_csv) log.write_csv(*opt.packet_csv, static_cast<int>(ctx.seed - cfg.seed));
  return m;
}

// --- aerial base station ----------------------------------------------------

struct Region {
  Vec2 min;
  Vec2 max;
  bool contains(const Vec2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
  Vec2 clamp(const Vec2& p) const { return p.cwiseMax(min).cwiseMin(max); }
  Vec2 center() const { return 0.5 * (min + max); }
};

struct Timing {
  double wall_s = 0.0;
};

RunMetrics run_aerial_bs(RunContext& ctx, const RunOptions& opt, bool radios = true,
                         Timing* timing = nullptr) {
  const auto& cfg = ctx.cfg;
  const auto& bs = cfg.aerial_bs;
  const auto& b = ctx.world.bounds;

  auto rng = ctx.stream(kStreamMission);
  const auto& nodes = ctx.world.roads.nodes();
  if (nodes.empty()) throw std::runtime_error("road network is empty");
  const Vec2 cluster =
      nodes[std::uniform_int_distribution<std::size_t>(0, nodes.size() - 1)(rng)].position;
  const auto cars = spawn_cars(ctx, cfg.cars, cluster, bs.cluster_radius);

  std::vector<Region> regions;
  for (int k = 0; k < bs.uavs; ++k) {
    const double w = (b.max.x() - b.min.x()) / bs.uavs;
    regions.push_back({Vec2(b.min.x() + k * w, b.min.y()), Vec2(b.min.x() + (k + 1) * w, b.max.y())});
    Uav& uav = ctx.add_uav(Vec3(regions[k].center().x(), regions[k].center().y(), bs.min_altitude),
                           {waypoint_steering(0.5)});
    uav.set_role(UavRole::Relay);
  }

  TrafficLog log(opt.packet_csv != nullptr);
  std::unique_ptr<Infrastructure> enb;
  std::unique_ptr<CellularNetwork> net;
  std::vector<std::uint32_t> ue(cars.size());
  if (radios) {
    net = std::make_unique<CellularNetwork>(ctx.sim, ctx.world, cfg.cellular_params(), log);
    if (bs.uavs == 0) {
      enb = std::make_unique<Infrastructure>(0, enb_position(cfg, ctx.world));
      net->add_cell(*enb);
    }
    for (int k = 0; k < bs.uavs; ++k) net->add_cell(*ctx.uavs[k], static_cast<std::uint32_t>(k));
    for (std::size_t i = 0; i < cars.size(); ++i) ue[i] = net->add_ue(*cars[i]);
    net->start();
  }

  // Each UAV hovers over the centroid of the UEs it serves (or, for detached
  // UEs, those inside its region), climbing with the cluster's spread.
  for (int k = 0; k < bs.uavs; ++k) {
    Uav* uav = ctx.uavs[k].get();
    const Region region = regions[k];
    ctx.controllers.push_back([&, uav, region, k] {
      Vec2 sum(0, 0);
      int count = 0;
      std::vector<Vec2> members;
      for (std::size_t i = 0; i < cars.size(); ++i) {
        const Vec2 p = cars[i]->position().head<2>();
        const auto serving = net ? net->serving_cell(ue[i]) : std::nullopt;
        const bool mine = serving ? *serving == static_cast<std::uint32_t>(k) : region.contains(p);
        if (!mine) continue;
        members.push_back(p);
        sum += p;
        ++count;
      }
      Vec2 target = region.center();
      double spread = 0.0;
      if (count > 0) {
        target = region.clamp(sum / count);
        for (const auto& p : members) spread = std::max(spread, (p - target).norm());
      }
      const double z = std::clamp(spread, bs.min_altitude, bs.max_altitude);
      uav->set_hold_point(Vec3(target.x(), target.y(), z));
    });
  }
  ctx.start_mobility();
  ctx.start_power_trace(opt.power_csv);

  auto traffic_rng = ctx.stream(kStreamTraffic);
  std::vector<std::uint32_t> flows;
  if (radios) {
    for (std::size_t i = 0; i < cars.size(); ++i) {
      const auto flow = log.add_flow(Technology::Cellular, 0, cars[i]->id());
      flows.push_back(flow);
      start_traffic(ctx.sim, cfg.traffic, random_phase(traffic_rng, cfg.traffic.interval_s),
                    [&, i, flow] {
                      net->send_downlink(
                          ue[i], next_packet(ctx, cfg.traffic.size_bytes, 0, cars[i]->id(), flow));
                    });
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  ctx.sim.run_until(SimTime::from_seconds(cfg.duration_s));
  if (timing)
    timing->wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunMetrics m;
  if (radios) {
    add_traffic_metrics(m, log, cfg.duration_s);
    double rate = 0.0;
    for (auto f : flows) rate += log.stats(f).throughput_bps(cfg.duration_s);
    m["rate_per_ue_mbps"] = flows.empty() ? 0.0 : rate / flows.size() / 1e6;
    m["handovers"] = static_cast<double>(net->stats().handovers);
  }
  ctx.add_mobility_metrics(m);
  if (opt.packet_csv) log.write_csv(*opt.packet_csv, static_cast<int>(ctx.seed - cfg.seed));
  return m;
}

// --- prediction -------------------------------------------------------------

PathLossParams map_path_loss(const ScenarioConfig& cfg) {
  PathLossParams pl = cfg.channel;
  pl.baseline = LogDistanceParams::friis(cfg.radio.carrier_frequency, pl.baseline.exponent,
                                         pl.baseline.reference_distance_m);
  return pl;
}

RunMetrics run_prediction(RunContext& ctx, const RunOptions& opt) {
  const auto& cfg = ctx.cfg;
  const auto& pc = cfg.prediction;
  const auto& b = ctx.world.bounds;
  const Vec3 enb = enb_position(cfg, ctx.world);
  const PathLossParams pl = map_path_loss(cfg);
  const double margin = 20.0;

  auto placement = ctx.stream(kStreamPlacement);
  std::uniform_real_distribution<double> ux(b.min.x() + margin, b.max.x() - margin);
  std::uniform_real_distribution<double> uy(b.min.y() + margin, b.max.y() - margin);
  std::vector<std::size_t> layer;  // altitude index per UAV
  for (std::size_t k = 0; k < pc.altitudes.size(); ++k) {
    const double z = pc.altitudes[k];
    for (int j = 0; j < pc.uavs_per_altitude; ++j) {
      Uav& uav = ctx.add_uav(Vec3(ux(placement), uy(placement), z), {waypoint_steering(0.2)});
      uav.set_role(UavRole::Mission);
      auto rng = std::make_shared<std::mt19937_64>(ctx.stream(kStreamMission, ctx.uavs.size()));
      uav.set_mission_source([rng, ux, uy, z](const Uav&) mutable -> std::optional<Waypoint> {
        return Waypoint{Vec3(ux(*rng), uy(*rng), z), 2.0};
      });
      layer.push_back(k);
    }
  }
  ctx.start_mobility();
  ctx.start_power_trace(opt.power_csv);

  const std::size_t nh = pc.horizons.size(), na = pc.altitudes.size();
  std::vector<double> rsrp_sum(na * nh, 0.0), pos_sum(na * nh, 0.0);
  std::vector<std::size_t> count(na * nh, 0);
  const double horizon_max = *std::max_element(pc.horizons.begin(), pc.horizons.end());
  const SimTime end = SimTime::from_seconds(cfg.duration_s);

  ctx.sim.schedule_periodic(
      SimTime::from_seconds(pc.warmup), SimTime::from_seconds(pc.sample_interval),
      [&] {
        std::vector<PredictedTrack> tracks;
        tracks.reserve(ctx.uavs.size());
        for (const auto& u : ctx.uavs) tracks.push_back(predict(*u, horizon_max, pc.tau));
        for (std::size_t h = 0; h < nh; ++h) {
          const SimTime due = ctx.sim.now() + SimTime::from_seconds(pc.horizons[h]);
          if (due > end) continue;
          std::vector<Vec3> predicted;
          for (const auto& t : tracks) {
            const auto idx = std::clamp<long long>(std::llround(pc.horizons[h] / pc.tau) - 1, 0,
                                                   static_cast<long long>(t.positions.size()) - 1);
            predicted.push_back(t.positions[idx]);
          }
          ctx.sim.schedule_at(
              due,
              [&, h, predicted = std::move(predicted)] {
                for (std::size_t i = 0; i < ctx.uavs.size(); ++i) {
                  const Vec3 actual = ctx.uavs[i]->position();
                  const double truth =
                      rsrp_dbm(cfg.radio.tx_power_enb_dbm, path_loss_db(enb, actual, pl, ctx.world));
                  const double guess =
                      ctx.assets.maps[layer[i]].lookup(predicted[i].head<2>()).rsrp_dbm;
                  const std::size_t cell = layer[i] * nh + h;
                  rsrp_sum[cell] += std::abs(guess - truth);
                  pos_sum[cell] += (predicted[i] - actual).norm();
                  ++count[cell];
                }
              },
              EventCategory::Other);
        }
      },
      EventCategory::Other);

  ctx.sim.run_until(end);
  RunMetrics m;
  for (std::size_t h = 0; h < nh; ++h) {
    double rs = 0, ps = 0;
    std::size_t c = 0;
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t cell = a * nh + h;
      const std::string tag = "_alt" + fmt_g(pc.altitudes[a]) + "_h" + fmt_g(pc.horizons[h]);
      if (count[cell] == 0) continue;
      m["rsrp_error_db" + tag] = rsrp_sum[cell] / count[cell];
      m["position_error_m" + tag] = pos_sum[cell] / count[cell];
      rs += rsrp_sum[cell];
      ps += pos_sum[cell];
      c += count[cell];
    }
    if (c) m["position_error_m_h" + fmt_g(pc.horizons[h])] = ps / c;
    (void)rs;
  }
  for (std::size_t a = 0; a < na; ++a) {
    double rs = 0;
    std::size_t c = 0;
    for (std::size_t h = 0; h < nh; ++h) {
      rs += rsrp_sum[a * nh + h];
      c += count[a * nh + h];
    }
    if (c) m["rsrp_error_db_alt" + fmt_g(pc.altitudes[a])] = rs / c;
  }
  ctx.add_mobility_metrics(m);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

World build_world(const ScenarioConfig& config) {
  if (config.world.osm) return load_world(*config.world.osm, config.world.osm_options,
                                          config.world.use_cache);
  return make_synthetic_world(config.world.synthetic);
}

Vec3 enb_position(const ScenarioConfig& config, const World& world) {
  const Vec3 c = 0.5 * (world.bounds.min + world.bounds.max);
  return Vec3(c.x(), c.y(), config.enb_height);
}

std::vector<ConnectivityMap> build_heatmaps(const ScenarioConfig& config, const World& world,
                                            const std::vector<double>& altitudes,
                                            double cell_size) {
  std::vector<ConnectivityMap> maps;
  for (double z : altitudes)
    maps.push_back(build_connectivity_map(world, enb_position(config, world),
                                          map_path_loss(config), config.radio.tx_power_enb_dbm,
                                          cell_size, z));
  return maps;
}

ScenarioAssets build_assets(const ScenarioConfig& config) {
  ScenarioAssets a;
  a.world = build_world(config);
  if (config.kind == ScenarioKind::Prediction)
    a.maps = build_heatmaps(config, a.world, config.prediction.altitudes,
                            config.prediction.cell_size);
  return a;
}

RunMetrics run_once(const ScenarioConfig& config, const ScenarioAssets& assets, int run,
                    const RunOptions& options) {
  RunContext ctx(config, assets, run);
  ctx.sim.enable_profiling(options.profile);
  switch (config.kind) {
    case ScenarioKind::AerialSensor:
      return run_aerial_sensor(ctx, options);
    case ScenarioKind::AerialBs:
    case ScenarioKind::Scalability:
      return run_aerial_bs(ctx, options);
    case ScenarioKind::Prediction:
      return run_prediction(ctx, options);
  }
  throw std::logic_error("unknown scenario kind");
}

ScenarioResult run_scenario(const ScenarioConfig& config, const RunnerOptions& options) {
  const ScenarioAssets assets = build_assets(config);
  const int runs = config.runs;
  std::vector<std::optional<RunMetrics>> done(runs);
  std::vector<std::string> errors(runs);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};

  if (options.write_files) std::filesystem::create_directories(config.output);
  auto worker = [&] {
    for (int r; !failed && (r = next++) < runs;) {
      try {
        RunOptions ro;
        std::ofstream packets, power;
        if (options.packet_logs) {
          packets.open(config.output / ("packets_run" + std::to_string(r) + ".csv"));
          power.open(config.output / ("power_run" + std::to_string(r) + ".csv"));
          ro.packet_csv = &packets;
          ro.power_csv = &power;
        }
        done[r] = run_once(config, assets, r, ro);
        spdlog::debug("run {} of {} finished", r + 1, runs);
      } catch (const std::exception& e) {
        errors[r] = e.what();
        failed = true;
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, runs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ScenarioResult result;
  for (int r = 0; r < runs; ++r) {
    if (!errors[r].empty() && result.error.empty()) {
      result.complete = false;
      result.error = "run " + std::to_string(r) + ": " + errors[r];
    }
    if (done[r] && result.complete) result.runs.push_back(*done[r]);
  }
  if (result.runs.size() != static_cast<std::size_t>(runs)) result.complete = false;

  std::map<std::string, std::vector<double>> samples;
  for (const auto& run : result.runs)
    for (const auto& [k, v] : run) samples[k].push_back(v);
  for (const auto& [k, v] : samples) result.summary.push_back(aggregate(k, v));

  if (options.write_files) {
    std::ofstream runs_csv(config.output / "runs.csv");
    write_runs_csv(runs_csv, result);
    std::ofstream agg(config.output / "aggregate.csv");
    write_aggregate_csv(agg, result);
    for (std::size_t i = 0; i < assets.maps.size(); ++i) {
      std::ofstream grid(config.output /
                         ("heatmap_alt" + fmt_g(config.prediction.altitudes[i]) + ".csv"));
      assets.maps[i].write_csv(grid);
    }
  }
  return result;
}

void write_runs_csv(std::ostream& out, const ScenarioResult& result) {
  std::vector<std::string> names;
  for (const auto& s : result.summary) names.push_back(s.name);
  out << "run,status";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    out << r << ",ok";
    for (const auto& n : names) {
      const auto it = result.runs[r].find(n);
      out << ',' << (it == result.runs[r].end() ? std::string("nan") : fmt_value(it->second));
    }
    out << '\n';
  }
  if (!result.complete) out << result.runs.size() << ",failed\n";
}

void write_aggregate_csv(std::ostream& out, const ScenarioResult& result) {
  if (!result.complete)
    out << "# partial: " << result.runs.size() << " completed runs; " << result.error << '\n';
  out << "metric,mean,ci95_half_width,runs\n";
  for (const auto& s : result.summary) {
    out << s.name << ',' << fmt_value(s.mean) << ','
        << (s.half_width ? fmt_value(*s.half_width) : std::string("NA")) << ',' << s.samples
        << '\n';
  }
}

// ---------------------------------------------------------------------------

BenchPoint bench_point(const ScenarioConfig& config, const World& world, int ues,
                       std::uint32_t packet_size, double interval_s, bool radios) {
  ScenarioConfig c = config;
  c.kind = ScenarioKind::AerialBs;
  c.cars = ues;
  c.traffic = {packet_size, interval_s};
  ScenarioAssets assets;
  assets.world = world;
  RunContext ctx(c, assets, 0);
  ctx.sim.enable_profiling(true);
  Timing timing;
  run_aerial_bs(ctx, {}, radios, &timing);

  BenchPoint p;
  p.ues = ues;
  p.packet_size = packet_size;
  p.interval_s = interval_s;
  p.radios = radios;
  p.wall_s = timing.wall_s;
  const auto& prof = ctx.sim.profile();
  p.mobility_s = prof.wall_seconds[static_cast<int>(EventCategory::Mobility)];
  p.network_s = prof.wall_seconds[static_cast<int>(EventCategory::Network)];
  p.other_s = prof.wall_seconds[static_cast<int>(EventCategory::Other)];
  p.network_events = prof.events[static_cast<int>(EventCategory::Network)];
  for (auto e : prof.events) p.events += e;
  return p;
}

BenchReport run_scalability(const ScenarioConfig& config) {
  const World world = build_world(config);
  const auto& sc = config.scalability;
  const std::uint32_t base_size = 1000;
  const double base_interval = 0.01;
  const int base_ues = sc.ue_counts[sc.ue_counts.size() / 2];
  BenchReport report;

  auto timed = [&](const char* sweep, int ues, std::uint32_t size, double iv, bool radios) {
    BenchPoint best;
    for (int r = 0; r < sc.repeats; ++r) {
      auto p = bench_point(config, world, ues, size, iv, radios);
      if (r == 0 || p.wall_s < best.wall_s) best = p;
    }
    best.sweep = sweep;
    return best;
  };
  auto normalize = [&](std::size_t first) {
    for (std::size_t i = first; i < report.points.size(); ++i)
      report.points[i].normalized = report.points[i].wall_s / report.points[first].wall_s;
  };

  std::size_t first = report.points.size();
  std::vector<double> xs, ys;
  for (int n : sc.ue_counts) {
    report.points.push_back(timed("ues", n, base_size, base_interval, true));
    xs.push_back(n);
    ys.push_back(report.points.back().wall_s);
  }
  normalize(first);
  if (xs.size() >= 2) report.ue_fit_r_squared = linear_fit(xs, ys).r_squared;

  first = report.points.size();
  for (auto size : sc.packet_sizes)
    report.points.push_back(timed("packet_size", base_ues, size, base_interval, true));
  normalize(first);

  first = report.points.size();
  for (double iv : sc.intervals)
    report.points.push_back(timed("interval", base_ues, base_size, iv, true));
  normalize(first);

  // Full aerial-BS scenario against the same run with radios disabled.
  const auto full = timed("full", base_ues, config.traffic.size_bytes, config.traffic.interval_s,
                          true);
  const auto mobility = timed("mobility_only", base_ues, config.traffic.size_bytes,
                              config.traffic.interval_s, false);
  report.points.push_back(full);
  report.points.push_back(mobility);
  report.mobility_only_share = mobility.wall_s / full.wall_s;
  const double handler_total = full.mobility_s + full.network_s + full.other_s;
  report.mobility_handler_share = handler_total > 0 ? full.mobility_s / handler_total : 0.0;
  return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
  out << "sweep,ues,packet_size,interval_s,radios,wall_s,normalized,mobility_s,network_s,"
         "other_s,events,network_events\n";
  char buf[256];
  for (const auto& p : report.points) {
    std::snprintf(buf, sizeof buf, "%s,%d,%u,%g,%d,%.6f,%.4f,%.6f,%.6f,%.6f,%llu,%llu\n",
                  p.sweep.c_str(), p.ues, p.packet_size, p.interval_s, p.radios ? 1 : 0, p.wall_s,
                  p.normalized, p.mobility_s, p.network_s, p.other_s,
                  static_cast<unsigned long long>(p.events),
                  static_cast<unsigned long long>(p.network_events));
    out << buf;
  }
}

}  // namespace hvsim

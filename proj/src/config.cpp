#include "hvsim/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace hvsim {

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::AerialSensor: return "aerial_sensor";
    case ScenarioKind::AerialBs: return "aerial_bs";
    case ScenarioKind::Prediction: return "prediction";
    case ScenarioKind::Scalability: return "scalability";
  }
  return "?";
}

ScenarioKind scenario_kind_from(std::string_view name) {
  for (auto k : {ScenarioKind::AerialSensor, ScenarioKind::AerialBs, ScenarioKind::Prediction,
                 ScenarioKind::Scalability})
    if (name == to_string(k)) return k;
  throw ConfigError("scenario: unknown kind '" + std::string(name) +
                    "' (expected aerial_sensor, aerial_bs, prediction or scalability)");
}

namespace {

// Map view that remembers which keys were read so leftovers can be
// reported as typos.
class Section {
public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + ": expected a mapping");
  }

  bool present() const { return node_ && node_.IsMap(); }

  template <class T>
  bool get(const char* key, T& out) {
    used_.insert(key);
    if (!present() || !node_[key]) return false;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(key) + ": invalid value");
    }
    return true;
  }

  Section child(const char* key) {
    used_.insert(key);
    return Section(present() ? node_[key] : YAML::Node(), where(key));
  }

  YAML::Node raw(const char* key) {
    used_.insert(key);
    return present() ? node_[key] : YAML::Node();
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

void read_world(Section s, WorldConfig& w, const std::filesystem::path& base) {
  std::string osm;
  if (s.get("osm", osm)) {
    std::filesystem::path p(osm);
    w.osm = p.is_absolute() || base.empty() ? p : base / p;
  }
  s.get("cache", w.use_cache);
  auto h = s.child("random_heights");
  h.get("min", w.osm_options.min_random_height);
  h.get("max", w.osm_options.max_random_height);
  h.get("seed", w.osm_options.seed);
  h.finish();
  s.get("level_height", w.osm_options.level_height);
  auto g = s.child("synthetic");
  auto& sy = w.synthetic;
  g.get("width", sy.width);
  g.get("depth", sy.depth);
  g.get("block_size", sy.block_size);
  g.get("street_width", sy.street_width);
  g.get("min_height", sy.min_height);
  g.get("max_height", sy.max_height);
  g.get("building_probability", sy.building_probability);
  g.get("lanes", sy.lanes);
  g.get("speed_limit", sy.speed_limit);
  g.get("seed", sy.seed);
  g.finish();
  std::vector<double> extent;
  if (s.get("extent", extent)) {
    if (extent.size() != 2 || extent[0] <= 0 || extent[1] <= 0)
      throw ConfigError(s.where("extent") + ": expected [width, depth] > 0");
    w.osm_options.extent = Vec2(extent[0], extent[1]);
  }
  s.get("ceiling", w.osm_options.ceiling);
  sy.ceiling = w.osm_options.ceiling;
  s.finish();
}

std::vector<SteeringConfig> read_steerings(const YAML::Node& list, const std::string& path) {
  std::vector<SteeringConfig> out;
  if (!list || list.IsNull()) return out;
  if (!list.IsSequence()) throw ConfigError(path + ": expected a list");
  for (std::size_t i = 0; i < list.size(); ++i) {
    Section s(list[i], path + "[" + std::to_string(i) + "]");
    SteeringConfig c;
    if (!s.get("name", c.name)) throw ConfigError(s.where("name") + ": required");
    s.get("weight", c.weight);
    s.get("params", c.params);
    s.finish();
    out.push_back(std::move(c));
  }
  return out;
}

void read_mobility(Section s, MobilityConfig& m) {
  s.get("step", m.step_s);
  auto c = s.child("car");
  auto& car = m.car;
  c.get("max_speed", car.max_speed);
  c.get("length", car.length);
  c.get("lane_width", car.lane_width);
  c.get("lane_change_interval", car.lane_change_interval);
  c.get("desired_speed", car.idm.desired_speed);
  c.get("time_headway", car.idm.time_headway);
  c.get("min_gap", car.idm.min_gap);
  c.get("max_accel", car.idm.max_accel);
  c.get("comfortable_decel", car.idm.comfortable_decel);
  c.get("exponent", car.idm.exponent);
  c.get("politeness", car.mobil.politeness);
  c.get("lane_change_threshold", car.mobil.threshold);
  c.get("safe_decel", car.mobil.safe_decel);
  c.get("allow_u_turn", car.allow_u_turn);
  std::string routing;
  if (c.get("routing", routing)) {
    if (routing == "random") car.strategy = RouteStrategy::Random;
    else if (routing == "shortest") car.strategy = RouteStrategy::Shortest;
    else throw ConfigError(c.where("routing") + ": expected random or shortest");
  }
  c.finish();

  auto u = s.child("uav");
  auto& q = m.uav.quadrotor;
  u.get("max_speed", q.max_speed);
  u.get("mass", q.mass);
  u.get("max_tilt", q.max_tilt);
  u.get("max_thrust_ratio", q.max_thrust_ratio);
  u.get("attitude_bandwidth", q.attitude_bandwidth);
  u.get("attitude_damping", q.attitude_damping);
  u.get("max_substep", q.max_substep);
  std::vector<double> inertia;
  if (u.get("inertia", inertia)) {
    if (inertia.size() != 3) throw ConfigError(u.where("inertia") + ": expected [Ixx, Iyy, Izz]");
    q.inertia = Eigen::Vector3d(inertia[0], inertia[1], inertia[2]).asDiagonal();
  }
  u.get("cruise_altitude", m.uav.cruise_altitude);
  u.get("battery_capacity", m.uav.battery_capacity);
  m.uav.steerings = read_steerings(u.raw("steerings"), u.where("steerings"));
  u.finish();
  s.finish();
}

void read_channel(Section s, PathLossParams& p) {
  s.get("wall_loss", p.wall_loss_db);
  s.get("interior_loss", p.interior_loss_db_per_m);
  s.get("exponent", p.baseline.exponent);
  s.get("reference_distance", p.baseline.reference_distance_m);
  std::string counting;
  if (s.get("counting", counting)) {
    if (counting == "crossings") p.counting = WallCounting::Crossings;
    else if (counting == "buildings") p.counting = WallCounting::Buildings;
    else throw ConfigError(s.where("counting") + ": expected crossings or buildings");
  }
  s.finish();
}

void read_radio(Section s, ScenarioConfig& c) {
  std::string tech;
  if (s.get("technology", tech)) {
    if (tech == "cellular") c.radio = RadioConfig::cellular();
    else if (tech == "sidelink") c.radio = RadioConfig::sidelink();
    else throw ConfigError(s.where("technology") + ": expected cellular or sidelink");
  }
  s.get("carrier_frequency", c.radio.carrier_frequency);
  s.get("bandwidth", c.radio.bandwidth);
  s.get("tx_power_ue", c.radio.tx_power_ue_dbm);
  s.get("tx_power_enb", c.radio.tx_power_enb_dbm);
  s.get("noise_figure", c.radio.noise_figure_db);
  s.get("enb_height", c.enb_height);
  s.get("grant_delay", c.cellular.grant_delay_s);
  s.get("processing_delay", c.cellular.ue_processing_s);
  c.sidelink.processing_s = c.cellular.ue_processing_s;
  s.get("buffer_bytes", c.cellular.buffer_bytes);
  s.get("channel_update", c.cellular.channel_update_s);
  auto a = s.child("attach");
  a.get("interval", c.cellular.attach_interval_s);
  a.get("hysteresis", c.cellular.hysteresis_db);
  a.get("min_rsrp", c.cellular.min_rsrp_dbm);
  a.finish();
  auto sl = s.child("sidelink");
  sl.get("period", c.sidelink.period_s);
  sl.get("selection_window", c.sidelink.selection_window_s);
  sl.get("subchannels", c.sidelink.subchannels);
  sl.get("reselection_min", c.sidelink.reselection_min);
  sl.get("reselection_max", c.sidelink.reselection_max);
  sl.get("sinr_threshold", c.sidelink.sinr_threshold_db);
  sl.get("collision_margin", c.sidelink.collision_margin_db);
  sl.finish();
  s.finish();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

ScenarioConfig default_config(ScenarioKind kind) {
  ScenarioConfig c;
  c.kind = kind;
  switch (kind) {
    case ScenarioKind::AerialSensor:
      c.traffic = traffic_cam();
      break;
    case ScenarioKind::AerialBs:
      c.traffic = traffic_cbr();
      c.uavs = c.aerial_bs.uavs;
      break;
    case ScenarioKind::Prediction:
      c.cars = 0;
      c.uavs = static_cast<int>(c.prediction.altitudes.size()) * c.prediction.uavs_per_altitude;
      break;
    case ScenarioKind::Scalability:
      c.traffic = traffic_cbr();
      c.uavs = c.aerial_bs.uavs;
      c.duration_s = 60.0;
      c.runs = 1;
      break;
  }
  return c;
}

ScenarioConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML syntax error: ") + e.what());
  }
  Section s(root, "");
  if (!s.present()) throw ConfigError("config must be a mapping");
  std::string kind;
  if (!s.get("scenario", kind)) throw ConfigError("scenario: required");
  ScenarioConfig c = default_config(scenario_kind_from(kind));

  s.get("duration", c.duration_s);
  s.get("runs", c.runs);
  s.get("seed", c.seed);
  std::string out;
  if (s.get("output", out)) {
    std::filesystem::path p(out);
    c.output = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  read_world(s.child("world"), c.world, base_dir);

  auto v = s.child("vehicles");
  v.get("cars", c.cars);
  const bool uavs_given = v.get("uavs", c.uavs);
  v.finish();

  read_mobility(s.child("mobility"), c.mobility);
  read_channel(s.child("channel"), c.channel);
  read_radio(s.child("radio"), c);

  auto t = s.child("traffic");
  t.get("packet_size", c.traffic.size_bytes);
  t.get("interval", c.traffic.interval_s);
  t.finish();

  auto b = s.child("aerial_bs");
  b.get("uavs", c.aerial_bs.uavs);
  b.get("min_altitude", c.aerial_bs.min_altitude);
  b.get("max_altitude", c.aerial_bs.max_altitude);
  b.get("cluster_radius", c.aerial_bs.cluster_radius);
  b.finish();

  auto p = s.child("prediction");
  p.get("altitudes", c.prediction.altitudes);
  p.get("horizons", c.prediction.horizons);
  p.get("tau", c.prediction.tau);
  p.get("cell_size", c.prediction.cell_size);
  p.get("sample_interval", c.prediction.sample_interval);
  p.get("warmup", c.prediction.warmup);
  p.get("uavs_per_altitude", c.prediction.uavs_per_altitude);
  p.finish();

  auto sc = s.child("scalability");
  sc.get("ue_counts", c.scalability.ue_counts);
  sc.get("packet_sizes", c.scalability.packet_sizes);
  sc.get("intervals", c.scalability.intervals);
  sc.get("repeats", c.scalability.repeats);
  sc.finish();
  s.finish();

  if (!uavs_given) {
    if (c.kind == ScenarioKind::AerialBs || c.kind == ScenarioKind::Scalability)
      c.uavs = c.aerial_bs.uavs;
    else if (c.kind == ScenarioKind::Prediction)
      c.uavs = static_cast<int>(c.prediction.altitudes.size()) * c.prediction.uavs_per_altitude;
    else
      c.uavs = c.cars;
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

CellularParams ScenarioConfig::cellular_params() const {
  CellularParams p = cellular;
  p.radio = radio;
  p.radio.technology = Technology::Cellular;
  p.path_loss = channel;
  return p;
}

SidelinkParams ScenarioConfig::sidelink_params() const {
  SidelinkParams p = sidelink;
  p.radio = radio;
  p.radio.technology = Technology::Sidelink;
  p.path_loss = channel;
  return p;
}

void ScenarioConfig::validate() const {
  require(duration_s > 0, "duration: must be > 0");
  require(runs >= 1, "runs: must be >= 1");
  require(cars >= 0 && uavs >= 0, "vehicles: counts must be >= 0");
  require(mobility.step_s > 0, "mobility.step: must be > 0");
  if (world.osm) require(std::filesystem::exists(*world.osm),
                         "world.osm: file not found: " + world.osm->string());
  const auto& sy = world.synthetic;
  require(sy.width > 0 && sy.depth > 0 && sy.ceiling > 0, "world.synthetic: extent must be > 0");
  require(sy.min_height <= sy.max_height, "world.synthetic: min_height > max_height");
  require(world.osm_options.min_random_height <= world.osm_options.max_random_height,
          "world.random_heights: min > max");
  try {
    mobility.car.idm.validate();
    mobility.car.mobil.validate();
    mobility.uav.quadrotor.validate();
    for (const auto& st : mobility.uav.steerings) make_steering(st);
    channel.validate();
    cellular_params().validate();
    sidelink_params().validate();
    traffic.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(mobility.car.max_speed > 0, "mobility.car.max_speed: must be > 0");
  require(mobility.uav.battery_capacity > 0, "mobility.uav.battery_capacity: must be > 0");
  require(enb_height > 0, "radio.enb_height: must be > 0");

  switch (kind) {
    case ScenarioKind::AerialSensor:
      require(cars >= 1 && uavs == cars, "vehicles: aerial_sensor needs one uav per car");
      break;
    case ScenarioKind::AerialBs:
    case ScenarioKind::Scalability:
      require(aerial_bs.uavs >= 0 && aerial_bs.uavs <= 2, "aerial_bs.uavs: must be 0, 1 or 2");
      require(aerial_bs.min_altitude > 0 && aerial_bs.min_altitude <= aerial_bs.max_altitude,
              "aerial_bs: altitude range is invalid");
      require(aerial_bs.cluster_radius > 0, "aerial_bs.cluster_radius: must be > 0");
      if (kind == ScenarioKind::AerialBs) require(cars >= 1, "vehicles.cars: must be >= 1");
      break;
    case ScenarioKind::Prediction:
      require(!prediction.altitudes.empty(), "prediction.altitudes: must not be empty");
      require(!prediction.horizons.empty(), "prediction.horizons: must not be empty");
      for (double h : prediction.horizons) require(h > 0, "prediction.horizons: must be > 0");
      require(prediction.tau > 0, "prediction.tau: must be > 0");
      require(prediction.cell_size > 0, "prediction.cell_size: must be > 0");
      require(prediction.sample_interval > 0, "prediction.sample_interval: must be > 0");
      require(prediction.uavs_per_altitude >= 1, "prediction.uavs_per_altitude: must be >= 1");
      break;
  }
  if (kind == ScenarioKind::Scalability) {
    require(!scalability.ue_counts.empty(), "scalability.ue_counts: must not be empty");
    for (int n : scalability.ue_counts) require(n >= 1, "scalability.ue_counts: must be >= 1");
    for (auto sz : scalability.packet_sizes) require(sz > 0, "scalability.packet_sizes: must be > 0");
    for (double iv : scalability.intervals) require(iv > 0, "scalability.intervals: must be > 0");
    require(scalability.repeats >= 1, "scalability.repeats: must be >= 1");
  }
}

}  // namespace hvsim

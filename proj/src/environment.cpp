#include "hvsim/environment.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace hvsim {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

bool GeoPoint::valid() const {
  return std::isfinite(latitude) && std::isfinite(longitude) && std::abs(latitude) <= 90.0 &&
         std::abs(longitude) <= 180.0;
}

Vec2 to_cartesian(const GeoPoint& p, const GeoPoint& origin) {
  const double dlat = (p.latitude - origin.latitude) * kDegToRad;
  const double dlon = (p.longitude - origin.longitude) * kDegToRad;
  return Vec2(kEarthRadiusM * dlon * std::cos(origin.latitude * kDegToRad), kEarthRadiusM * dlat);
}

GeoPoint to_geo(const Vec2& xy, const GeoPoint& origin) {
  const double lat = origin.latitude + xy.y() / kEarthRadiusM / kDegToRad;
  const double lon =
      origin.longitude + xy.x() / (kEarthRadiusM * std::cos(origin.latitude * kDegToRad)) / kDegToRad;
  return GeoPoint{lat, lon};
}

// ---------------------------------------------------------------------------
// Buildings

double Building::area() const { return std::abs(signed_area(footprint)); }

std::optional<Building> make_building(std::vector<Vec2> ring, double height) {
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (!is_simple_polygon(ring)) return std::nullopt;
  if (signed_area(ring) < 0) std::reverse(ring.begin(), ring.end());
  Building b;
  b.footprint = std::move(ring);
  b.height = height;
  b.bbox = Box2::empty();
  for (const auto& v : b.footprint) b.bbox.expand(v);
  return b;
}

// ---------------------------------------------------------------------------
// Road graph

std::uint32_t RoadGraph::add_node(std::int64_t osm_id, const Vec2& position) {
  nodes_.push_back(RoadNode{osm_id, position});
  out_.emplace_back();
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::uint32_t RoadGraph::add_edge(std::uint32_t from, std::uint32_t to, std::uint32_t lanes,
                                  double speed_limit) {
  if (from >= nodes_.size() || to >= nodes_.size())
    throw std::out_of_range("RoadGraph::add_edge: unknown node");
  RoadEdge e;
  e.from = from;
  e.to = to;
  e.lanes = std::max<std::uint32_t>(1, lanes);
  e.speed_limit = speed_limit;
  e.length = (nodes_[to].position - nodes_[from].position).norm();
  edges_.push_back(e);
  const auto id = static_cast<std::uint32_t>(edges_.size() - 1);
  out_[from].push_back(id);
  return id;
}

std::vector<std::uint32_t> RoadGraph::successors(std::uint32_t edge) const {
  const RoadEdge& e = edges_.at(edge);
  std::vector<std::uint32_t> result;
  for (std::uint32_t next : out_[e.to])
    if (edges_[next].to != e.from) result.push_back(next);
  return result;
}

std::optional<std::uint32_t> RoadGraph::reverse_of(std::uint32_t edge) const {
  const RoadEdge& e = edges_.at(edge);
  for (std::uint32_t cand : out_[e.to])
    if (edges_[cand].to == e.from) return cand;
  return std::nullopt;
}

std::vector<std::uint32_t> RoadGraph::shortest_path(std::uint32_t from_node,
                                                    std::uint32_t to_node) const {
  if (from_node >= nodes_.size() || to_node >= nodes_.size() || from_node == to_node) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nodes_.size(), inf);
  std::vector<std::int64_t> via(nodes_.size(), -1);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[from_node] = 0.0;
  open.emplace(0.0, from_node);
  while (!open.empty()) {
    auto [d, n] = open.top();
    open.pop();
    if (d > dist[n]) continue;
    if (n == to_node) break;
    for (std::uint32_t e : out_[n]) {
      const RoadEdge& edge = edges_[e];
      const double nd = d + edge.length;
      if (nd < dist[edge.to]) {
        dist[edge.to] = nd;
        via[edge.to] = e;
        open.emplace(nd, edge.to);
      }
    }
  }
  if (via[to_node] < 0) return {};
  std::vector<std::uint32_t> path;
  for (std::uint32_t n = to_node; n != from_node;) {
    const auto e = static_cast<std::uint32_t>(via[n]);
    path.push_back(e);
    n = edges_[e].from;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// ---------------------------------------------------------------------------
// Spatial index

BuildingIndex::BuildingIndex(const std::vector<Building>& buildings, const Box2& area,
                             double cell_size)
    : area_(area), cell_(cell_size) {
  if (buildings.empty()) return;
  nx_ = std::max(1, static_cast<int>(std::ceil((area.max.x() - area.min.x()) / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((area.max.y() - area.min.y()) / cell_)));
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  boxes_.reserve(buildings.size());
  for (std::uint32_t i = 0; i < buildings.size(); ++i) {
    const Box2& b = buildings[i].bbox;
    boxes_.push_back(b);
    const int x0 = std::clamp(static_cast<int>((b.min.x() - area.min.x()) / cell_), 0, nx_ - 1);
    const int x1 = std::clamp(static_cast<int>((b.max.x() - area.min.x()) / cell_), 0, nx_ - 1);
    const int y0 = std::clamp(static_cast<int>((b.min.y() - area.min.y()) / cell_), 0, ny_ - 1);
    const int y1 = std::clamp(static_cast<int>((b.max.y() - area.min.y()) / cell_), 0, ny_ - 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(i);
  }
}

void BuildingIndex::query(const Vec2& a, const Vec2& b, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (cells_.empty()) return;
  const Box2 seg{a.cwiseMin(b), a.cwiseMax(b)};
  // Cells along the segment, sampled at half-cell steps and padded by one
  // cell on each side so no crossed cell is missed.
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.5 * cell_))));
  int last_cx = -2, last_cy = -2;
  for (int s = 0; s <= steps; ++s) {
    const Vec2 p = a + (b - a) * (static_cast<double>(s) / steps);
    const int cx = static_cast<int>(std::floor((p.x() - area_.min.x()) / cell_));
    const int cy = static_cast<int>(std::floor((p.y() - area_.min.y()) / cell_));
    if (cx == last_cx && cy == last_cy) continue;
    last_cx = cx;
    last_cy = cy;
    for (int y = std::max(0, cy - 1); y <= std::min(ny_ - 1, cy + 1); ++y)
      for (int x = std::max(0, cx - 1); x <= std::min(nx_ - 1, cx + 1); ++x)
        for (std::uint32_t id : cells_[static_cast<std::size_t>(y) * nx_ + x])
          if (boxes_[id].overlaps(seg)) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

void World::finalize() {
  Box2 area = bounds.footprint();
  for (auto& b : buildings) {
    b.bbox = Box2::empty();
    for (const auto& v : b.footprint) b.bbox.expand(v);
    area.expand(b.bbox.min);
    area.expand(b.bbox.max);
  }
  index = BuildingIndex(buildings, area);
}

double World::max_building_height() const {
  double h = 0.0;
  for (const auto& b : buildings) h = std::max(h, b.height);
  return h;
}

// ---------------------------------------------------------------------------
// OSM parsing

namespace {

namespace pt = boost::property_tree;

std::optional<double> leading_number(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_drivable(const std::string& highway) {
  static const std::unordered_set<std::string> kinds = {
      "motorway",     "trunk",       "primary",        "secondary",     "tertiary",
      "unclassified", "residential", "service",        "living_street", "motorway_link",
      "trunk_link",   "primary_link", "secondary_link", "tertiary_link", "road"};
  return kinds.count(highway) > 0;
}

double parse_speed(const std::string& value, double fallback) {
  auto n = leading_number(value);
  if (!n || *n <= 0) return fallback;
  if (value.find("mph") != std::string::npos) return *n * 0.44704;
  return *n / 3.6;
}

struct RawWay {
  std::vector<std::int64_t> refs;
  std::unordered_map<std::string, std::string> tags;
};

}  // namespace

World parse_osm(std::string_view xml, const OsmOptions& options) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw OsmError("malformed OSM XML at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto root = tree.get_child_optional("osm");
  if (!root) throw OsmError("malformed OSM XML: missing <osm> root element");

  std::unordered_map<std::int64_t, GeoPoint> nodes;
  std::vector<RawWay> ways;
  std::optional<GeoPoint> bounds_min;

  try {
    for (const auto& [name, child] : *root) {
      if (name == "node") {
        const auto id = child.get<std::int64_t>("<xmlattr>.id");
        GeoPoint g{child.get<double>("<xmlattr>.lat"), child.get<double>("<xmlattr>.lon")};
        if (!g.valid()) throw OsmError("node " + std::to_string(id) + " has invalid coordinates");
        nodes.emplace(id, g);
      } else if (name == "way") {
        RawWay w;
        for (const auto& [tag, sub] : child) {
          if (tag == "nd") {
            w.refs.push_back(sub.get<std::int64_t>("<xmlattr>.ref"));
          } else if (tag == "tag") {
            w.tags[sub.get<std::string>("<xmlattr>.k")] = sub.get<std::string>("<xmlattr>.v");
          }
        }
        ways.push_back(std::move(w));
      } else if (name == "bounds") {
        bounds_min = GeoPoint{child.get<double>("<xmlattr>.minlat"),
                              child.get<double>("<xmlattr>.minlon")};
      }
    }
  } catch (const pt::ptree_error& e) {
    throw OsmError(std::string("malformed OSM element: ") + e.what());
  }

  if (nodes.empty() || ways.empty()) throw OsmError("empty map: no nodes or ways");

  World world;
  if (bounds_min && bounds_min->valid()) {
    world.origin = *bounds_min;
  } else {
    GeoPoint o{90.0, 180.0};
    for (const auto& [id, g] : nodes) {
      o.latitude = std::min(o.latitude, g.latitude);
      o.longitude = std::min(o.longitude, g.longitude);
    }
    world.origin = o;
  }

  const auto inside_extent = [&](const Vec2& p) {
    if (!options.extent) return true;
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= options.extent->x() &&
           p.y() <= options.extent->y();
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> random_height(options.min_random_height,
                                                       options.max_random_height);
  std::unordered_map<std::int64_t, std::uint32_t> road_nodes;

  for (const RawWay& way : ways) {
    std::vector<Vec2> pts;
    pts.reserve(way.refs.size());
    bool complete = true;
    for (auto ref : way.refs) {
      auto it = nodes.find(ref);
      if (it == nodes.end()) {
        complete = false;
        break;
      }
      pts.push_back(to_cartesian(it->second, world.origin));
    }
    if (!complete || pts.size() < 2) continue;

    if (auto b = way.tags.find("building"); b != way.tags.end() && b->second != "no") {
      if (way.refs.size() < 4 || way.refs.front() != way.refs.back()) continue;
      // Heights are drawn for every candidate so the sequence does not
      // depend on which ways are later rejected.
      std::optional<double> height;
      if (auto h = way.tags.find("height"); h != way.tags.end()) height = leading_number(h->second);
      if ((!height || *height <= 0) && way.tags.count("building:levels")) {
        if (auto lv = leading_number(way.tags.at("building:levels")); lv && *lv > 0)
          height = *lv * options.level_height;
      }
      const double drawn = random_height(rng);
      const double h = (height && *height > 0) ? *height : drawn;
      auto building = make_building(pts, h);
      if (!building) continue;
      if (options.extent && !(inside_extent(building->bbox.min) && inside_extent(building->bbox.max)))
        continue;
      world.buildings.push_back(std::move(*building));
      continue;
    }

    auto hw = way.tags.find("highway");
    if (hw == way.tags.end() || !is_drivable(hw->second)) continue;
    int direction = 0;  // 0 both, 1 forward, -1 backward
    if (auto ow = way.tags.find("oneway"); ow != way.tags.end()) {
      if (ow->second == "yes" || ow->second == "1" || ow->second == "true") direction = 1;
      if (ow->second == "-1" || ow->second == "reverse") direction = -1;
    }
    std::uint32_t lanes = 1;
    if (auto ln = way.tags.find("lanes"); ln != way.tags.end()) {
      if (auto v = leading_number(ln->second); v && *v >= 1) {
        lanes = static_cast<std::uint32_t>(*v);
        if (direction == 0) lanes = std::max<std::uint32_t>(1, lanes / 2);
      }
    }
    double speed = 50.0 / 3.6;
    if (auto ms = way.tags.find("maxspeed"); ms != way.tags.end())
      speed = parse_speed(ms->second, speed);

    const auto node_index = [&](std::size_t k) {
      const std::int64_t ref = way.refs[k];
      auto it = road_nodes.find(ref);
      if (it != road_nodes.end()) return it->second;
      const auto id = world.roads.add_node(ref, pts[k]);
      road_nodes.emplace(ref, id);
      return id;
    };
    for (std::size_t k = 0; k + 1 < way.refs.size(); ++k) {
      if (!inside_extent(pts[k]) || !inside_extent(pts[k + 1])) continue;
      if (pts[k] == pts[k + 1]) continue;
      const auto a = node_index(k);
      const auto b = node_index(k + 1);
      if (direction >= 0) world.roads.add_edge(a, b, lanes, speed);
      if (direction <= 0) world.roads.add_edge(b, a, lanes, speed);
    }
  }

  if (world.buildings.empty() && world.roads.edges().empty())
    throw OsmError("empty map: no buildings or drivable roads");

  if (options.extent) {
    world.bounds = Box3{Vec3(0, 0, 0), Vec3(options.extent->x(), options.extent->y(), options.ceiling)};
  } else {
    Box2 area = Box2::empty();
    for (const auto& b : world.buildings) {
      area.expand(b.bbox.min);
      area.expand(b.bbox.max);
    }
    for (const auto& n : world.roads.nodes()) area.expand(n.position);
    world.bounds = Box3{Vec3(area.min.x(), area.min.y(), 0.0),
                        Vec3(area.max.x(), area.max.y(),
                             std::max(options.ceiling, world.max_building_height()))};
  }
  world.finalize();
  return world;
}

World parse_osm_file(const std::filesystem::path& path, const OsmOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OsmError("cannot open OSM file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_osm(ss.str(), options);
}

std::string to_osm_xml(const World& world) {
  std::ostringstream out;
  out.precision(12);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"hvsim\">\n";
  const GeoPoint lo = to_geo(world.bounds.min.head<2>(), world.origin);
  const GeoPoint hi = to_geo(world.bounds.max.head<2>(), world.origin);
  out << "  <bounds minlat=\"" << world.origin.latitude << "\" minlon=\"" << world.origin.longitude
      << "\" maxlat=\"" << std::max(lo.latitude, hi.latitude) << "\" maxlon=\""
      << std::max(lo.longitude, hi.longitude) << "\"/>\n";
  std::int64_t next_id = 1;
  std::ostringstream ways;
  ways.precision(12);
  for (const auto& b : world.buildings) {
    const std::int64_t first = next_id;
    for (const auto& v : b.footprint) {
      const GeoPoint g = to_geo(v, world.origin);
      out << "  <node id=\"" << next_id++ << "\" lat=\"" << g.latitude << "\" lon=\"" << g.longitude
          << "\"/>\n";
    }
    ways << "  <way id=\"" << next_id++ << "\">\n";
    for (std::int64_t id = first; id < first + static_cast<std::int64_t>(b.footprint.size()); ++id)
      ways << "    <nd ref=\"" << id << "\"/>\n";
    ways << "    <nd ref=\"" << first << "\"/>\n";
    ways << "    <tag k=\"building\" v=\"yes\"/>\n    <tag k=\"height\" v=\"" << b.height
         << "\"/>\n  </way>\n";
  }
  const std::int64_t node_base = next_id;
  for (const auto& n : world.roads.nodes()) {
    const GeoPoint g = to_geo(n.position, world.origin);
    out << "  <node id=\"" << next_id++ << "\" lat=\"" << g.latitude << "\" lon=\"" << g.longitude
        << "\"/>\n";
  }
  for (const auto& e : world.roads.edges()) {
    ways << "  <way id=\"" << next_id++ << "\">\n    <nd ref=\"" << node_base + e.from
         << "\"/>\n    <nd ref=\"" << node_base + e.to << "\"/>\n"
         << "    <tag k=\"highway\" v=\"residential\"/>\n    <tag k=\"oneway\" v=\"yes\"/>\n"
         << "    <tag k=\"lanes\" v=\"" << e.lanes << "\"/>\n    <tag k=\"maxspeed\" v=\""
         << e.speed_limit * 3.6 << "\"/>\n  </way>\n";
  }
  out << ways.str() << "</osm>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Binary cache. Layout documented in docs/cache_format.md.

namespace {

constexpr char kMagic[8] = {'H', 'V', 'W', 'O', 'R', 'L', 'D', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.append(raw, sizeof(T));
  }
  void put_vec(const Vec2& v) {
    put(v.x());
    put(v.y());
  }
  std::string& buffer() { return buf_; }

private:
  std::string buf_;
};

class Reader {
public:
  Reader(const char* data, std::size_t n) : data_(data), n_(n) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > n_) throw CacheError("world cache truncated");
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Vec2 get_vec() {
    const double x = get<double>();
    const double y = get<double>();
    return Vec2(x, y);
  }
  std::uint64_t get_count(std::size_t min_record_bytes) {
    const auto n = get<std::uint64_t>();
    if (n > (n_ - pos_) / std::max<std::size_t>(1, min_record_bytes))
      throw CacheError("world cache truncated (count exceeds payload)");
    return n;
  }
  bool done() const { return pos_ == n_; }

private:
  const char* data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t options_key(const OsmOptions& o) {
  Writer w;
  w.put(o.min_random_height);
  w.put(o.max_random_height);
  w.put(o.level_height);
  w.put(o.ceiling);
  w.put(o.seed);
  w.put<std::uint8_t>(o.extent.has_value());
  if (o.extent) w.put_vec(*o.extent);
  return fnv1a(w.buffer().data(), w.buffer().size());
}

void save_cache(const World& world, const std::filesystem::path& path, std::uint64_t key) {
  Writer w;
  w.put(world.origin.latitude);
  w.put(world.origin.longitude);
  for (int i = 0; i < 3; ++i) w.put(world.bounds.min[i]);
  for (int i = 0; i < 3; ++i) w.put(world.bounds.max[i]);
  w.put<std::uint64_t>(world.buildings.size());
  for (const auto& b : world.buildings) {
    w.put(b.height);
    w.put<std::uint64_t>(b.footprint.size());
    for (const auto& v : b.footprint) w.put_vec(v);
  }
  w.put<std::uint64_t>(world.roads.nodes().size());
  for (const auto& n : world.roads.nodes()) {
    w.put(n.osm_id);
    w.put_vec(n.position);
  }
  w.put<std::uint64_t>(world.roads.edges().size());
  for (const auto& e : world.roads.edges()) {
    w.put(e.from);
    w.put(e.to);
    w.put(e.lanes);
    w.put(e.speed_limit);
  }
  const std::string& payload = w.buffer();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CacheError("cannot write world cache: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCacheVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&key), sizeof(key));
  const std::uint64_t size = payload.size();
  out.write(reinterpret_cast<const char*>(&size), sizeof(size));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  const std::uint64_t sum = fnv1a(payload.data(), payload.size());
  out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
  if (!out) throw CacheError("failed writing world cache: " + path.string());
}

World load_cache(const std::filesystem::path& path, std::optional<std::uint64_t> expected_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open world cache: " + path.string());
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader header(raw.data(), raw.size());
  char magic[8];
  for (char& c : magic) c = header.get<char>();
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CacheError("not a world cache file");
  const auto version = header.get<std::uint32_t>();
  if (version != kCacheVersion)
    throw CacheVersionError("world cache version " + std::to_string(version) + ", expected " +
                            std::to_string(kCacheVersion));
  const auto key = header.get<std::uint64_t>();
  if (expected_key && key != *expected_key)
    throw CacheError("world cache was built with different map options");
  const auto size = header.get<std::uint64_t>();
  constexpr std::size_t kHeader = sizeof(kMagic) + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t);
  if (raw.size() < kHeader + sizeof(std::uint64_t) || size != raw.size() - kHeader - sizeof(std::uint64_t))
    throw CacheError("world cache truncated");
  const char* payload = raw.data() + kHeader;
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, payload + size, sizeof(stored_sum));
  if (stored_sum != fnv1a(payload, size)) throw CacheError("world cache checksum mismatch");

  Reader r(payload, size);
  World world;
  world.origin.latitude = r.get<double>();
  world.origin.longitude = r.get<double>();
  for (int i = 0; i < 3; ++i) world.bounds.min[i] = r.get<double>();
  for (int i = 0; i < 3; ++i) world.bounds.max[i] = r.get<double>();
  const auto nb = r.get_count(16);
  world.buildings.reserve(nb);
  for (std::uint64_t i = 0; i < nb; ++i) {
    Building b;
    b.height = r.get<double>();
    const auto nv = r.get_count(16);
    b.footprint.reserve(nv);
    for (std::uint64_t k = 0; k < nv; ++k) b.footprint.push_back(r.get_vec());
    world.buildings.push_back(std::move(b));
  }
  const auto nn = r.get_count(24);
  for (std::uint64_t i = 0; i < nn; ++i) {
    const auto id = r.get<std::int64_t>();
    world.roads.add_node(id, r.get_vec());
  }
  const auto ne = r.get_count(20);
  for (std::uint64_t i = 0; i < ne; ++i) {
    const auto from = r.get<std::uint32_t>();
    const auto to = r.get<std::uint32_t>();
    const auto lanes = r.get<std::uint32_t>();
    const auto speed = r.get<double>();
    try {
      world.roads.add_edge(from, to, lanes, speed);
    } catch (const std::out_of_range&) {
      throw CacheError("world cache references unknown road node");
    }
  }
  if (!r.done()) throw CacheError("world cache has trailing bytes");
  world.finalize();
  return world;
}

World load_world(const std::filesystem::path& osm_path, const OsmOptions& options, bool use_cache) {
  std::filesystem::path cache = osm_path;
  cache += ".hvw";
  if (use_cache && std::filesystem::exists(cache) &&
      std::filesystem::last_write_time(cache) >= std::filesystem::last_write_time(osm_path)) {
    try {
      return load_cache(cache, options_key(options));
    } catch (const CacheError&) {
      // stale or corrupt: fall through and rebuild
    }
  }
  World world = parse_osm_file(osm_path, options);
  if (use_cache) {
    try {
      save_cache(world, cache, options_key(options));
    } catch (const CacheError&) {
    }
  }
  return world;
}

// ---------------------------------------------------------------------------
// Synthetic Manhattan grid

World make_synthetic_world(const SyntheticWorldSpec& spec) {
  if (spec.width <= 0 || spec.depth <= 0 || spec.block_size <= 0 || spec.street_width < 0)
    throw std::invalid_argument("synthetic world: non-positive dimensions");
  World world;
  world.origin = GeoPoint{48.0, 11.0};
  world.bounds = Box3{Vec3(0, 0, 0), Vec3(spec.width, spec.depth, spec.ceiling)};
  const double pitch = spec.block_size + spec.street_width;
  // Keep a street width of margin so the outer lanes stay inside the bounds.
  const double margin = spec.street_width;
  const int nx = static_cast<int>(std::floor((spec.width - 2 * margin) / pitch + 1e-9));
  const int ny = static_cast<int>(std::floor((spec.depth - 2 * margin) / pitch + 1e-9));
  if (nx < 1 || ny < 1) throw std::invalid_argument("synthetic world: smaller than one block");
  const double ox = 0.5 * (spec.width - nx * pitch);
  const double oy = 0.5 * (spec.depth - ny * pitch);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> height(spec.min_height, spec.max_height);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double inset = 0.5 * spec.street_width;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double h = height(rng);
      const bool place = unit(rng) < spec.building_probability;
      if (!place) continue;
      const double x0 = ox + i * pitch + inset;
      const double y0 = oy + j * pitch + inset;
      const double x1 = x0 + spec.block_size;
      const double y1 = y0 + spec.block_size;
      auto b = make_building({Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)}, h);
      world.buildings.push_back(std::move(*b));
    }
  }

  // Road centerlines on the street grid, one node per intersection.
  std::vector<std::vector<std::uint32_t>> grid(static_cast<std::size_t>(nx + 1),
                                                std::vector<std::uint32_t>(ny + 1));
  std::int64_t osm_id = 1;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) grid[i][j] = world.roads.add_node(osm_id++, Vec2(ox + i * pitch, oy + j * pitch));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      if (i < nx) {
        world.roads.add_edge(grid[i][j], grid[i + 1][j], spec.lanes, spec.speed_limit);
        world.roads.add_edge(grid[i + 1][j], grid[i][j], spec.lanes, spec.speed_limit);
      }
      if (j < ny) {
        world.roads.add_edge(grid[i][j], grid[i][j + 1], spec.lanes, spec.speed_limit);
        world.roads.add_edge(grid[i][j + 1], grid[i][j], spec.lanes, spec.speed_limit);
      }
    }
  }
  world.finalize();
  return world;
}

}  // namespace hvsim

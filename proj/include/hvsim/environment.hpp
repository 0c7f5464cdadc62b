#pragma once

// World model: buildings and road network in local cartesian meters,
// built from OpenStreetMap XML, a binary cache, or a synthetic grid.

#include "hvsim/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hvsim {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
  double latitude = 0.0;   // degrees, WGS84
  double longitude = 0.0;  // degrees, WGS84

  bool valid() const;
  bool operator==(const GeoPoint&) const = default;
};

// Equirectangular local tangent plane around `origin`:
// x = R * dlon * cos(lat0), y = R * dlat.
Vec2 to_cartesian(const GeoPoint& p, const GeoPoint& origin);
GeoPoint to_geo(const Vec2& xy, const GeoPoint& origin);

struct Building {
  std::vector<Vec2> footprint;  // counterclockwise, closing vertex not repeated
  double height = 0.0;
  Box2 bbox;

  double area() const;
  bool operator==(const Building& o) const {
    return footprint == o.footprint && height == o.height;
  }
};

// Builds a CCW building; returns nullopt when the ring is not a simple polygon.
std::optional<Building> make_building(std::vector<Vec2> ring, double height);

struct RoadNode {
  std::int64_t osm_id = 0;
  Vec2 position{0.0, 0.0};
  bool operator==(const RoadNode&) const = default;
};

struct RoadEdge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::uint32_t lanes = 1;
  double speed_limit = 13.89;  // m/s
  double length = 0.0;
  bool operator==(const RoadEdge&) const = default;
};

class RoadGraph {
public:
  std::uint32_t add_node(std::int64_t osm_id, const Vec2& position);
  // Throws std::out_of_range if either node id is unknown.
  std::uint32_t add_edge(std::uint32_t from, std::uint32_t to, std::uint32_t lanes,
                         double speed_limit);

  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const RoadNode& node(std::uint32_t i) const { return nodes_.at(i); }
  const RoadEdge& edge(std::uint32_t i) const { return edges_.at(i); }

  const std::vector<std::uint32_t>& out_edges(std::uint32_t node) const { return out_.at(node); }
  // Edges leaving the head of `edge`, excluding the immediate U-turn.
  std::vector<std::uint32_t> successors(std::uint32_t edge) const;
  std::optional<std::uint32_t> reverse_of(std::uint32_t edge) const;

  // Dijkstra over edge lengths; empty when unreachable or from == to.
  std::vector<std::uint32_t> shortest_path(std::uint32_t from_node, std::uint32_t to_node) const;

  bool operator==(const RoadGraph& o) const { return nodes_ == o.nodes_ && edges_ == o.edges_; }

private:
  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::vector<std::uint32_t>> out_;
};

// Uniform grid over building bounding boxes; accelerates link queries.
class BuildingIndex {
public:
  BuildingIndex() = default;
  BuildingIndex(const std::vector<Building>& buildings, const Box2& area, double cell_size = 50.0);

  // Indices of buildings whose bbox may overlap the segment's bbox, ascending.
  void query(const Vec2& a, const Vec2& b, std::vector<std::uint32_t>& out) const;
  bool empty() const { return cells_.empty(); }

private:
  Box2 area_;
  double cell_ = 50.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
  std::vector<Box2> boxes_;
};

struct World {
  GeoPoint origin;
  std::vector<Building> buildings;
  RoadGraph roads;
  Box3 bounds;
  BuildingIndex index;

  // Recomputes building bboxes and the spatial index. Call after edits.
  void finalize();
  double max_building_height() const;

  bool operator==(const World& o) const {
    return origin == o.origin && buildings == o.buildings && roads == o.roads &&
           bounds == o.bounds;
  }
};

struct OsmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OsmOptions {
  double min_random_height = 10.0;
  double max_random_height = 30.0;
  double level_height = 3.0;  // per building:levels
  double ceiling = 250.0;     // world bounds altitude
  std::uint64_t seed = 1;
  // Fixed scenario extent anchored at the origin; content outside is dropped.
  std::optional<Vec2> extent;
};

World parse_osm(std::string_view xml, const OsmOptions& options = {});
World parse_osm_file(const std::filesystem::path& path, const OsmOptions& options = {});

// Writes buildings and roads back as OSM XML (used for test maps and export).
std::string to_osm_xml(const World& world);

struct CacheError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CacheVersionError : CacheError {
  using CacheError::CacheError;
};

inline constexpr std::uint32_t kCacheVersion = 2;

// Hash of the options that change the parsed world; stored in the cache so
// a cache built with other options is not reused.
std::uint64_t options_key(const OsmOptions& options);

void save_cache(const World& world, const std::filesystem::path& path, std::uint64_t key = 0);
// Throws CacheError when `expected_key` is given and differs from the stored one.
World load_cache(const std::filesystem::path& path,
                 std::optional<std::uint64_t> expected_key = std::nullopt);

// Loads `<osm>.hvw` when present and valid, otherwise parses the OSM file
// and writes the cache next to it.
World load_world(const std::filesystem::path& osm_path, const OsmOptions& options = {},
                 bool use_cache = true);

struct SyntheticWorldSpec {
  double width = 1500.0;
  double depth = 750.0;
  double ceiling = 250.0;
  double block_size = 80.0;    // building footprint edge
  double street_width = 30.0;  // gap between blocks, roads run on the centerline
  double min_height = 10.0;
  double max_height = 30.0;
  double building_probability = 0.85;
  std::uint32_t lanes = 2;  // per direction
  double speed_limit = 13.89;
  std::uint64_t seed = 1;
};

// Manhattan grid of box buildings with a road graph on the streets.
World make_synthetic_world(const SyntheticWorldSpec& spec);

}  // namespace hvsim

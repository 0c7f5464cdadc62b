#include "hvsim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hvsim {

namespace {

constexpr double kParamEps = 1e-12;

// Parameters t in [0, 1] where the segment a + t*d meets edge c -> c + e.
void edge_hits(const Vec2& a, const Vec2& d, const Vec2& c, const Vec2& e, std::vector<double>& ts) {
  const double denom = cross2(d, e);
  const Vec2 ac = c - a;
  const double dd = d.squaredNorm();
  if (std::abs(denom) > 1e-15 * std::sqrt(dd * e.squaredNorm())) {
    const double t = cross2(ac, e) / denom;
    const double u = cross2(ac, d) / denom;
    if (t >= -kParamEps && t <= 1 + kParamEps && u >= -kParamEps && u <= 1 + kParamEps)
      ts.push_back(std::clamp(t, 0.0, 1.0));
    return;
  }
  // Parallel: only collinear overlaps matter.
  if (std::abs(cross2(ac, d)) > 1e-9 * std::sqrt(dd)) return;
  for (const Vec2& p : {c, Vec2(c + e)}) {
    const double t = ac.dot(d) / dd + (p - c).dot(d) / dd;
    if (t >= 0.0 && t <= 1.0) ts.push_back(t);
  }
}

bool on_boundary(const Vec2& p, const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& c = poly[i];
    const Vec2 e = poly[(i + 1) % n] - c;
    const double ee = e.squaredNorm();
    if (ee == 0.0) continue;
    const double u = std::clamp((p - c).dot(e) / ee, 0.0, 1.0);
    if ((c + e * u - p).squaredNorm() <= 1e-18 * std::max(1.0, ee)) return true;
  }
  return false;
}

struct Span {
  std::uint32_t building;
  double t0;
  double t1;
};

// Maximal parameter intervals of tx -> rx lying inside building `id`.
void spans_for_building(const Vec2& a, const Vec2& b, const Building& bld, std::uint32_t id,
                        std::vector<Span>& out, std::vector<double>& ts) {
  const Vec2 d = b - a;
  ts.clear();
  ts.push_back(0.0);
  ts.push_back(1.0);
  const std::size_t n = bld.footprint.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& c = bld.footprint[i];
    const Vec2& c2 = bld.footprint[(i + 1) % n];
    edge_hits(a, d, c, c2 - c, ts);
  }
  std::sort(ts.begin(), ts.end());
  bool open = false;
  double start = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double lo = ts[i];
    const double hi = ts[i + 1];
    if (hi - lo <= kParamEps) continue;
    const Vec2 mid = a + d * (0.5 * (lo + hi));
    const bool inside = point_in_polygon(mid, bld.footprint) && !on_boundary(mid, bld.footprint);
    if (inside && !open) {
      open = true;
      start = lo;
    } else if (!inside && open) {
      open = false;
      out.push_back(Span{id, start, lo});
    }
  }
  if (open) out.push_back(Span{id, start, 1.0});
}

void collect_spans(const Vec2& a, const Vec2& b, const World& world, std::vector<Span>& spans) {
  thread_local std::vector<std::uint32_t> ids;
  thread_local std::vector<double> ts;
  spans.clear();
  if (world.index.empty()) {
    ids.clear();
    const Box2 seg{a.cwiseMin(b), a.cwiseMax(b)};
    for (std::uint32_t i = 0; i < world.buildings.size(); ++i)
      if (world.buildings[i].bbox.overlaps(seg)) ids.push_back(i);
  } else {
    world.index.query(a, b, ids);
  }
  if ((b - a).squaredNorm() == 0.0) {
    for (std::uint32_t id : ids)
      if (point_in_polygon(a, world.buildings[id].footprint)) spans.push_back(Span{id, 0.0, 1.0});
    return;
  }
  for (std::uint32_t id : ids) spans_for_building(a, b, world.buildings[id], id, spans, ts);
}

}  // namespace

std::vector<Crossing> intersect_2d(const Vec2& tx, const Vec2& rx, const World& world) {
  thread_local std::vector<Span> spans;
  collect_spans(tx, rx, world, spans);
  std::vector<Crossing> out;
  const Vec2 d = rx - tx;
  for (const Span& s : spans) {
    if (s.t0 > 0.0) out.push_back(Crossing{s.t0, tx + d * s.t0, s.building, true});
    if (s.t1 < 1.0) out.push_back(Crossing{s.t1, tx + d * s.t1, s.building, false});
  }
  std::sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) {
    if (x.t != y.t) return x.t < y.t;
    return x.building < y.building;
  });
  return out;
}

LinkProfile refine_3d(const std::vector<Crossing>& candidates, const Vec3& tx, const Vec3& rx,
                      const World& world, WallCounting counting) {
  LinkProfile profile;
  profile.total_distance = (rx - tx).norm();
  const Vec2 a = tx.head<2>();
  const Vec2 b = rx.head<2>();

  // Rebuild the inside spans from the crossings: per building they alternate
  // entry/exit, and a leading exit means the link starts inside.
  std::vector<Span> spans;
  std::vector<std::uint32_t> with_crossings;
  {
    std::vector<const Crossing*> sorted;
    sorted.reserve(candidates.size());
    for (const auto& c : candidates) sorted.push_back(&c);
    std::stable_sort(sorted.begin(), sorted.end(), [](const Crossing* x, const Crossing* y) {
      if (x->building != y->building) return x->building < y->building;
      return x->t < y->t;
    });
    for (std::size_t i = 0; i < sorted.size();) {
      const std::uint32_t id = sorted[i]->building;
      with_crossings.push_back(id);
      bool inside = !sorted[i]->entering;
      double start = 0.0;
      for (; i < sorted.size() && sorted[i]->building == id; ++i) {
        if (sorted[i]->entering) {
          inside = true;
          start = sorted[i]->t;
        } else {
          if (inside) spans.push_back(Span{id, start, sorted[i]->t});
          inside = false;
        }
      }
      if (inside) spans.push_back(Span{id, start, 1.0});
    }
  }
  // Buildings that contain the whole ground track produce no crossings.
  {
    std::vector<std::uint32_t> ids;
    if (world.index.empty()) {
      for (std::uint32_t i = 0; i < world.buildings.size(); ++i) ids.push_back(i);
    } else {
      world.index.query(a, b, ids);
    }
    const Vec2 mid = 0.5 * (a + b);
    for (std::uint32_t id : ids) {
      if (std::binary_search(with_crossings.begin(), with_crossings.end(), id)) continue;
      if (!world.buildings[id].bbox.contains(mid)) continue;
      if (point_in_polygon(mid, world.buildings[id].footprint)) spans.push_back(Span{id, 0.0, 1.0});
    }
  }

  const double z0 = tx.z();
  const double dz = rx.z() - tx.z();
  const auto below_roof = [&](double t, double h) { return z0 + t * dz < h; };
  std::vector<std::uint32_t> hit;
  for (const Span& s : spans) {
    const double h = world.buildings[s.building].height;
    double lo = s.t0;
    double hi = s.t1;
    if (dz == 0.0) {
      if (!(z0 < h)) continue;
    } else {
      const double t_roof = (h - z0) / dz;
      if (dz > 0)
        hi = std::min(hi, t_roof);
      else
        lo = std::max(lo, t_roof);
    }
    if (hi > lo) {
      profile.obstructed_distance += (hi - lo) * profile.total_distance;
      hit.push_back(s.building);
    }
    if (counting == WallCounting::Crossings) {
      if (s.t0 > 0.0 && below_roof(s.t0, h)) ++profile.n_intersections;
      if (s.t1 < 1.0 && below_roof(s.t1, h)) ++profile.n_intersections;
    }
  }
  if (counting == WallCounting::Buildings) {
    std::sort(hit.begin(), hit.end());
    profile.n_intersections =
        static_cast<int>(std::unique(hit.begin(), hit.end()) - hit.begin());
  }
  profile.obstructed_distance = std::min(profile.obstructed_distance, profile.total_distance);
  return profile;
}

LinkProfile link_profile(const Vec3& tx, const Vec3& rx, const World& world,
                         WallCounting counting) {
  return refine_3d(intersect_2d(tx.head<2>(), rx.head<2>(), world), tx, rx, world, counting);
}

LogDistanceParams LogDistanceParams::friis(double frequency_hz, double exponent,
                                           double reference_distance_m) {
  LogDistanceParams p;
  p.frequency_hz = frequency_hz;
  p.exponent = exponent;
  p.reference_distance_m = reference_distance_m;
  p.reference_loss_db = friis_loss_db(reference_distance_m, frequency_hz);
  return p;
}

void PathLossParams::validate() const {
  if (!(wall_loss_db >= 0)) throw std::invalid_argument("wall loss must be >= 0");
  if (!(interior_loss_db_per_m >= 0)) throw std::invalid_argument("interior loss must be >= 0");
  if (!(baseline.exponent > 0)) throw std::invalid_argument("path loss exponent must be > 0");
  if (!(baseline.reference_distance_m > 0))
    throw std::invalid_argument("reference distance must be > 0");
}

double friis_loss_db(double distance_m, double frequency_hz) {
  return 20.0 * std::log10(4.0 * std::numbers::pi * distance_m * frequency_hz / kSpeedOfLight);
}

double baseline_loss_db(double distance_m, const LogDistanceParams& p) {
  const double d = std::max(distance_m, p.reference_distance_m);
  return p.reference_loss_db + 10.0 * p.exponent * std::log10(d / p.reference_distance_m);
}

double obstacle_loss_db(const LinkProfile& profile, const PathLossParams& params) {
  return profile.n_intersections * params.wall_loss_db +
         profile.obstructed_distance * params.interior_loss_db_per_m;
}

double path_loss_db(const Vec3& tx, const Vec3& rx, const PathLossParams& params,
                    const World& world) {
  const LinkProfile profile = link_profile(tx, rx, world, params.counting);
  return baseline_loss_db(profile.total_distance, params.baseline) +
         obstacle_loss_db(profile, params);
}

// ---------------------------------------------------------------------------

ConnectivityMap::ConnectivityMap(Vec2 origin, double cell_size, double altitude, int rows, int cols)
    : origin_(std::move(origin)),
      cell_size_(cell_size),
      altitude_(altitude),
      rows_(rows),
      cols_(cols),
      values_(static_cast<std::size_t>(rows) * cols, 0.0) {
  if (!(cell_size > 0)) throw std::invalid_argument("connectivity map: cell size must be > 0");
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("connectivity map: empty grid");
}

Vec2 ConnectivityMap::cell_center(int row, int col) const {
  return origin_ + Vec2((col + 0.5) * cell_size_, (row + 0.5) * cell_size_);
}

ConnectivityMap::Lookup ConnectivityMap::lookup(const Vec2& position) const {
  const Vec2 rel = (position - origin_) / cell_size_;
  int col = static_cast<int>(std::floor(rel.x()));
  int row = static_cast<int>(std::floor(rel.y()));
  Lookup out;
  if (col < 0 || row < 0 || col >= cols_ || row >= rows_) {
    out.clamped = true;
    col = std::clamp(col, 0, cols_ - 1);
    row = std::clamp(row, 0, rows_ - 1);
  }
  out.rsrp_dbm = at(row, col);
  return out;
}

void ConnectivityMap::write_csv(std::ostream& out) const {
  out << "# origin_x=" << origin_.x() << ",origin_y=" << origin_.y()
      << ",cell_size=" << cell_size_ << ",altitude=" << altitude_ << ",rows=" << rows_
      << ",cols=" << cols_ << "\n";
  out << std::fixed << std::setprecision(3);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      if (c) out << ',';
      out << at(r, c);
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

ConnectivityMap ConnectivityMap::read_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("# ", 0) != 0)
    throw std::runtime_error("connectivity map: missing header");
  double ox = 0, oy = 0, cell = 0, alt = 0;
  int rows = 0, cols = 0;
  std::istringstream hs(header.substr(2));
  std::string field;
  while (std::getline(hs, field, ',')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const double v = std::stod(field.substr(eq + 1));
    if (key == "origin_x") ox = v;
    else if (key == "origin_y") oy = v;
    else if (key == "cell_size") cell = v;
    else if (key == "altitude") alt = v;
    else if (key == "rows") rows = static_cast<int>(v);
    else if (key == "cols") cols = static_cast<int>(v);
  }
  ConnectivityMap map(Vec2(ox, oy), cell, alt, rows, cols);
  std::string line;
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw std::runtime_error("connectivity map: missing rows");
    std::istringstream ls(line);
    for (int c = 0; c < cols; ++c) {
      if (!std::getline(ls, field, ',')) throw std::runtime_error("connectivity map: short row");
      map.at(r, c) = std::stod(field);
    }
  }
  return map;
}

ConnectivityMap build_connectivity_map(const World& world, const Vec3& tx,
                                       const PathLossParams& params, double tx_power_dbm,
                                       double cell_size, double altitude) {
  if (!(cell_size > 0)) throw std::invalid_argument("connectivity map: cell size must be > 0");
  const Vec3 size = world.bounds.size();
  if (altitude < world.bounds.min.z() || altitude > world.bounds.max.z())
    throw std::invalid_argument("connectivity map: altitude outside world bounds");
  const int cols = std::max(1, static_cast<int>(std::ceil(size.x() / cell_size - 1e-9)));
  const int rows = std::max(1, static_cast<int>(std::ceil(size.y() / cell_size - 1e-9)));
  ConnectivityMap map(world.bounds.min.head<2>(), cell_size, altitude, rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Vec2 center = map.cell_center(r, c);
      const Vec3 rx(center.x(), center.y(), altitude);
      map.at(r, c) = rsrp_dbm(tx_power_dbm, path_loss_db(tx, rx, params, world));
    }
  }
  return map;
}

}  // namespace hvsim

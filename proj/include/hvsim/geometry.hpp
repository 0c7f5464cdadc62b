#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace hvsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

struct Box2 {
  Vec2 min{0.0, 0.0};
  Vec2 max{0.0, 0.0};

  bool contains(const Vec2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
  bool overlaps(const Box2& o) const {
    return min.x() <= o.max.x() && o.min.x() <= max.x() && min.y() <= o.max.y() &&
           o.min.y() <= max.y();
  }
  void expand(const Vec2& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  static Box2 empty();
};

struct Box3 {
  Vec3 min{0.0, 0.0, 0.0};
  Vec3 max{0.0, 0.0, 0.0};

  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(min).cwiseMin(max); }
  Vec3 size() const { return max - min; }
  Box2 footprint() const { return Box2{min.head<2>(), max.head<2>()}; }
  bool operator==(const Box3& o) const { return min == o.min && max == o.max; }
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Shoelace formula; positive for counterclockwise rings. The ring is given
// without the repeated closing vertex.
double signed_area(std::span<const Vec2> ring);

// Even-odd rule. Points exactly on the boundary may land on either side.
bool point_in_polygon(const Vec2& p, std::span<const Vec2> ring);

// No two non-adjacent edges touch and no vertex is repeated.
bool is_simple_polygon(std::span<const Vec2> ring);

}  // namespace hvsim

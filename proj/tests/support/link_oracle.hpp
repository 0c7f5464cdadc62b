#pragma once

// Brute-force reference for link shadowing: march along the 3D link in
// fixed steps and classify each sample against axis-aligned box buildings.
// Deliberately shares no code with the channel implementation.

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

struct Box {
  double x0, y0, x1, y1, height;
  bool contains_xy(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
};

struct Profile {
  int walls = 0;
  double obstructed = 0.0;
};

inline Profile sample_link(const double tx[3], const double rx[3], const std::vector<Box>& boxes,
                           double step = 0.01) {
  const double dx = rx[0] - tx[0], dy = rx[1] - tx[1], dz = rx[2] - tx[2];
  const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
  const long n = std::max(1L, static_cast<long>(std::ceil(len / step)));
  const double h = len / n;
  Profile out;
  for (const Box& b : boxes) {
    // Cell-centred samples for the obstructed length.
    long inside = 0;
    for (long k = 0; k < n; ++k) {
      const double t = (k + 0.5) / n;
      if (b.contains_xy(tx[0] + t * dx, tx[1] + t * dy) && tx[2] + t * dz < b.height) ++inside;
    }
    out.obstructed += inside * h;
    // Footprint membership flips between consecutive node samples are walls.
    bool prev = b.contains_xy(tx[0], tx[1]);
    for (long k = 1; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      const bool cur = b.contains_xy(tx[0] + t * dx, tx[1] + t * dy);
      if (cur != prev) {
        const double tm = (k - 0.5) / n;
        if (tx[2] + tm * dz < b.height) ++out.walls;
      }
      prev = cur;
    }
  }
  return out;
}

// Non-overlapping random boxes inside [0, extent]^2.
inline std::vector<Box> random_boxes(std::mt19937_64& rng, int count, double extent,
                                     double min_size, double max_size, double min_h,
                                     double max_h) {
  std::uniform_real_distribution<double> pos(0.0, extent), size(min_size, max_size),
      height(min_h, max_h);
  std::vector<Box> boxes;
  int attempts = 0;
  while (static_cast<int>(boxes.size()) < count && attempts++ < 100000) {
    const double w = size(rng), d = size(rng);
    const double x = pos(rng), y = pos(rng);
    if (x + w > extent || y + d > extent) continue;
    Box b{x, y, x + w, y + d, height(rng)};
    bool clash = false;
    for (const Box& o : boxes)
      if (b.x0 < o.x1 + 1 && o.x0 < b.x1 + 1 && b.y0 < o.y1 + 1 && o.y0 < b.y1 + 1) clash = true;
    if (!clash) boxes.push_back(b);
  }
  return boxes;
}

}  // namespace oracle

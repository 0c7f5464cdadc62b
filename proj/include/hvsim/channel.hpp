#pragma once

// Deterministic obstacle shadowing. Candidate wall crossings are found in
// the ground plane, then checked against the link's elevation profile. The
// resulting wall count N and in-building length d_obs extend a log-distance
// baseline:  L = L_PL(d) + N * beta + d_obs * gamma.

#include "hvsim/environment.hpp"

#include <iosfwd>
#include <vector>

namespace hvsim {

inline constexpr double kSpeedOfLight = 299792458.0;

struct Crossing {
  double t = 0.0;  // fraction along tx -> rx
  Vec2 point{0.0, 0.0};
  std::uint32_t building = 0;
  bool entering = false;
};

// All boundary crossings of the 2D segment tx -> rx with building footprints,
// sorted by distance from tx. Passing exactly through a vertex yields one
// crossing; grazing a vertex or edge without entering yields none.
std::vector<Crossing> intersect_2d(const Vec2& tx, const Vec2& rx, const World& world);

enum class WallCounting { Crossings, Buildings };

struct LinkProfile {
  int n_intersections = 0;
  double obstructed_distance = 0.0;  // d_obs, meters
  double total_distance = 0.0;       // 3D link length
};

LinkProfile refine_3d(const std::vector<Crossing>& candidates, const Vec3& tx, const Vec3& rx,
                      const World& world, WallCounting counting = WallCounting::Crossings);

LinkProfile link_profile(const Vec3& tx, const Vec3& rx, const World& world,
                         WallCounting counting = WallCounting::Crossings);

struct LogDistanceParams {
  double reference_loss_db = 0.0;  // L0 at d0
  double reference_distance_m = 1.0;
  double exponent = 2.0;
  double frequency_hz = 2.1e9;

  // L0 anchored to free space at d0.
  static LogDistanceParams friis(double frequency_hz, double exponent = 2.0,
                                 double reference_distance_m = 1.0);
};

struct PathLossParams {
  double wall_loss_db = 9.2;              // beta
  double interior_loss_db_per_m = 0.32;   // gamma
  LogDistanceParams baseline = LogDistanceParams::friis(2.1e9);
  WallCounting counting = WallCounting::Crossings;

  void validate() const;  // throws std::invalid_argument
};

// 20 log10(4 pi d f / c)
double friis_loss_db(double distance_m, double frequency_hz);

// Distances below d0 are clamped to d0.
double baseline_loss_db(double distance_m, const LogDistanceParams& params);

double obstacle_loss_db(const LinkProfile& profile, const PathLossParams& params);

double path_loss_db(const Vec3& tx, const Vec3& rx, const PathLossParams& params,
                    const World& world);

inline double rsrp_dbm(double tx_power_dbm, double loss_db) { return tx_power_dbm - loss_db; }

class ConnectivityMap {
public:
  ConnectivityMap() = default;
  ConnectivityMap(Vec2 origin, double cell_size, double altitude, int rows, int cols);

  const Vec2& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  double altitude() const { return altitude_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& at(int row, int col) { return values_.at(static_cast<std::size_t>(row) * cols_ + col); }
  double at(int row, int col) const {
    return values_.at(static_cast<std::size_t>(row) * cols_ + col);
  }
  const std::vector<double>& values() const { return values_; }
  Vec2 cell_center(int row, int col) const;

  struct Lookup {
    double rsrp_dbm = 0.0;
    bool clamped = false;  // position fell outside the grid
  };
  Lookup lookup(const Vec2& position) const;

  // Header line with origin/cell_size/altitude/rows/cols, then one
  // comma-separated line per row (row 0 = lowest y).
  void write_csv(std::ostream& out) const;
  static ConnectivityMap read_csv(std::istream& in);

private:
  Vec2 origin_{0.0, 0.0};
  double cell_size_ = 1.0;
  double altitude_ = 0.0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

// Evaluates RSRP at every cell center of the world footprint at `altitude`.
ConnectivityMap build_connectivity_map(const World& world, const Vec3& tx,
                                       const PathLossParams& params, double tx_power_dbm,
                                       double cell_size, double altitude);

}  // namespace hvsim

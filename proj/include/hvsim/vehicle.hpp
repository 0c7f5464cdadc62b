#pragma once

// Abstract vehicle shared by cars, UAVs and fixed infrastructure.

#include "hvsim/des.hpp"
#include "hvsim/geometry.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

namespace hvsim {

class Battery;

enum class VehicleKind { Car, Uav, Infrastructure };

const char* to_string(VehicleKind kind);

struct Waypoint {
  Vec3 target{0.0, 0.0, 0.0};
  double arrival_radius = 2.0;
};

struct KinematicSnapshot {
  SimTime time;
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 velocity{0.0, 0.0, 0.0};
  Vec3 acceleration{0.0, 0.0, 0.0};
};

// Everything the hierarchical predictor consumes for one vehicle.
struct PredictionInput {
  Vec3 position{0.0, 0.0, 0.0};
  std::optional<Vec3> steering;     // displacement used verbatim at i = 0
  std::vector<Waypoint> waypoints;  // in visiting order
  std::vector<Vec3> history;        // oldest -> newest, excluding `position`
  double speed = 0.0;
  double tau = 1.0;
};

class Vehicle {
public:
  Vehicle(std::uint32_t id, VehicleKind kind, double max_speed);
  virtual ~Vehicle() = default;
  Vehicle(const Vehicle&) = delete;
  Vehicle& operator=(const Vehicle&) = delete;

  std::uint32_t id() const { return id_; }
  VehicleKind kind() const { return kind_; }
  double max_speed() const { return max_speed_; }

  KinematicSnapshot snapshot() const { return state_; }
  const Vec3& position() const { return state_.position; }
  const Vec3& velocity() const { return state_.velocity; }
  const Vec3& acceleration() const { return state_.acceleration; }

  std::deque<Waypoint>& waypoints() { return waypoints_; }
  const std::deque<Waypoint>& waypoints() const { return waypoints_; }

  // Recent positions, oldest first, sampled whenever the vehicle moved.
  const std::deque<Vec3>& history() const { return history_; }

  void set_bounds(const Box3& bounds) { bounds_ = bounds; }
  const std::optional<Box3>& bounds() const { return bounds_; }
  // Number of times a step left the world and was clamped back.
  std::uint64_t bounds_violations() const { return bounds_violations_; }

  std::shared_ptr<Battery> battery() const { return battery_; }
  void set_battery(std::shared_ptr<Battery> battery) { battery_ = std::move(battery); }

  // Advances the vehicle by dt seconds, ending at time `now`.
  virtual void step(double dt, SimTime now) = 0;

  // Kind-specific inputs for the predictor; `tau` is the prediction step.
  virtual PredictionInput prediction_input(double tau) const;

  // Teleports without touching history (scenario setup).
  void place(const Vec3& position, SimTime now = {});

protected:
  // Stores the post-step state, enforcing the speed cap and world bounds.
  void commit(const Vec3& position, const Vec3& velocity, const Vec3& acceleration, SimTime now);

  static constexpr std::size_t kHistoryCapacity = 32;

private:
  std::uint32_t id_;
  VehicleKind kind_;
  double max_speed_;
  KinematicSnapshot state_;
  std::deque<Waypoint> waypoints_;
  std::deque<Vec3> history_;
  std::optional<Box3> bounds_;
  std::uint64_t bounds_violations_ = 0;
  std::shared_ptr<Battery> battery_;
};

// Fixed node such as an eNB; never moves.
class Infrastructure final : public Vehicle {
public:
  Infrastructure(std::uint32_t id, const Vec3& position);
  void step(double dt, SimTime now) override;
};

}  // namespace hvsim

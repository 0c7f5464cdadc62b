#pragma once

// Ground vehicles: IDM car following, MOBIL lane changes and route choice on
// the road graph. Lanes are parallel offsets to the right of the edge
// centerline; cars stay at z = 0.

#include "hvsim/environment.hpp"
#include "hvsim/vehicle.hpp"

#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace hvsim {

struct IdmParams {
  double desired_speed = 14.0;  // v0, m/s
  double time_headway = 1.5;    // T_h, s
  double min_gap = 2.0;         // s0, m
  double max_accel = 1.0;       // a, m/s^2
  double comfortable_decel = 2.0;  // b, m/s^2
  double exponent = 4.0;        // delta
  double emergency_decel = 9.0; // returned when the gap has closed

  void validate() const;
};

struct IdmResult {
  double acceleration = 0.0;
  bool emergency = false;
};

// a [1 - (v/v0)^delta - (s*/gap)^2], s* = s0 + v T_h + v dv / (2 sqrt(a b)).
// `dv` is the closing speed v - v_leader. An infinite gap gives the free-road
// law; gap <= 0 gives -emergency_decel with the flag set.
IdmResult idm_acceleration(double v, double gap, double dv, const IdmParams& params);

struct MobilParams {
  double politeness = 0.5;
  double threshold = 0.2;   // m/s^2
  double safe_decel = 4.0;  // m/s^2

  void validate() const;
};

struct LaneNeighbor {
  double gap = 0.0;  // bumper to bumper, m
  double speed = 0.0;
};

struct MobilSituation {
  double ego_speed = 0.0;
  double ego_length = 5.0;
  std::optional<LaneNeighbor> current_leader;
  std::optional<LaneNeighbor> current_follower;
  std::optional<LaneNeighbor> target_leader;
  std::optional<LaneNeighbor> target_follower;
};

struct MobilDecision {
  bool change = false;
  bool safe = false;
  double incentive = 0.0;
};

MobilDecision mobil_should_change(const MobilSituation& s, const IdmParams& idm,
                                  const MobilParams& mobil);

enum class RouteStrategy { Random, Shortest };

struct RouteDecision {
  enum class Kind { Next, UTurn, Arrived, DeadEnd };
  Kind kind = Kind::DeadEnd;
  std::uint32_t edge = 0;
};

// Random: uniform over successors. Shortest: first edge of the shortest path
// from the edge head to `destination` (Arrived when already there or when
// the destination is unreachable). Dead ends turn around when permitted.
RouteDecision route_next(const RoadGraph& graph, std::uint32_t edge, RouteStrategy strategy,
                         std::mt19937_64& rng, std::optional<std::uint32_t> destination = {},
                         bool allow_u_turn = true);

struct LanePosition {
  std::uint32_t edge = 0;
  std::uint32_t lane = 0;
  double offset = 0.0;  // along the edge, m
  double speed = 0.0;
};

struct CarParams {
  IdmParams idm;
  MobilParams mobil;
  double length = 5.0;
  double max_speed = 14.0;
  double lane_width = 3.5;
  double lane_change_interval = 1.0;  // s between MOBIL evaluations
  RouteStrategy strategy = RouteStrategy::Random;
  bool allow_u_turn = true;
  std::size_t plan_length = 3;  // edges kept planned ahead
};

// Center of `lane` at `offset` along `edge`.
Vec3 lane_point(const RoadGraph& graph, std::uint32_t edge, std::uint32_t lane, double offset,
                double lane_width = 3.5);

class Car final : public Vehicle {
public:
  Car(std::uint32_t id, const RoadGraph& graph, const LanePosition& start, CarParams params,
      std::uint64_t seed);

  const LanePosition& lane_position() const { return lane_; }
  const CarParams& params() const { return params_; }
  const std::deque<std::uint32_t>& plan() const { return plan_; }
  bool removed() const { return removed_; }

  // Switches to shortest-path routing towards `node`.
  void set_destination(std::uint32_t node);
  const std::optional<std::uint32_t>& destination() const { return destination_; }

  // Acceleration applied by the next step(); cleared afterwards. Without a
  // command the free-road IDM law is used.
  void command(double acceleration) { command_ = acceleration; }

  void change_lane(std::uint32_t lane);

  void step(double dt, SimTime now) override;
  PredictionInput prediction_input(double tau) const override;

  double speed_cap() const;

private:
  void extend_plan();
  void update_pose(double accel, SimTime now);

  const RoadGraph* graph_;
  CarParams params_;
  LanePosition lane_;
  std::deque<std::uint32_t> plan_;
  std::optional<std::uint32_t> destination_;
  std::optional<double> command_;
  std::mt19937_64 rng_;
  bool removed_ = false;
};

struct TrafficStats {
  double min_gap = std::numeric_limits<double>::infinity();
  std::uint64_t emergencies = 0;
  std::uint64_t lane_changes = 0;
  std::uint64_t removed = 0;
};

// Steps all cars against a common snapshot so updates are order independent.
class Traffic {
public:
  explicit Traffic(const RoadGraph& graph) : graph_(&graph) {}

  Car& add(std::unique_ptr<Car> car);
  const std::vector<std::unique_ptr<Car>>& cars() const { return cars_; }

  void step(double dt, SimTime now);
  const TrafficStats& stats() const { return stats_; }

  // Leader of `car` in its own lane, looking ahead along the plan. Valid
  // after the first step().
  std::optional<LaneNeighbor> leader_of(const Car& car) const;

private:
  struct Slot {
    double offset;
    double speed;
    std::size_t index;
  };
  void rebuild_lanes();
  const std::vector<Slot>* lane(std::uint32_t edge, std::uint32_t lane) const;
  std::optional<LaneNeighbor> leader_in(std::size_t self, std::uint32_t lane) const;
  std::optional<LaneNeighbor> follower_in(std::size_t self, std::uint32_t lane) const;

  const RoadGraph* graph_;
  std::vector<std::unique_ptr<Car>> cars_;
  std::vector<std::vector<std::vector<Slot>>> lanes_;  // [edge][lane]
  std::uint64_t ticks_ = 0;
  TrafficStats stats_;
};

}  // namespace hvsim

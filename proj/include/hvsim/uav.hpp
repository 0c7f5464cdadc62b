#pragma once

// Quadrotor agent: action selection picks a target, steerings emit weighted
// desired accelerations, locomotion integrates the rigid-body model.
//
// Attitude vectors are ordered (roll phi, pitch theta, yaw psi) so that they
// line up with the body torque axes.

#include "hvsim/energy.hpp"
#include "hvsim/vehicle.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hvsim {

using Mat3 = Eigen::Matrix3d;

struct SteeringOutput {
  Vec3 vector{0.0, 0.0, 0.0};  // desired acceleration, m/s^2
  double weight = 0.0;
};

// S = sum(w_i S_i) / sum(w_i). Throws std::domain_error when every weight
// is zero and std::invalid_argument on negative or non-finite input.
Vec3 aggregate_steerings(std::span<const SteeringOutput> outputs);

struct AttitudeState {
  Vec3 eta{0.0, 0.0, 0.0};      // roll, pitch, yaw (rad)
  Vec3 eta_dot{0.0, 0.0, 0.0};  // rad/s

  double roll() const { return eta[0]; }
  double pitch() const { return eta[1]; }
  double yaw() const { return eta[2]; }
};

double wrap_angle(double a);  // to (-pi, pi]

struct QuadrotorParams {
  double mass = 1.0;     // kg
  double gravity = 9.81; // m/s^2
  Mat3 inertia = Eigen::Vector3d(0.01, 0.01, 0.02).asDiagonal();  // body frame
  double max_speed = 20.0;
  double max_tilt = 0.6;          // rad, controller limit on roll and pitch
  double max_thrust_ratio = 2.5;  // T_max / (m g)
  double attitude_bandwidth = 15.0;  // rad/s, natural frequency of the attitude loop
  double attitude_damping = 0.9;
  double max_substep = 0.01;         // s

  void validate() const;
};

// Acceleration of the center of mass under thrust T along the body z axis.
Vec3 translational_dynamics(const AttitudeState& state, double thrust, const QuadrotorParams& params);

// Euler-rate to body-rate map W(eta) and the generalized inertia J = W^T I W.
Mat3 euler_rate_matrix(const Vec3& eta);
Mat3 generalized_inertia(const Vec3& eta, const Mat3& inertia);
// Coriolis matrix from the Christoffel symbols of J.
Mat3 coriolis_matrix(const Vec3& eta, const Vec3& eta_dot, const Mat3& inertia);

// eta_ddot = J^-1 (tau - C(eta, eta_dot) eta_dot). Throws std::domain_error
// near gimbal lock (|cos pitch| too small).
Vec3 angular_dynamics(const AttitudeState& state, const Vec3& torque, const QuadrotorParams& params);

// ---------------------------------------------------------------------------
// Awareness

struct AwarenessEntry {
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 velocity{0.0, 0.0, 0.0};
  SimTime timestamp;
};

struct NeighborState {
  std::uint32_t id = 0;
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 velocity{0.0, 0.0, 0.0};
};

enum class AwarenessMode { DistanceBased, MessageBased };

class AwarenessDb {
public:
  explicit AwarenessDb(double staleness_horizon = 1.0) : staleness_(staleness_horizon) {}

  double staleness_horizon() const { return staleness_; }
  void set_staleness_horizon(double s) { staleness_ = s; }

  // Keeps whichever entry is newer.
  void upsert(std::uint32_t id, const AwarenessEntry& entry);
  // Drops entries older than now - staleness_horizon.
  void evict(SimTime now);
  void clear() { entries_.clear(); }

  const std::map<std::uint32_t, AwarenessEntry>& entries() const { return entries_; }
  const AwarenessEntry* find(std::uint32_t id) const;
  std::size_t size() const { return entries_.size(); }

private:
  double staleness_;
  std::map<std::uint32_t, AwarenessEntry> entries_;
};

// Inserts every vehicle strictly within `radius` of `self_position`.
void awareness_update_distance(AwarenessDb& db, std::uint32_t self_id, const Vec3& self_position,
                               std::span<const NeighborState> vehicles, double radius, SimTime now);
// Inserts the state carried by a delivered CAM generated at `generated`.
void awareness_update_message(AwarenessDb& db, const NeighborState& sender, SimTime generated,
                              SimTime now);

// ---------------------------------------------------------------------------
// Steerings

struct WaypointSteeringParams {
  double max_speed = 20.0;
  double approach_gain = 0.2;  // 1/s, desired speed = gain * distance near arrival
  double response_time = 1.0;  // s
  double max_accel = 8.0;
};

// Velocity-tracking approach; returns zero at the target when at rest.
SteeringOutput steering_waypoint(const Vec3& position, const Vec3& velocity, const Vec3& target,
                                 const WaypointSteeringParams& params, double weight = 1.0);

SteeringOutput steering_altitude_hold(const Vec3& position, const Vec3& velocity, double altitude,
                                      double kp, double kd, double weight = 1.0);

// Repulsion summed over neighbors closer than `radius`, each of magnitude
// gain / distance. Weight is zero without neighbors.
SteeringOutput steering_separation(const Vec3& position, std::uint32_t self_id,
                                   const AwarenessDb& awareness, double radius, double gain,
                                   double weight = 1.0);
SteeringOutput steering_cohesion(const Vec3& position, std::uint32_t self_id,
                                 const AwarenessDb& awareness, double radius, double gain,
                                 double weight = 1.0);
SteeringOutput steering_alignment(const Vec3& velocity, const Vec3& position, std::uint32_t self_id,
                                  const AwarenessDb& awareness, double radius, double gain,
                                  double weight = 1.0);

class Uav;

class Steering {
public:
  explicit Steering(double weight) : weight_(weight) {}
  virtual ~Steering() = default;
  virtual std::string_view name() const = 0;
  virtual SteeringOutput evaluate(const Uav& uav) const = 0;
  double weight() const { return weight_; }

private:
  double weight_;
};

struct SteeringConfig {
  std::string name;
  double weight = 1.0;
  std::map<std::string, double> params;
};

using SteeringFactory = std::function<std::unique_ptr<Steering>(const SteeringConfig&)>;

// Built-in names: waypoint, altitude_hold, separation, cohesion, alignment.
// Throws std::invalid_argument for unknown names or parameters.
std::unique_ptr<Steering> make_steering(const SteeringConfig& config);
void register_steering(const std::string& name, SteeringFactory factory);
std::vector<std::string> steering_names();

// ---------------------------------------------------------------------------
// Agent

enum class UavRole { Mission, Relay, Hover, Return, Landing };

const char* to_string(UavRole role);

class Uav final : public Vehicle {
public:
  Uav(std::uint32_t id, const Vec3& start, QuadrotorParams params = {});

  const QuadrotorParams& params() const { return params_; }
  const AttitudeState& attitude() const { return attitude_; }
  double thrust() const { return thrust_; }

  void add_steering(std::unique_ptr<Steering> steering);
  const std::vector<std::unique_ptr<Steering>>& steerings() const { return steerings_; }

  AwarenessDb& awareness() { return awareness_; }
  const AwarenessDb& awareness() const { return awareness_; }
  AwarenessMode awareness_mode() const { return awareness_mode_; }
  void set_awareness_mode(AwarenessMode mode) { awareness_mode_ = mode; }

  UavRole role() const { return role_; }
  void set_role(UavRole role);
  void set_hold_point(const Vec3& p) { hold_point_ = p; }
  const Vec3& home() const { return home_; }
  void set_home(const Vec3& p) { home_ = p; }
  double cruise_altitude() const { return cruise_altitude_; }
  void set_cruise_altitude(double z) { cruise_altitude_ = z; }
  bool landed() const { return landed_; }

  // Supplies the next mission waypoint when the queue runs dry.
  using MissionSource = std::function<std::optional<Waypoint>(const Uav&)>;
  void set_mission_source(MissionSource source) { mission_source_ = std::move(source); }

  PowerModelParams& power_model() { return power_; }

  // Current target chosen by action selection; nullopt when none applies.
  std::optional<Vec3> active_target() const;
  // Aggregated steering from the most recent step.
  const Vec3& last_steering() const { return last_steering_; }

  void step(double dt, SimTime now) override;
  PredictionInput prediction_input(double tau) const override;

  // Attitude and thrust realizing a desired acceleration (exact inversion of
  // the translational model with tilt and thrust limits).
  struct Setpoint {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    double thrust = 0.0;
  };
  static Setpoint thrust_setpoint(const Vec3& desired_accel, double yaw, const QuadrotorParams& params);

private:
  void select_action();
  void integrate(double h, const Setpoint& sp);

  QuadrotorParams params_;
  AttitudeState attitude_;
  double thrust_;
  std::vector<std::unique_ptr<Steering>> steerings_;
  AwarenessDb awareness_;
  AwarenessMode awareness_mode_ = AwarenessMode::DistanceBased;
  UavRole role_ = UavRole::Mission;
  Vec3 hold_point_;
  Vec3 home_;
  double cruise_altitude_;
  bool landed_ = false;
  MissionSource mission_source_;
  PowerModelParams power_;
  Vec3 last_steering_{0.0, 0.0, 0.0};
};

}  // namespace hvsim

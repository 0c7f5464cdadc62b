#include "hvsim/uav.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace hvsim {

Vec3 aggregate_steerings(std::span<const SteeringOutput> outputs) {
  double total = 0.0;
  Vec3 sum = Vec3::Zero();
  for (const auto& o : outputs) {
    if (!(o.weight >= 0.0) || !std::isfinite(o.weight))
      throw std::invalid_argument("steering weight must be finite and non-negative");
    if (!o.vector.allFinite()) throw std::invalid_argument("steering vector must be finite");
    total += o.weight;
    sum += o.weight * o.vector;
  }
  if (total <= 0.0) throw std::domain_error("all steering weights are zero");
  return sum / total;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

void QuadrotorParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(gravity > 0.0)) throw std::invalid_argument("gravity must be positive");
  if (!inertia.isApprox(inertia.transpose()))
    throw std::invalid_argument("inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0))
    throw std::invalid_argument("inertia must be positive definite");
  if (!(max_speed > 0.0)) throw std::invalid_argument("max_speed must be positive");
  if (!(max_tilt > 0.0 && max_tilt < 1.4)) throw std::invalid_argument("max_tilt out of range");
  if (!(max_thrust_ratio > 1.0)) throw std::invalid_argument("max_thrust_ratio must exceed 1");
  if (!(attitude_bandwidth > 0.0 && attitude_damping > 0.0))
    throw std::invalid_argument("attitude gains must be positive");
  if (!(max_substep > 0.0)) throw std::invalid_argument("max_substep must be positive");
}

Vec3 translational_dynamics(const AttitudeState& s, double thrust, const QuadrotorParams& params) {
  const double cphi = std::cos(s.roll()), sphi = std::sin(s.roll());
  const double cth = std::cos(s.pitch()), sth = std::sin(s.pitch());
  const double cpsi = std::cos(s.yaw()), spsi = std::sin(s.yaw());
  const double k = thrust / params.mass;
  return Vec3(k * (cpsi * sth * cphi + spsi * sphi), k * (spsi * sth * cphi - cpsi * sphi),
              k * (cth * cphi) - params.gravity);
}

Mat3 euler_rate_matrix(const Vec3& eta) {
  const double cphi = std::cos(eta[0]), sphi = std::sin(eta[0]);
  const double cth = std::cos(eta[1]), sth = std::sin(eta[1]);
  Mat3 w;
  w << 1.0, 0.0, -sth,
       0.0, cphi, cth * sphi,
       0.0, -sphi, cth * cphi;
  return w;
}

Mat3 generalized_inertia(const Vec3& eta, const Mat3& inertia) {
  const Mat3 w = euler_rate_matrix(eta);
  return w.transpose() * inertia * w;
}

namespace {

// dJ/d eta_k for k = roll, pitch (yaw does not enter J).
std::array<Mat3, 3> inertia_derivatives(const Vec3& eta, const Mat3& inertia) {
  const double cphi = std::cos(eta[0]), sphi = std::sin(eta[0]);
  const double cth = std::cos(eta[1]), sth = std::sin(eta[1]);
  const Mat3 w = euler_rate_matrix(eta);
  Mat3 dw_phi;
  dw_phi << 0.0, 0.0, 0.0,
            0.0, -sphi, cth * cphi,
            0.0, -cphi, -cth * sphi;
  Mat3 dw_theta;
  dw_theta << 0.0, 0.0, -cth,
              0.0, 0.0, -sth * sphi,
              0.0, 0.0, -sth * cphi;
  auto dj = [&](const Mat3& dw) -> Mat3 {
    const Mat3 half = dw.transpose() * inertia * w;
    return half + half.transpose();
  };
  return {dj(dw_phi), dj(dw_theta), Mat3::Zero()};
}

}  // namespace

Mat3 coriolis_matrix(const Vec3& eta, const Vec3& eta_dot, const Mat3& inertia) {
  const auto d = inertia_derivatives(eta, inertia);
  Mat3 c = Mat3::Zero();
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i)
        c(k, j) += 0.5 * (d[i](k, j) + d[j](k, i) - d[k](i, j)) * eta_dot[i];
  return c;
}

Vec3 angular_dynamics(const AttitudeState& s, const Vec3& torque, const QuadrotorParams& params) {
  if (std::abs(std::cos(s.pitch())) < 1e-6)
    throw std::domain_error("generalized inertia is singular at pitch = +-pi/2");
  const Mat3 j = generalized_inertia(s.eta, params.inertia);
  const Mat3 c = coriolis_matrix(s.eta, s.eta_dot, params.inertia);
  return j.partialPivLu().solve(torque - c * s.eta_dot);
}

// ---------------------------------------------------------------------------

void AwarenessDb::upsert(std::uint32_t id, const AwarenessEntry& entry) {
  auto [it, inserted] = entries_.try_emplace(id, entry);
  if (!inserted && it->second.timestamp <= entry.timestamp) it->second = entry;
}

void AwarenessDb::evict(SimTime now) {
  const SimTime horizon = SimTime::from_seconds(staleness_);
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.timestamp > horizon)
      it = entries_.erase(it);
    else
      ++it;
  }
}

const AwarenessEntry* AwarenessDb::find(std::uint32_t id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

void awareness_update_distance(AwarenessDb& db, std::uint32_t self_id, const Vec3& self_position,
                               std::span<const NeighborState> vehicles, double radius, SimTime now) {
  for (const auto& v : vehicles) {
    if (v.id == self_id) continue;
    if ((v.position - self_position).norm() < radius)
      db.upsert(v.id, AwarenessEntry{v.position, v.velocity, now});
  }
  db.evict(now);
}

void awareness_update_message(AwarenessDb& db, const NeighborState& sender, SimTime generated,
                              SimTime now) {
  if (generated > now) throw std::invalid_argument("message generated in the future");
  db.upsert(sender.id, AwarenessEntry{sender.position, sender.velocity, generated});
  db.evict(now);
}

// ---------------------------------------------------------------------------

SteeringOutput steering_waypoint(const Vec3& position, const Vec3& velocity, const Vec3& target,
                                 const WaypointSteeringParams& params, double weight) {
  const Vec3 d = target - position;
  const double dist = d.norm();
  Vec3 v_des = Vec3::Zero();
  if (dist > 1e-9) v_des = d / dist * std::min(params.max_speed, params.approach_gain * dist);
  Vec3 a = (v_des - velocity) / params.response_time;
  const double mag = a.norm();
  if (mag > params.max_accel) a *= params.max_accel / mag;
  return {a, weight};
}

SteeringOutput steering_altitude_hold(const Vec3& position, const Vec3& velocity, double altitude,
                                      double kp, double kd, double weight) {
  return {Vec3(0.0, 0.0, kp * (altitude - position.z()) - kd * velocity.z()), weight};
}

SteeringOutput steering_separation(const Vec3& position, std::uint32_t self_id,
                                   const AwarenessDb& awareness, double radius, double gain,
                                   double weight) {
  Vec3 sum = Vec3::Zero();
  int n = 0;
  for (const auto& [id, e] : awareness.entries()) {
    if (id == self_id) continue;
    const Vec3 away = position - e.position;
    const double d = away.norm();
    if (d >= radius || d <= 1e-9) continue;
    sum += away / d * (gain / d);
    ++n;
  }
  return {sum, n > 0 ? weight : 0.0};
}

SteeringOutput steering_cohesion(const Vec3& position, std::uint32_t self_id,
                                 const AwarenessDb& awareness, double radius, double gain,
                                 double weight) {
  Vec3 centroid = Vec3::Zero();
  int n = 0;
  for (const auto& [id, e] : awareness.entries()) {
    if (id == self_id || (e.position - position).norm() >= radius) continue;
    centroid += e.position;
    ++n;
  }
  if (n == 0) return {Vec3::Zero(), 0.0};
  return {(centroid / n - position) * gain, weight};
}

SteeringOutput steering_alignment(const Vec3& velocity, const Vec3& position, std::uint32_t self_id,
                                  const AwarenessDb& awareness, double radius, double gain,
                                  double weight) {
  Vec3 mean = Vec3::Zero();
  int n = 0;
  for (const auto& [id, e] : awareness.entries()) {
    if (id == self_id || (e.position - position).norm() >= radius) continue;
    mean += e.velocity;
    ++n;
  }
  if (n == 0) return {Vec3::Zero(), 0.0};
  return {(mean / n - velocity) * gain, weight};
}

namespace {

using Params = std::map<std::string, double>;

double take(Params& p, const char* key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  const double v = it->second;
  p.erase(it);
  return v;
}

void reject_leftovers(const std::string& steering, const Params& p) {
  if (!p.empty())
    throw std::invalid_argument("unknown parameter '" + p.begin()->first + "' for steering '" +
                                steering + "'");
}

class WaypointSteering final : public Steering {
public:
  WaypointSteering(double w, WaypointSteeringParams p) : Steering(w), p_(p) {}
  std::string_view name() const override { return "waypoint"; }
  SteeringOutput evaluate(const Uav& uav) const override {
    const auto target = uav.active_target();
    if (!target) return {};
    return steering_waypoint(uav.position(), uav.velocity(), *target, p_, weight());
  }

private:
  WaypointSteeringParams p_;
};

class AltitudeHoldSteering final : public Steering {
public:
  AltitudeHoldSteering(double w, double altitude, double kp, double kd)
      : Steering(w), altitude_(altitude), kp_(kp), kd_(kd) {}
  std::string_view name() const override { return "altitude_hold"; }
  SteeringOutput evaluate(const Uav& uav) const override {
    if (uav.role() == UavRole::Landing) return {};
    const double z = altitude_ >= 0.0 ? altitude_ : uav.cruise_altitude();
    return steering_altitude_hold(uav.position(), uav.velocity(), z, kp_, kd_, weight());
  }

private:
  double altitude_, kp_, kd_;
};

enum class Flock { Separation, Cohesion, Alignment };

class FlockSteering final : public Steering {
public:
  FlockSteering(Flock kind, double w, double radius, double gain)
      : Steering(w), kind_(kind), radius_(radius), gain_(gain) {}
  std::string_view name() const override {
    switch (kind_) {
      case Flock::Separation:
        return "separation";
      case Flock::Cohesion:
        return "cohesion";
      case Flock::Alignment:
        return "alignment";
    }
    return "";
  }
  SteeringOutput evaluate(const Uav& uav) const override {
    switch (kind_) {
      case Flock::Separation:
        return steering_separation(uav.position(), uav.id(), uav.awareness(), radius_, gain_, weight());
      case Flock::Cohesion:
        return steering_cohesion(uav.position(), uav.id(), uav.awareness(), radius_, gain_, weight());
      case Flock::Alignment:
        return steering_alignment(uav.velocity(), uav.position(), uav.id(), uav.awareness(), radius_,
                                  gain_, weight());
    }
    return {};
  }

private:
  Flock kind_;
  double radius_, gain_;
};

SteeringFactory flock_factory(Flock kind, const char* name, double radius, double gain) {
  return [=](const SteeringConfig& c) -> std::unique_ptr<Steering> {
    Params p = c.params;
    const double r = take(p, "radius", radius);
    const double g = take(p, "gain", gain);
    reject_leftovers(name, p);
    return std::make_unique<FlockSteering>(kind, c.weight, r, g);
  };
}

std::mutex registry_mutex;

std::map<std::string, SteeringFactory>& registry() {
  static std::map<std::string, SteeringFactory> r = [] {
    std::map<std::string, SteeringFactory> m;
    m["waypoint"] = [](const SteeringConfig& c) -> std::unique_ptr<Steering> {
      Params p = c.params;
      WaypointSteeringParams w;
      w.max_speed = take(p, "max_speed", w.max_speed);
      w.approach_gain = take(p, "approach_gain", w.approach_gain);
      w.response_time = take(p, "response_time", w.response_time);
      w.max_accel = take(p, "max_accel", w.max_accel);
      reject_leftovers("waypoint", p);
      if (!(w.max_speed > 0 && w.approach_gain > 0 && w.response_time > 0 && w.max_accel > 0))
        throw std::invalid_argument("waypoint steering parameters must be positive");
      return std::make_unique<WaypointSteering>(c.weight, w);
    };
    m["altitude_hold"] = [](const SteeringConfig& c) -> std::unique_ptr<Steering> {
      Params p = c.params;
      const double alt = take(p, "altitude", -1.0);
      const double kp = take(p, "kp", 1.0);
      const double kd = take(p, "kd", 2.0);
      reject_leftovers("altitude_hold", p);
      return std::make_unique<AltitudeHoldSteering>(c.weight, alt, kp, kd);
    };
    m["separation"] = flock_factory(Flock::Separation, "separation", 10.0, 5.0);
    m["cohesion"] = flock_factory(Flock::Cohesion, "cohesion", 50.0, 0.1);
    m["alignment"] = flock_factory(Flock::Alignment, "alignment", 50.0, 0.5);
    return m;
  }();
  return r;
}

}  // namespace

std::unique_ptr<Steering> make_steering(const SteeringConfig& config) {
  if (!(config.weight >= 0.0) || !std::isfinite(config.weight))
    throw std::invalid_argument("steering weight must be finite and non-negative");
  SteeringFactory factory;
  {
    std::lock_guard lock(registry_mutex);
    auto it = registry().find(config.name);
    if (it == registry().end()) throw std::invalid_argument("unknown steering '" + config.name + "'");
    factory = it->second;
  }
  return factory(config);
}

void register_steering(const std::string& name, SteeringFactory factory) {
  std::lock_guard lock(registry_mutex);
  registry()[name] = std::move(factory);
}

std::vector<std::string> steering_names() {
  std::lock_guard lock(registry_mutex);
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(UavRole role) {
  switch (role) {
    case UavRole::Mission:
      return "mission";
    case UavRole::Relay:
      return "relay";
    case UavRole::Hover:
      return "hover";
    case UavRole::Return:
      return "return";
    case UavRole::Landing:
      return "landing";
  }
  return "unknown";
}

Uav::Uav(std::uint32_t id, const Vec3& start, QuadrotorParams params)
    : Vehicle(id, VehicleKind::Uav, params.max_speed),
      params_(params),
      thrust_(params.mass * params.gravity),
      hold_point_(start),
      home_(start),
      cruise_altitude_(start.z()) {
  params_.validate();
  place(start);
}

void Uav::add_steering(std::unique_ptr<Steering> steering) {
  if (!steering) throw std::invalid_argument("null steering");
  steerings_.push_back(std::move(steering));
}

void Uav::set_role(UavRole role) {
  if (role == UavRole::Hover || role == UavRole::Landing ||
      (role == UavRole::Relay && role_ != UavRole::Relay))
    hold_point_ = position();
  role_ = role;
}

std::optional<Vec3> Uav::active_target() const {
  switch (role_) {
    case UavRole::Mission:
      if (!waypoints().empty()) return waypoints().front().target;
      return hold_point_;
    case UavRole::Relay:
    case UavRole::Hover:
      return hold_point_;
    case UavRole::Return:
      return Vec3(home_.x(), home_.y(), cruise_altitude_);
    case UavRole::Landing:
      return Vec3(hold_point_.x(), hold_point_.y(), 0.0);
  }
  return std::nullopt;
}

void Uav::select_action() {
  if (battery() && battery()->depleted() && role_ != UavRole::Landing) set_role(UavRole::Landing);
  switch (role_) {
    case UavRole::Mission: {
      auto& q = waypoints();
      while (!q.empty() && (q.front().target - position()).norm() <= q.front().arrival_radius) {
        hold_point_ = q.front().target;
        q.pop_front();
      }
      if (q.empty() && mission_source_) {
        if (auto next = mission_source_(*this)) q.push_back(*next);
      }
      break;
    }
    case UavRole::Return:
      if ((position().head<2>() - home_.head<2>()).norm() <= 2.0) set_role(UavRole::Landing);
      break;
    default:
      break;
  }
}

Uav::Setpoint Uav::thrust_setpoint(const Vec3& desired_accel, double yaw, const QuadrotorParams& params) {
  Vec3 f = desired_accel + Vec3(0.0, 0.0, params.gravity);
  f.z() = std::max(f.z(), 0.2 * params.gravity);
  const double h = f.head<2>().norm();
  const double h_max = f.z() * std::tan(params.max_tilt);
  if (h > h_max) f.head<2>() *= h_max / h;
  double thrust = params.mass * f.norm();
  thrust = std::min(thrust, params.max_thrust_ratio * params.mass * params.gravity);
  const Vec3 b = f.normalized();
  const double cpsi = std::cos(yaw), spsi = std::sin(yaw);
  const double bx = cpsi * b.x() + spsi * b.y();
  const double by = -spsi * b.x() + cpsi * b.y();
  Setpoint sp;
  sp.roll = std::asin(std::clamp(-by, -1.0, 1.0));
  sp.pitch = std::atan2(bx, b.z());
  sp.yaw = yaw;
  sp.thrust = thrust;
  return sp;
}

void Uav::integrate(double h, const Setpoint& sp) {
  const double wn = params_.attitude_bandwidth;
  const double kp = wn * wn;
  const double kd = 2.0 * params_.attitude_damping * wn;
  const Vec3 target(sp.roll, sp.pitch, sp.yaw);
  Vec3 err = target - attitude_.eta;
  err[2] = wrap_angle(err[2]);
  const Vec3 eta_ddot_des = kp * err - kd * attitude_.eta_dot;
  // Feedback linearization: torque making the rigid body follow eta_ddot_des.
  const Mat3 j = generalized_inertia(attitude_.eta, params_.inertia);
  const Vec3 torque = j * eta_ddot_des + coriolis_matrix(attitude_.eta, attitude_.eta_dot, params_.inertia) * attitude_.eta_dot;
  const Vec3 eta_ddot = angular_dynamics(attitude_, torque, params_);
  attitude_.eta_dot += eta_ddot * h;
  attitude_.eta += attitude_.eta_dot * h;
  attitude_.eta[0] = wrap_angle(attitude_.eta[0]);
  attitude_.eta[1] = std::clamp(attitude_.eta[1], -1.4, 1.4);
  attitude_.eta[2] = wrap_angle(attitude_.eta[2]);
  thrust_ = sp.thrust;
}

void Uav::step(double dt, SimTime now) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (landed_) {
    commit(position(), Vec3::Zero(), Vec3::Zero(), now);
    return;
  }
  select_action();

  std::vector<SteeringOutput> outputs;
  outputs.reserve(steerings_.size());
  for (const auto& s : steerings_) outputs.push_back(s->evaluate(*this));
  Vec3 s;
  try {
    s = aggregate_steerings(outputs);
  } catch (const std::domain_error&) {
    s = -velocity();  // no active steering: brake to a hover
  }
  last_steering_ = s;
  const Setpoint sp = thrust_setpoint(s, 0.0, params_);

  const int n = std::max(1, static_cast<int>(std::ceil(dt / params_.max_substep - 1e-9)));
  const double h = dt / n;
  Vec3 p = position();
  Vec3 v = velocity();
  Vec3 a = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    integrate(h, sp);
    a = translational_dynamics(attitude_, thrust_, params_);
    v += a * h;
    const double speed = v.norm();
    if (speed > params_.max_speed) v *= params_.max_speed / speed;
    p += v * h;
    if (p.z() < 0.0) {
      p.z() = 0.0;
      v.z() = std::max(v.z(), 0.0);
    }
  }
  if (role_ == UavRole::Landing && p.z() <= 0.05 && v.norm() < 0.5) {
    landed_ = true;
    v.setZero();
    a.setZero();
  }
  commit(p, v, a, now);
  if (auto bat = battery(); bat && !landed_)
    bat->drain(mobility_power(velocity(), power_), dt, DrainSource::Mobility, now);
}

PredictionInput Uav::prediction_input(double tau) const {
  PredictionInput in = Vehicle::prediction_input(tau);
  // Expected displacement over one step under the current steering.
  in.steering = velocity() * tau + 0.5 * last_steering_ * tau * tau;
  in.waypoints.clear();
  if (role_ == UavRole::Mission && !waypoints().empty()) {
    in.waypoints.assign(waypoints().begin(), waypoints().end());
  } else if (auto t = active_target()) {
    in.waypoints.push_back(Waypoint{*t, 2.0});
  }
  return in;
}

}  // namespace hvsim

#include "hvsim/vehicle.hpp"

#include <spdlog/spdlog.h>

#include <stdexcept>

namespace hvsim {

const char* to_string(VehicleKind kind) {
  switch (kind) {
    case VehicleKind::Car:
      return "car";
    case VehicleKind::Uav:
      return "uav";
    case VehicleKind::Infrastructure:
      return "infrastructure";
  }
  return "unknown";
}

Vehicle::Vehicle(std::uint32_t id, VehicleKind kind, double max_speed)
    : id_(id), kind_(kind), max_speed_(max_speed) {
  if (max_speed < 0.0) throw std::invalid_argument("max_speed must be non-negative");
}

void Vehicle::place(const Vec3& position, SimTime now) {
  state_.position = bounds_ ? bounds_->clamp(position) : position;
  state_.velocity.setZero();
  state_.acceleration.setZero();
  state_.time = now;
  history_.clear();
}

void Vehicle::commit(const Vec3& position, const Vec3& velocity, const Vec3& acceleration,
                     SimTime now) {
  Vec3 v = velocity;
  const double speed = v.norm();
  if (speed > max_speed_) v *= max_speed_ / speed;
  Vec3 p = position;
  if (bounds_ && !bounds_->contains(p)) {
    if (bounds_violations_++ == 0)
      spdlog::warn("{} {} left the world bounds; clamping", to_string(kind_), id_);
    p = bounds_->clamp(p);
  }
  if ((p - state_.position).squaredNorm() > 1e-18) {
    history_.push_back(state_.position);
    if (history_.size() > kHistoryCapacity) history_.pop_front();
  }
  state_.position = p;
  state_.velocity = v;
  state_.acceleration = acceleration;
  state_.time = now;
}

PredictionInput Vehicle::prediction_input(double tau) const {
  PredictionInput in;
  in.position = state_.position;
  in.waypoints.assign(waypoints_.begin(), waypoints_.end());
  in.history.assign(history_.begin(), history_.end());
  in.speed = state_.velocity.norm();
  in.tau = tau;
  return in;
}

Infrastructure::Infrastructure(std::uint32_t id, const Vec3& position)
    : Vehicle(id, VehicleKind::Infrastructure, 0.0) {
  place(position);
}

void Infrastructure::step(double, SimTime now) { commit(position(), Vec3::Zero(), Vec3::Zero(), now); }

}  // namespace hvsim

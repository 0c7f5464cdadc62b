#include "hvsim/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace hvsim {

void PowerModelParams::validate() const {
  if (!(hover_power > 0.0)) throw std::invalid_argument("hover_power must be positive");
  if (!(climb_coefficient > 0.0)) throw std::invalid_argument("climb_coefficient must be positive");
  if (!(descent_coefficient < climb_coefficient))
    throw std::invalid_argument("descent_coefficient must be below climb_coefficient");
  if (horizontal_coefficient < 0.0)
    throw std::invalid_argument("horizontal_coefficient must be non-negative");
  if (min_power < 0.0 || min_power >= hover_power)
    throw std::invalid_argument("min_power must lie in [0, hover_power)");
}

double mobility_power(const Vec3& velocity, const PowerModelParams& params) {
  const double vz = velocity.z();
  const double p = params.hover_power + params.climb_coefficient * std::max(vz, 0.0) +
                   params.descent_coefficient * std::max(-vz, 0.0) +
                   params.horizontal_coefficient * velocity.head<2>().norm();
  return std::max(p, params.min_power);
}

void RadioPowerParams::validate() const {
  if (idle_power < 0.0 || rx_power < 0.0 || tx_base_power < 0.0)
    throw std::invalid_argument("radio powers must be non-negative");
  if (!(pa_efficiency > 0.0 && pa_efficiency <= 1.0))
    throw std::invalid_argument("pa_efficiency must lie in (0, 1]");
}

double radio_power(RadioState state, double tx_power_dbm, const RadioPowerParams& params) {
  switch (state) {
    case RadioState::Idle:
      return params.idle_power;
    case RadioState::Rx:
      return params.rx_power;
    case RadioState::Tx:
      return params.tx_base_power + std::pow(10.0, (tx_power_dbm - 30.0) / 10.0) / params.pa_efficiency;
  }
  return 0.0;
}

double communication_energy(RadioState state, double tx_power_dbm, double duration,
                            const RadioPowerParams& params) {
  if (duration < 0.0) throw std::invalid_argument("duration must be non-negative");
  return radio_power(state, tx_power_dbm, params) * duration;
}

Battery::Battery(double capacity_joules, bool keep_log)
    : capacity_(capacity_joules), remaining_(capacity_joules), keep_log_(keep_log) {
  if (!(capacity_joules > 0.0)) throw std::invalid_argument("battery capacity must be positive");
}

double Battery::drain(double watts, double dt, DrainSource source, SimTime now) {
  if (!(watts >= 0.0)) throw std::invalid_argument("drain power must be non-negative");
  if (!(dt > 0.0)) throw std::invalid_argument("drain interval must be positive");
  const double requested = watts * dt;
  const double taken = std::min(requested, remaining_);
  remaining_ -= taken;
  totals_[static_cast<int>(source)] += taken;
  if (keep_log_) log_.push_back(DrainRecord{now, source, watts, dt, taken});
  if (remaining_ <= 0.0 && !notified_) {
    remaining_ = 0.0;
    notified_ = true;
    if (on_depleted_) on_depleted_();
  }
  return taken;
}

}  // namespace hvsim

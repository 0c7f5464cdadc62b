#pragma once

// UAV power model and a logical battery shared by mobility and radio draw.

#include "hvsim/des.hpp"
#include "hvsim/geometry.hpp"

#include <functional>
#include <vector>

namespace hvsim {

struct PowerModelParams {
  double hover_power = 150.0;         // W
  double climb_coefficient = 40.0;    // W per m/s of ascent
  double descent_coefficient = -25.0; // W per m/s of descent, signed
  double horizontal_coefficient = 10.0;
  double min_power = 0.0;             // floor keeping the draw non-negative

  void validate() const;
};

// hover + climb * max(vz, 0) + descent * max(-vz, 0) + horizontal * |v_xy|,
// floored at min_power.
double mobility_power(const Vec3& velocity, const PowerModelParams& params);

enum class RadioState { Idle, Rx, Tx };

struct RadioPowerParams {
  double idle_power = 0.5;  // W
  double rx_power = 1.0;
  double tx_base_power = 1.0;
  double pa_efficiency = 0.4;  // tx = base + P_out / efficiency

  void validate() const;
};

double radio_power(RadioState state, double tx_power_dbm, const RadioPowerParams& params);

// Joules spent in `state` for `duration` seconds.
double communication_energy(RadioState state, double tx_power_dbm, double duration,
                            const RadioPowerParams& params);

enum class DrainSource { Mobility, Communication };

struct DrainRecord {
  SimTime time;
  DrainSource source = DrainSource::Mobility;
  double watts = 0.0;
  double duration = 0.0;
  double joules = 0.0;  // actually removed, after flooring at zero
};

class Battery {
public:
  explicit Battery(double capacity_joules, bool keep_log = true);

  double capacity() const { return capacity_; }
  double remaining() const { return remaining_; }
  bool depleted() const { return remaining_ <= 0.0; }
  const std::vector<DrainRecord>& log() const { return log_; }
  double drained(DrainSource source) const { return totals_[static_cast<int>(source)]; }

  // Called exactly once, when the charge first reaches zero.
  void on_depleted(std::function<void()> callback) { on_depleted_ = std::move(callback); }

  // Removes watts * dt; returns the energy actually removed.
  // Throws std::invalid_argument for negative watts or non-positive dt.
  double drain(double watts, double dt, DrainSource source, SimTime now = {});

private:
  double capacity_;
  double remaining_;
  bool keep_log_;
  bool notified_ = false;
  double totals_[2] = {0.0, 0.0};
  std::vector<DrainRecord> log_;
  std::function<void()> on_depleted_;
};

}  // namespace hvsim

#include "hvsim/energy.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace hvsim;

TEST_CASE("mobility power states") {
  PowerModelParams p;
  CHECK(mobility_power(Vec3::Zero(), p) == 150.0);
  const double up = mobility_power(Vec3(0, 0, 2), p);
  const double down = mobility_power(Vec3(0, 0, -2), p);
  CHECK(up == doctest::Approx(150 + 40 * 2));
  CHECK(down == doctest::Approx(150 - 25 * 2));
  CHECK(up > 150.0);
  CHECK(down < 150.0);
  CHECK(down >= 0.0);
  CHECK(mobility_power(Vec3(3, 4, 0), p) == doctest::Approx(150 + 10 * 5));
}

TEST_CASE("state ordering and non-negativity") {
  PowerModelParams p;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> vz(0.01, 20), vh(-20, 20);
  for (int i = 0; i < 1000; ++i) {
    const double s = vz(rng);
    const Vec3 h(vh(rng), vh(rng), 0);
    const double ascend = mobility_power(Vec3(h.x(), h.y(), s), p);
    const double hover = mobility_power(h, p);
    const double descend = mobility_power(Vec3(h.x(), h.y(), -s), p);
    CHECK(ascend > hover);
    CHECK(hover >= descend);
    CHECK(descend >= 0.0);
  }
  // Below the floor the ordering degenerates to equality, never inversion.
  CHECK(mobility_power(Vec3(0, 0, -20), p) == 0.0);
}

TEST_CASE("power model validation") {
  PowerModelParams p;
  p.hover_power = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.descent_coefficient = 50;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_NOTHROW(PowerModelParams{}.validate());
}

TEST_CASE("battery drain") {
  Battery b(5000.0);
  CHECK(b.drain(100.0, 10.0, DrainSource::Mobility) == doctest::Approx(1000.0));
  CHECK(b.remaining() == doctest::Approx(4000.0));

  int events = 0;
  b.on_depleted([&] { ++events; });
  b.drain(1000.0, 10.0, DrainSource::Mobility);
  CHECK(b.remaining() == 0.0);
  CHECK(b.depleted());
  b.drain(10.0, 1.0, DrainSource::Communication);
  CHECK(events == 1);
  CHECK(b.remaining() == 0.0);

  CHECK_THROWS_AS(b.drain(-1.0, 1.0, DrainSource::Mobility), std::invalid_argument);
  CHECK_THROWS_AS(b.drain(1.0, 0.0, DrainSource::Mobility), std::invalid_argument);
  CHECK_THROWS_AS(Battery(0.0), std::invalid_argument);
}

TEST_CASE("interleaved drains match the ledger") {
  Battery b(1e7);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> w(0, 300), dt(0.001, 0.1);
  double expected = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto src = i % 3 == 0 ? DrainSource::Communication : DrainSource::Mobility;
    const double watts = w(rng), d = dt(rng);
    expected += watts * d;
    b.drain(watts, d, src, SimTime::from_seconds(i * 0.1));
  }
  double log_sum = 0.0;
  for (const auto& r : b.log()) log_sum += r.watts * r.duration;
  const double used = b.capacity() - b.remaining();
  CHECK(std::abs(used - log_sum) / log_sum < 1e-6);
  CHECK(std::abs(used - expected) / expected < 1e-6);
  CHECK(std::abs(b.drained(DrainSource::Mobility) + b.drained(DrainSource::Communication) - used) /
            used < 1e-9);
}

TEST_CASE("radio power") {
  RadioPowerParams p;
  CHECK(communication_energy(RadioState::Idle, 23, 7.0, p) == doctest::Approx(3.5));
  CHECK(radio_power(RadioState::Tx, 23, p) == doctest::Approx(1.5).epsilon(1e-3));
  CHECK(radio_power(RadioState::Tx, 23, p) > radio_power(RadioState::Tx, 0, p));
  CHECK(radio_power(RadioState::Rx, 23, p) == 1.0);

  SUBCASE("CAM pattern over one minute") {
    // 190 byte CAMs every 100 ms; each burst occupies one 1 ms slot.
    const double burst = 0.001;
    const int bursts = 600;
    double total = 0.0;
    for (int i = 0; i < bursts; ++i) total += communication_energy(RadioState::Tx, 23, burst, p);
    total += communication_energy(RadioState::Idle, 23, 60.0 - bursts * burst, p);
    const double expected = bursts * burst * radio_power(RadioState::Tx, 23, p) +
                            (60.0 - bursts * burst) * p.idle_power;
    CHECK(total == doctest::Approx(expected).epsilon(1e-12));
  }
}

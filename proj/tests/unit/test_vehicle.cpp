#include "hvsim/uav.hpp"
#include "hvsim/vehicle.hpp"

#include "doctest.h"

using namespace hvsim;

namespace {

// Constant-velocity test vehicle.
class Drifter final : public Vehicle {
public:
  Drifter(std::uint32_t id, Vec3 v, double max_speed)
      : Vehicle(id, VehicleKind::Uav, max_speed), v_(v) {}
  void step(double dt, SimTime now) override {
    commit(position() + v_ * dt, v_, Vec3::Zero(), now);
  }

private:
  Vec3 v_;
};

}  // namespace

TEST_CASE("snapshots are stable within an event") {
  Drifter d(1, Vec3(1, 2, 0), 20);
  d.step(0.1, SimTime::from_ms(100));
  const auto a = d.snapshot();
  const auto b = d.snapshot();
  CHECK(a.position == b.position);
  CHECK(a.velocity == b.velocity);
  CHECK(a.time == b.time);
}

TEST_CASE("constant velocity advances by v dt") {
  Drifter d(1, Vec3(3, -1, 0.5), 20);
  d.place(Vec3(10, 10, 10));
  d.step(0.25, SimTime::from_ms(250));
  CHECK(d.position().isApprox(Vec3(10.75, 9.75, 10.125)));
  CHECK(d.history().size() == 1);
}

TEST_CASE("speed cap and bounds are enforced after each step") {
  Drifter fast(2, Vec3(30, 0, 0), 20);
  fast.step(0.1, SimTime::from_ms(100));
  CHECK(fast.velocity().norm() == doctest::Approx(20.0));

  Drifter out(3, Vec3(10, 0, 0), 20);
  out.set_bounds(Box3{Vec3(0, 0, 0), Vec3(5, 5, 5)});
  out.place(Vec3(4, 1, 1));
  out.step(1.0, SimTime::from_seconds(1));
  CHECK(out.position() == Vec3(5, 1, 1));
  CHECK(out.bounds_violations() == 1);
}

TEST_CASE("infrastructure never moves") {
  Infrastructure enb(7, Vec3(1, 2, 25));
  CHECK(enb.kind() == VehicleKind::Infrastructure);
  enb.step(1.0, SimTime::from_seconds(1));
  CHECK(enb.position() == Vec3(1, 2, 25));
  CHECK(enb.velocity().norm() == 0.0);
  CHECK(enb.prediction_input(1.0).speed == 0.0);
}

TEST_CASE("every kind exposes the same interface") {
  std::vector<std::unique_ptr<Vehicle>> fleet;
  fleet.push_back(std::make_unique<Infrastructure>(1, Vec3(0, 0, 25)));
  fleet.push_back(std::make_unique<Uav>(2, Vec3(0, 0, 40)));
  SimTime t;
  for (auto& v : fleet) {
    v->step(0.01, t += SimTime::from_ms(10));
    const auto in = v->prediction_input(0.5);
    CHECK(in.tau == 0.5);
    CHECK(v->snapshot().time == t);
    CHECK(std::string(to_string(v->kind())).size() > 0);
  }
}

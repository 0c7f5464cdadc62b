#include "hvsim/des.hpp"

#include "doctest.h"

#include <algorithm>
#include <random>
#include <vector>

using hvsim::EventCategory;
using hvsim::SimTime;
using hvsim::Simulator;

TEST_CASE("zero delay fires at the current time after the running event") {
  Simulator sim;
  std::vector<std::pair<int, double>> trace;
  sim.schedule(5.0, [&] {
    sim.schedule(0.0, [&] { trace.emplace_back(2, sim.now().seconds()); });
    trace.emplace_back(1, sim.now().seconds());
  });
  sim.run_until(SimTime::from_seconds(10));
  REQUIRE(trace.size() == 2);
  CHECK(trace[0] == std::pair{1, 5.0});
  CHECK(trace[1] == std::pair{2, 5.0});
}

TEST_CASE("equal fire times keep scheduling order") {
  Simulator sim;
  std::string order;
  sim.schedule(1.0, [&] { order += 'A'; });
  sim.schedule(1.0, [&] { order += 'B'; });
  sim.schedule(1.0, [&] { order += 'C'; });
  sim.run_until(SimTime::from_seconds(2));
  CHECK(order == "ABC");
}

TEST_CASE("random delays are processed in sorted order") {
  Simulator sim;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> delay(0.0, 100.0);
  std::vector<std::int64_t> scheduled;
  std::vector<std::int64_t> fired;
  for (int i = 0; i < 10000; ++i) {
    const double d = delay(rng);
    scheduled.push_back(SimTime::from_seconds(d).ns());
    sim.schedule(d, [&] { fired.push_back(sim.now().ns()); });
  }
  const auto stats = sim.run_until(SimTime::from_seconds(100));
  std::sort(scheduled.begin(), scheduled.end());
  CHECK(stats.events_processed == 10000);
  CHECK(fired == scheduled);
}

TEST_CASE("negative delay is rejected") {
  Simulator sim;
  CHECK_THROWS_AS(sim.schedule(-0.001, [] {}), std::invalid_argument);
  sim.finalize();
  CHECK_THROWS_AS(sim.schedule(1.0, [] {}), std::logic_error);
}

TEST_CASE("cancel semantics") {
  Simulator sim;
  bool fired = false;
  auto h = sim.schedule(1.0, [&] { fired = true; });
  CHECK(sim.cancel(h));
  CHECK_FALSE(sim.cancel(h));
  sim.run_until(SimTime::from_seconds(2));
  CHECK_FALSE(fired);
  CHECK_FALSE(sim.cancel(hvsim::EventHandle{}));

  SUBCASE("cancel from another event excludes it from the count") {
    Simulator s2;
    int count = 0;
    auto late = s2.schedule(2.0, [&] { ++count; });
    s2.schedule(1.0, [&] { ++count; });
    s2.schedule(1.0, [&] { CHECK(s2.cancel(late)); });
    s2.schedule(3.0, [&] { ++count; });
    const auto stats = s2.run_until(SimTime::from_seconds(5));
    CHECK(count == 2);
    CHECK(stats.events_processed == 3);
  }

  SUBCASE("a fired event cannot be cancelled") {
    Simulator s3;
    auto h3 = s3.schedule(1.0, [] {});
    s3.run_until(SimTime::from_seconds(1));
    CHECK_FALSE(s3.cancel(h3));
  }
}

TEST_CASE("run_until on an empty queue advances the clock") {
  Simulator sim;
  const auto stats = sim.run_until(SimTime::from_seconds(10));
  CHECK(stats.events_processed == 0);
  CHECK(sim.now() == SimTime::from_seconds(10));
  CHECK_THROWS_AS(sim.run_until(SimTime::from_seconds(5)), std::invalid_argument);
}

TEST_CASE("thirty minute horizon event") {
  Simulator sim;
  bool fired = false;
  sim.schedule(30 * 60.0, [&] { fired = true; });
  sim.run_until(SimTime::from_seconds(30 * 60.0 - 1e-9 * 1));
  CHECK_FALSE(fired);
  sim.run_until(SimTime::from_seconds(30 * 60.0));
  CHECK(fired);
}

TEST_CASE("interleaved periodic events") {
  Simulator sim;
  int fast = 0, slow = 0;
  sim.schedule_periodic(SimTime::from_ms(10), SimTime::from_ms(10), [&] { ++fast; },
                        EventCategory::Mobility);
  sim.schedule_periodic(SimTime::from_ms(100), SimTime::from_ms(100), [&] { ++slow; },
                        EventCategory::Network);
  const auto stats = sim.run_until(SimTime::from_seconds(1.0));
  CHECK(fast == 100);
  CHECK(slow == 10);
  CHECK(stats.events_processed == 110);
}

TEST_CASE("periodic handler may cancel itself") {
  Simulator sim;
  int n = 0;
  hvsim::EventHandle h;
  h = sim.schedule_periodic(SimTime::from_ms(1), SimTime::from_ms(1), [&] {
    if (++n == 5) sim.cancel(h);
  });
  sim.run_until(SimTime::from_seconds(1));
  CHECK(n == 5);
  CHECK(sim.pending() == 0);
}

TEST_CASE("clock is monotone and identical runs give identical traces") {
  auto run = [](std::uint64_t seed) {
    Simulator sim;
    std::mt19937_64 rng(seed);
    std::vector<std::int64_t> trace;
    std::function<void()> spawn = [&] {
      trace.push_back(sim.now().ns());
      if (trace.size() < 5000) {
        std::uniform_int_distribution<int> k(0, 2);
        for (int i = 0, n = k(rng); i < n; ++i)
          sim.schedule(std::uniform_real_distribution<double>(0, 0.5)(rng), spawn);
      }
    };
    for (int i = 0; i < 10; ++i) sim.schedule(0.1 * i, spawn);
    sim.run_until(SimTime::from_seconds(1000));
    return trace;
  };
  const auto a = run(7);
  const auto b = run(7);
  CHECK(a == b);
  CHECK(std::is_sorted(a.begin(), a.end()));
}

TEST_CASE("profiling attributes events to categories") {
  Simulator sim;
  sim.enable_profiling(true);
  sim.schedule(0.1, [] {}, EventCategory::Mobility);
  sim.schedule(0.2, [] {}, EventCategory::Network);
  sim.schedule(0.3, [] {}, EventCategory::Network);
  sim.run_until(SimTime::from_seconds(1));
  CHECK(sim.profile().events[0] == 1);
  CHECK(sim.profile().events[1] == 2);
}

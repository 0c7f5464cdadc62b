#pragma once

// Single-process discrete-event engine. All mobility, channel and network
// activity is ordered on one integer-nanosecond clock.

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace hvsim {

class SimTime {
public:
  constexpr SimTime() = default;

  static constexpr SimTime from_ns(std::int64_t ns) { return SimTime(ns); }
  static SimTime from_seconds(double s);
  static constexpr SimTime from_ms(std::int64_t ms) { return SimTime(ms * 1'000'000); }

  constexpr std::int64_t ns() const { return ns_; }
  constexpr double seconds() const { return static_cast<double>(ns_) * 1e-9; }

  constexpr auto operator<=>(const SimTime&) const = default;
  constexpr SimTime operator+(SimTime o) const { return SimTime(ns_ + o.ns_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(ns_ - o.ns_); }
  constexpr SimTime& operator+=(SimTime o) {
    ns_ += o.ns_;
    return *this;
  }

private:
  constexpr explicit SimTime(std::int64_t ns) : ns_(ns) {}
  std::int64_t ns_ = 0;
};

// Used to attribute wall-clock cost to subsystems (scalability study).
enum class EventCategory : std::uint8_t { Mobility = 0, Network = 1, Other = 2 };
inline constexpr std::size_t kEventCategoryCount = 3;

struct EventHandle {
  std::uint64_t id = 0;
  bool valid() const { return id != 0; }
};

struct RunStats {
  std::uint64_t events_processed = 0;
  SimTime final_time;
};

struct CategoryProfile {
  std::uint64_t events[kEventCategoryCount] = {};
  double wall_seconds[kEventCategoryCount] = {};
};

class Simulator {
public:
  using Handler = std::function<void()>;

  Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimTime now() const { return now_; }

  // Throws std::invalid_argument for a negative delay and std::logic_error
  // once the simulator has been finalized.
  EventHandle schedule(double delay_seconds, Handler handler,
                       EventCategory category = EventCategory::Other);
  EventHandle schedule_in(SimTime delay, Handler handler,
                          EventCategory category = EventCategory::Other);
  EventHandle schedule_at(SimTime when, Handler handler,
                          EventCategory category = EventCategory::Other);

  // Fires first after `first_delay`, then every `period`, until cancelled.
  EventHandle schedule_periodic(SimTime first_delay, SimTime period, Handler handler,
                                EventCategory category = EventCategory::Other);

  // True when a pending event was removed; false if it already fired or was
  // cancelled before.
  bool cancel(EventHandle handle);

  RunStats run_until(SimTime end);

  // Stops the current run_until after the event being processed.
  void stop() { stop_requested_ = true; }
  void finalize() { finalized_ = true; }
  bool finalized() const { return finalized_; }

  std::size_t pending() const { return handlers_.size(); }
  std::uint64_t total_processed() const { return total_processed_; }

  void enable_profiling(bool on) { profiling_ = on; }
  const CategoryProfile& profile() const { return profile_; }

private:
  struct Entry {
    SimTime when;
    std::uint64_t seq;
    std::uint64_t id;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.when != b.when) return a.when > b.when;
      return a.seq > b.seq;
    }
  };
  struct Slot {
    Handler handler;                    // one-shot events
    std::shared_ptr<Handler> recurring;  // periodic events
    EventCategory category;
    SimTime period;
  };

  EventHandle push(SimTime when, Slot slot);

  SimTime now_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t total_processed_ = 0;
  bool finalized_ = false;
  bool stop_requested_ = false;
  bool profiling_ = false;
  CategoryProfile profile_;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::unordered_map<std::uint64_t, Slot> handlers_;
};

}  // namespace hvsim

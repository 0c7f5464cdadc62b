#include "hvsim/des.hpp"

#include <cmath>

namespace hvsim {

SimTime SimTime::from_seconds(double s) {
  if (!std::isfinite(s)) throw std::invalid_argument("SimTime: non-finite seconds");
  return SimTime(static_cast<std::int64_t>(std::llround(s * 1e9)));
}

EventHandle Simulator::schedule(double delay_seconds, Handler handler, EventCategory category) {
  if (!(delay_seconds >= 0.0)) throw std::invalid_argument("schedule: negative delay");
  return schedule_in(SimTime::from_seconds(delay_seconds), std::move(handler), category);
}

EventHandle Simulator::schedule_in(SimTime delay, Handler handler, EventCategory category) {
  if (delay < SimTime{}) throw std::invalid_argument("schedule: negative delay");
  return push(now_ + delay, Slot{std::move(handler), nullptr, category, SimTime{}});
}

EventHandle Simulator::schedule_at(SimTime when, Handler handler, EventCategory category) {
  if (when < now_) throw std::invalid_argument("schedule_at: time in the past");
  return push(when, Slot{std::move(handler), nullptr, category, SimTime{}});
}

EventHandle Simulator::schedule_periodic(SimTime first_delay, SimTime period, Handler handler,
                                         EventCategory category) {
  if (first_delay < SimTime{}) throw std::invalid_argument("schedule_periodic: negative delay");
  if (period <= SimTime{}) throw std::invalid_argument("schedule_periodic: period must be > 0");
  return push(now_ + first_delay,
              Slot{{}, std::make_shared<Handler>(std::move(handler)), category, period});
}

EventHandle Simulator::push(SimTime when, Slot slot) {
  if (finalized_) throw std::logic_error("schedule: simulator finalized");
  const std::uint64_t seq = next_seq_++;
  handlers_.emplace(seq, std::move(slot));
  heap_.push(Entry{when, seq, seq});
  return EventHandle{seq};
}

bool Simulator::cancel(EventHandle handle) {
  if (!handle.valid()) return false;
  return handlers_.erase(handle.id) > 0;
}

RunStats Simulator::run_until(SimTime end) {
  if (end < now_) throw std::invalid_argument("run_until: end before current time");
  stop_requested_ = false;
  RunStats stats;
  while (!heap_.empty() && !stop_requested_) {
    const Entry top = heap_.top();
    if (top.when > end) break;
    heap_.pop();
    auto it = handlers_.find(top.id);
    if (it == handlers_.end()) continue;  // cancelled

    now_ = top.when;
    const EventCategory category = it->second.category;
    const SimTime period = it->second.period;
    // Periodic handlers stay registered under the same id so the handle can
    // cancel future firings; one-shot handlers are moved out first so they
    // may schedule or cancel freely.
    Handler local;
    std::shared_ptr<Handler> recurring;
    if (period > SimTime{}) {
      recurring = it->second.recurring;
      heap_.push(Entry{now_ + period, next_seq_++, top.id});
    } else {
      local = std::move(it->second.handler);
      handlers_.erase(it);
    }

    const auto idx = static_cast<std::size_t>(category);
    std::chrono::steady_clock::time_point t0;
    if (profiling_) t0 = std::chrono::steady_clock::now();
    if (recurring) {
      (*recurring)();  // kept alive even if the handler cancels itself
    } else {
      local();
    }
    if (profiling_) {
      profile_.wall_seconds[idx] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      profile_.events[idx]++;
    }
    ++stats.events_processed;
    ++total_processed_;
  }
  if (!stop_requested_) now_ = end;
  stats.final_time = now_;
  return stats;
}

}  // namespace hvsim

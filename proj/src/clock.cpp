#include "lakewatch/clock.hpp"

namespace lakewatch {

TimePoint SystemClock::now() const {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

bool SystemClock::wait_until(TimePoint deadline, std::stop_token stop) {
  std::unique_lock lock(mutex_);
  cv_.wait_until(lock, stop, deadline, [] { return false; });
  return !stop.stop_requested();
}

TimePoint VirtualClock::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

bool VirtualClock::wait_until(TimePoint deadline, std::stop_token stop) {
  std::unique_lock lock(mutex_);
  ++waiters_;
  cv_.notify_all();
  cv_.wait(lock, stop, [&] { return now_ >= deadline; });
  --waiters_;
  return !stop.stop_requested();
}

void VirtualClock::advance(std::chrono::seconds by) {
  std::lock_guard lock(mutex_);
  now_ += by;
  cv_.notify_all();
}

void VirtualClock::set(TimePoint t) {
  std::lock_guard lock(mutex_);
  now_ = t;
  cv_.notify_all();
}

int VirtualClock::waiters() const {
  std::lock_guard lock(mutex_);
  return waiters_;
}

}  // namespace lakewatch

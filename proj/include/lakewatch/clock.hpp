#pragma once

#include <condition_variable>
#include <mutex>
#include <stop_token>

#include "lakewatch/timeutil.hpp"

namespace lakewatch {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
  /// Blocks until `deadline` or a stop request. Returns false if stopped.
  virtual bool wait_until(TimePoint deadline, std::stop_token stop) = 0;
};

class SystemClock final : public Clock {
 public:
  TimePoint now() const override;
  bool wait_until(TimePoint deadline, std::stop_token stop) override;

 private:
  std::mutex mutex_;
  std::condition_variable_any cv_;
};

/// Manually advanced clock for deterministic scheduling tests.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(TimePoint start) : now_(start) {}
  TimePoint now() const override;
  bool wait_until(TimePoint deadline, std::stop_token stop) override;

  void advance(std::chrono::seconds by);
  void set(TimePoint t);
  /// Number of threads currently blocked in wait_until.
  int waiters() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  TimePoint now_;
  int waiters_ = 0;
};

}  // namespace lakewatch

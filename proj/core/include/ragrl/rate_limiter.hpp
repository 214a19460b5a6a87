// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>

namespace ragrl {

class Clock {
 public:
  using duration = std::chrono::nanoseconds;
  using time_point = std::chrono::time_point<std::chrono::steady_clock, duration>;

  virtual ~Clock() = default;
  virtual time_point now() const = 0;
  virtual void sleep_until(time_point t) = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() const override;
  void sleep_until(time_point t) override;
};

/// Test clock: time moves only when a caller sleeps or advance() is called.
class ManualClock final : public Clock {
 public:
  time_point now() const override;
  void sleep_until(time_point t) override;
  void advance(duration d);

 private:
  mutable std::mutex mu_;
  time_point now_{};
};

/// Sliding-window limiter: at most `max_calls` admissions in any half-open
/// window of length `window`.
class RateLimiter {
 public:
  RateLimiter(std::size_t max_calls, Clock::duration window,
              std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

  /// Blocks until a slot is free; returns the admission time.
  Clock::time_point acquire();
  bool try_acquire();

  std::size_t max_calls() const noexcept { return max_calls_; }
  Clock::duration window() const noexcept { return window_; }

 private:
  void expire(Clock::time_point now);

  const std::size_t max_calls_;
  const Clock::duration window_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> admitted_;
};

}  // namespace ragrl

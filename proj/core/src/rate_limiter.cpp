// SPDX-License-Identifier: Apache-2.0
#include "ragrl/rate_limiter.hpp"

#include <stdexcept>
#include <thread>

namespace ragrl {

Clock::time_point SteadyClock::now() const {
  return std::chrono::time_point_cast<duration>(std::chrono::steady_clock::now());
}

void SteadyClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

Clock::time_point ManualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_until(time_point t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void ManualClock::advance(duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

RateLimiter::RateLimiter(std::size_t max_calls, Clock::duration window, std::shared_ptr<Clock> clock)
    : max_calls_(max_calls), window_(window), clock_(std::move(clock)) {
  if (max_calls_ == 0) throw std::invalid_argument("RateLimiter needs max_calls > 0");
  if (window_ <= Clock::duration::zero()) throw std::invalid_argument("RateLimiter needs a positive window");
}

void RateLimiter::expire(Clock::time_point now) {
  // An admission at time a occupies the window [a, a + window).
  while (!admitted_.empty() && admitted_.front() + window_ <= now) admitted_.pop_front();
}

bool RateLimiter::try_acquire() {
  std::lock_guard lock(mu_);
  auto now = clock_->now();
  expire(now);
  if (admitted_.size() >= max_calls_) return false;
  admitted_.push_back(now);
  return true;
}

Clock::time_point RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  while (true) {
    auto now = clock_->now();
    expire(now);
    if (admitted_.size() < max_calls_) {
      admitted_.push_back(now);
      return now;
    }
    auto wake = admitted_.front() + window_;
    // Sleeping while holding the lock keeps admissions in FIFO order.
    clock_->sleep_until(wake);
  }
}

}  // namespace ragrl

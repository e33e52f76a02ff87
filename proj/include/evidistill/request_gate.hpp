#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>

namespace evidistill {

// Classic token bucket. A non-positive rate disables limiting.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_second = 0.0, double burst = 1.0);

  // Blocks until a token is available.
  void acquire();

  double rate() const { return rate_; }

 private:
  using Clock = std::chrono::steady_clock;

  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

// Every call that leaves the process (search engines, vision backends,
// teacher endpoint) passes through one shared gate: it is rate limited and
// counted. Cache hits never touch the gate.
class RequestGate {
 public:
  explicit RequestGate(double rate_per_second = 0.0, double burst = 1.0);

  void acquire();

  std::uint64_t requests() const { return requests_.load(); }

 private:
  TokenBucket bucket_;
  std::atomic<std::uint64_t> requests_{0};
};

}  // namespace evidistill

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <initializer_list>

#include "evidistill/error.hpp"

namespace evidistill {

struct RetryPolicy {
  int max_attempts = 3;
  double base_backoff_seconds = 0.5;

  void validate() const;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

Sleeper real_sleeper();

// Calls `fn` until it returns, sleeping base * 2^(k-1) seconds after the k-th
// failed attempt. Errors whose code is not listed in `retryable` propagate
// immediately; the last retryable error propagates once attempts run out.
template <class F>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, std::initializer_list<ErrorCode> retryable,
                  F&& fn) -> decltype(fn()) {
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      const bool can_retry = std::find(retryable.begin(), retryable.end(), e.code()) != retryable.end();
      if (!can_retry || attempt >= attempts) throw;
      if (sleep) sleep(std::chrono::duration<double>(policy.base_backoff_seconds * std::pow(2.0, attempt - 1)));
    }
  }
}

}  // namespace evidistill

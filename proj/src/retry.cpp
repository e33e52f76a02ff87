#include "evidistill/retry.hpp"

#include <thread>

namespace evidistill {

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::ConfigInvalid, "retry max_attempts must be >= 1");
  if (base_backoff_seconds < 0) throw Error(ErrorCode::ConfigInvalid, "retry base_backoff must be >= 0");
}

Sleeper real_sleeper() {
  return [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

}  // namespace evidistill

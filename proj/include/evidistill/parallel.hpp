#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace evidistill {

// Runs task(i) for i in [0, n) on up to `width` threads and hands results to
// commit(i, result) strictly in index order, one at a time. Work is claimed in
// index order, so after stop() turns true the committed set is always a
// prefix of the input. An exception from task or commit stops dispatch and
// is rethrown after all workers have joined; nothing past the failing index
// is committed.
template <class Result>
void ordered_parallel(std::size_t n, std::size_t width, const std::function<Result(std::size_t)>& task,
                      const std::function<void(std::size_t, Result&)>& commit,
                      const std::function<bool()>& stop = {}) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> halted{false};
  std::mutex mutex;
  std::map<std::size_t, Result> done;
  std::size_t next_commit = 0;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      if (halted.load() || (stop && stop())) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      std::optional<Result> result;
      try {
        result.emplace(task(i));
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        halted = true;
        return;
      }
      std::lock_guard lock(mutex);
      done.emplace(i, std::move(*result));
      while (!failure) {
        auto it = done.find(next_commit);
        if (it == done.end()) break;
        try {
          commit(it->first, it->second);
        } catch (...) {
          failure = std::current_exception();
          halted = true;
          break;
        }
        done.erase(it);
        ++next_commit;
      }
    }
  };

  width = std::max<std::size_t>(1, std::min(width, n));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(width);
    for (std::size_t t = 0; t < width; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace evidistill

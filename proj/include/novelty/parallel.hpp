#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace novelty {

// Runs fn(i) for i in [0, count) on at most `limit` threads. Results land in
// caller-owned slots indexed by i, so output order never depends on
// scheduling. The exception thrown for the lowest index is rethrown after all
// workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t limit, Fn &&fn) {
  if (count == 0) {
    return;
  }
  const std::size_t workers = std::max<std::size_t>(1, std::min(limit, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = count;
  std::exception_ptr error;

  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(run);
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

} // namespace novelty

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace anscale {

/// Thread count from ANSCALE_THREADS, else 1.
std::size_t default_thread_count();

/// Runs fn(index, worker) for index in [0, n) on up to `threads` workers.
/// Work is handed out in small blocks; callers write results into per-index
/// slots so output never depends on scheduling. The first exception thrown
/// by any worker is rethrown after all workers have drained.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
    return;
  }
  const std::size_t block = std::max<std::size_t>(1, n / (threads * 16));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&](std::size_t w) {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t start = next.fetch_add(block);
      if (start >= n) break;
      const std::size_t stop = std::min(n, start + block);
      try {
        for (std::size_t i = start; i < stop; ++i) fn(i, w);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace anscale

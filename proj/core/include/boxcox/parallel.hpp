#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace boxcox {

/// Resolve a requested thread count: 0 (or negative) means all hardware
/// threads, with the BOXCOX_INFER_THREADS environment variable as fallback.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BOXCOX_INFER_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for i in [begin, end) on up to `threads` workers. Work is
/// handed out by an atomic counter; callers must index any shared output
/// by i so results are independent of scheduling. The first exception
/// thrown by any worker is rethrown on the calling thread.
inline void parallel_for(int begin, int end, int threads,
                         const std::function<void(int)>& fn) {
  const int total = end - begin;
  if (total <= 0) return;
  threads = std::min(resolve_threads(threads), total);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::atomic<int> next(begin);
  std::atomic<bool> failed(false);
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= end) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace boxcox

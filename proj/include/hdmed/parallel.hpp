#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hdmed {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
// claimed dynamically, so callers must write results into per-index slots.
// The first exception thrown by any item is rethrown after all workers join.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (count <= 0) return;
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

// Resolves a requested worker count: positive values pass through; zero or
// negative means HDMED_THREADS from the environment, else the hardware count.
int resolve_threads(int requested);

}  // namespace hdmed

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bstack {

/// Process-wide worker count used by the parallel loops (0 = hardware).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Run body(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results by index so output order
/// never depends on scheduling. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = thread_count()) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bstack

#include "bstack/parallel.hpp"

namespace bstack {

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned n) { g_threads = n; }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace bstack

#include "cycreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>
#include <vector>

namespace cycreg {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be >= 1");
  g_threads.store(n);
}

int thread_count() { return g_threads.load(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
  const int workers = std::min<std::int64_t>(thread_count(), n > 0 ? n : 1);
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::int64_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace cycreg

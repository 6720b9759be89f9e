#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace odm::util {

// Worker count: ODMKIT_THREADS env var, else hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("ODMKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition of [0, n). fn(thread_index, begin, end) runs on each
// worker; results must be written to disjoint, pre-sized slots so the split is
// deterministic for a fixed worker count.
inline void parallel_blocks(std::size_t n,
                            const std::function<void(int, std::size_t, std::size_t)>& fn,
                            int workers = 0) {
  if (workers <= 0) workers = worker_count();
  if (n == 0) return;
  if (workers > static_cast<int>(n)) workers = static_cast<int>(n);
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const std::size_t b = static_cast<std::size_t>(t) * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, t, b, e] { fn(t, b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace odm::util

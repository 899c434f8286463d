#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace winoq {

// Deterministic block-partitioned parallel for. Work items write disjoint
// outputs; partitioning depends only on (count, threads), never on timing.
template <typename Fn>
void parallel_for(size_t count, size_t threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  threads = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const size_t chunk = (count + threads - 1) / threads;
  for (size_t t = 0; t < threads; ++t) {
    const size_t lo = t * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline size_t default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

}  // namespace winoq

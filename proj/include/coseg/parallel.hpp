#pragma once

#include "coseg/types.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace coseg {

/// Chunked parallel loop. `fn(begin, end)` must only write to per-index
/// slots, never to shared accumulators; under that contract results are
/// bit-identical for any thread count.
template <class Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  if (n <= 0) return;
  threads = std::max(1, threads);
  const auto hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw > 0) threads = std::min(threads, hw);
  if (threads == 1 || n < 256) {
    fn(Index{0}, n);
    return;
  }
  const Index chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const Index b = std::min<Index>(n, t * chunk);
    const Index e = std::min<Index>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace coseg

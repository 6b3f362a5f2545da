#ifndef FTL_PARALLEL_HPP
#define FTL_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ftl {

/// Upper bound on kernel worker threads, taken from FTL_THREADS (default 1).
inline int max_threads() {
  static const int n = [] {
    const char* env = std::getenv("FTL_THREADS");
    if (!env) return 1;
    int v = std::atoi(env);
    return v < 1 ? 1 : v;
  }();
  return n;
}

/// Runs fn(begin, end) over disjoint contiguous chunks of [0, n).
/// Each index is owned by exactly one worker and per-element work is
/// sequential, so results are identical for any thread count.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
  const long threads = std::min<long>(max_threads(), n);
  if (threads <= 1) {
    if (n > 0) fn(0L, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  const long chunk = (n + threads - 1) / threads;
  for (long t = 0; t < threads; ++t) {
    const long lo = t * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace ftl

#endif  // FTL_PARALLEL_HPP

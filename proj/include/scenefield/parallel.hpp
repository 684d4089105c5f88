#pragma once

// Deterministic data parallelism: [0, n) is split into contiguous blocks, each
// element is written by exactly one thread with a fixed inner loop order, so
// results are bit-identical for every thread count.

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace scenefield {

inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_num_threads(int n) { thread_count_slot().store(std::max(1, n)); }

inline int num_threads() { return thread_count_slot().load(); }

// fn(begin, end) over a partition of [0, n).
template <typename Fn>
void parallel_for(long long n, Fn&& fn) {
  const int threads = num_threads();
  if (n <= 0) return;
  if (threads <= 1 || n < 256) {
    fn(0LL, n);
    return;
  }
  const int workers = int(std::min<long long>(threads, n));
  const long long chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers) - 1);
  for (int t = 1; t < workers; ++t) {
    const long long b = t * chunk, e = std::min(n, (t + 1) * chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0LL, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace scenefield

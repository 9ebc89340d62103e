#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace cshield {

// Worker cap: CONVEX_SHIELD_THREADS when set, otherwise hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("CONVEX_SHIELD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return std::min(n, 256);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 64u));
}

// Work is split into a fixed number of contiguous shards, independent of the
// worker count, and reductions must combine per-shard results in shard order.
// That keeps every result bit-identical no matter how many threads run.
inline constexpr int kShardCount = 64;

struct ShardRange {
  size_t begin = 0;
  size_t end = 0;
};

inline ShardRange shard_range(size_t n, int shard) {
  const size_t lo = n * static_cast<size_t>(shard) / kShardCount;
  const size_t hi = n * static_cast<size_t>(shard + 1) / kShardCount;
  return {lo, hi};
}

// fn(shard_index, begin, end) is invoked once per non-empty shard.
template <typename Fn>
void parallel_shards(size_t n, Fn&& fn) {
  const int workers = std::min(worker_count(), kShardCount);
  if (workers <= 1 || n < 2) {
    for (int s = 0; s < kShardCount; ++s) {
      const auto r = shard_range(n, s);
      if (r.begin < r.end) fn(s, r.begin, r.end);
    }
    return;
  }
  std::atomic<int> next{0};
  auto run = [&] {
    for (;;) {
      const int s = next.fetch_add(1);
      if (s >= kShardCount) return;
      const auto r = shard_range(n, s);
      if (r.begin < r.end) fn(s, r.begin, r.end);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers) - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

}  // namespace cshield

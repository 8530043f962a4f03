#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dynalloc {

/// Number of worker threads used by the library (>= 1). Defaults to the
/// hardware concurrency. Results never depend on this value.
std::size_t worker_count() noexcept;
void set_worker_count(std::size_t workers) noexcept;

/// Splits [0, count) into fixed shards of `shard_size` and calls
/// fn(shard_index, begin, end) for each, possibly concurrently. Shard
/// boundaries depend only on (count, shard_size), so per-shard results
/// reduced in shard order are independent of the worker count.
template <typename Fn>
void for_each_shard(std::size_t count, std::size_t shard_size, Fn&& fn) {
  if (count == 0) return;
  shard_size = std::max<std::size_t>(shard_size, 1);
  const std::size_t shards = (count + shard_size - 1) / shard_size;
  const std::size_t workers = std::min(worker_count(), shards);

  auto run_shard = [&](std::size_t s) {
    const std::size_t begin = s * shard_size;
    const std::size_t end = std::min(count, begin + shard_size);
    fn(s, begin, end);
  };

  if (workers <= 1) {
    for (std::size_t s = 0; s < shards; ++s) run_shard(s);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t s = next.fetch_add(1);
      if (s >= shards) return;
      try {
        run_shard(s);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(shards);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) summation of equally sized vectors, in index order.
/// Deterministic for a fixed number of parts.
void pairwise_sum_into(std::vector<std::vector<double>>& parts,
                       std::vector<double>& out);

}  // namespace dynalloc

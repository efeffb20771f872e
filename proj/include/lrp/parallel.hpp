#ifndef LRP_PARALLEL_HPP
#define LRP_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lrp {

/// Worker count used when a caller does not pass one. Defaults to
/// std::thread::hardware_concurrency(); the CLI's --threads overrides it.
int default_threads();
void set_default_threads(int threads);

/// Runs body(i) for i in [0, count). Indices are handed out dynamically, so
/// callers must not depend on which thread runs which index; anything that
/// has to be reproducible is written to slot i and reduced afterwards in
/// index order. The first exception thrown by a task is rethrown.
template <class Body>
void parallel_for(std::int64_t count, Body&& body, int threads = default_threads()) {
  if (count <= 0) return;
  const int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, count));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Evaluates f(i) for every index and returns the results in index order.
template <class F>
auto parallel_map(std::int64_t count, F&& f, int threads = default_threads()) {
  using T = decltype(f(std::int64_t{0}));
  std::vector<T> out(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  parallel_for(count, [&](std::int64_t i) { out[static_cast<std::size_t>(i)] = f(i); },
               threads);
  return out;
}

/// Deterministic block reduction for large accumulators: indices are grouped
/// into fixed blocks of `block` consecutive items, each block is accumulated
/// sequentially into a fresh accumulator, and block results are merged into
/// the total in block order. The result does not depend on the thread count.
template <class Acc, class MakeAcc, class Accumulate, class Merge>
Acc ordered_block_reduce(std::int64_t count, std::int64_t block, MakeAcc&& make,
                         Accumulate&& accumulate, Merge&& merge,
                         int threads = default_threads()) {
  Acc total = make();
  if (count <= 0) return total;
  block = std::max<std::int64_t>(block, 1);
  const std::int64_t blocks = (count + block - 1) / block;
  const std::int64_t wave = std::max(1, threads);
  for (std::int64_t first = 0; first < blocks; first += wave) {
    const std::int64_t n = std::min(wave, blocks - first);
    std::vector<Acc> partial;
    partial.reserve(static_cast<std::size_t>(n));
    for (std::int64_t b = 0; b < n; ++b) partial.push_back(make());
    parallel_for(
        n,
        [&](std::int64_t b) {
          const std::int64_t begin = (first + b) * block;
          const std::int64_t end = std::min(count, begin + block);
          for (std::int64_t i = begin; i < end; ++i) accumulate(partial[b], i);
        },
        threads);
    for (auto& p : partial) merge(total, p);
  }
  return total;
}

}  // namespace lrp

#endif  // LRP_PARALLEL_HPP

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace vortexloc {

/// Worker cap for the parallel drivers; 0 means hardware concurrency.
struct Parallelism {
  unsigned threads = 0;

  unsigned resolved() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
  }
};

/// Calls `fn(i)` for every i in [0, n) on up to `par.resolved()` threads.
/// Work is handed out dynamically, so `fn` must only write to slot i of its
/// output; results are then independent of the worker count.
template <class Fn>
void parallel_for(std::size_t n, Parallelism par, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(par.resolved(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Index-ordered parallel map.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Parallelism par, Fn&& fn) {
  std::vector<T> out(n);
  parallel_for(n, par, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

/// Pairwise (tree) summation in a fixed order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace vortexloc

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace splade {

/// Worker count: SPLADE_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
int thread_count();

namespace detail {
bool& in_parallel_region();
}

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Nested calls
/// run serially on the calling thread. The first exception is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_per_thread = 1) {
  const std::size_t workers =
      detail::in_parallel_region()
          ? 1
          : std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n / std::max<std::size_t>(1, min_per_thread));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::in_parallel_region() = true;
      try {
        // Strided assignment balances triangular loops.
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace splade

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dualdg {

/// Runs fn(k) for k in [0, count) on up to `jobs` threads, contiguous chunks.
/// The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(std::ptrdiff_t count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count < 2) {
    for (std::ptrdiff_t k = 0; k < count; ++k) fn(k);
    return;
  }
  const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(jobs, count);
  const std::ptrdiff_t chunk = (count + workers - 1) / workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::ptrdiff_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const std::ptrdiff_t begin = w * chunk;
        const std::ptrdiff_t end = std::min(count, begin + chunk);
        try {
          for (std::ptrdiff_t k = begin; k < end; ++k) fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace dualdg

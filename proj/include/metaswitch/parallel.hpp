#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace metaswitch {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Items are independent; the first
/// exception thrown by any item is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// parallel_for where item i holds cost(i) units of `budget` while it runs. An item costlier
/// than the whole budget runs once nothing else holds any.
template <typename Cost, typename Fn>
void budgeted_parallel_for(std::size_t count, int jobs, double budget, Cost&& cost, Fn&& fn) {
  std::mutex m;
  std::condition_variable cv;
  double in_use = 0.0;
  parallel_for(count, jobs, [&](std::size_t i) {
    const double c = cost(i);
    {
      std::unique_lock<std::mutex> lock(m);
      cv.wait(lock, [&] { return in_use == 0.0 || in_use + c <= budget; });
      in_use += c;
    }
    struct Release {
      std::mutex& m;
      std::condition_variable& cv;
      double& in_use;
      double c;
      ~Release() {
        {
          std::lock_guard<std::mutex> lock(m);
          in_use -= c;
          if (in_use < 1e-9 * c) in_use = 0.0;
        }
        cv.notify_all();
      }
    } release{m, cv, in_use, c};
    fn(i);
  });
}

}  // namespace metaswitch

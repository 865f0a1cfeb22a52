#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rose {

// Runs fn(i) for i in [0, n_jobs) on up to `workers` threads. Jobs write
// their results into caller-owned slots indexed by i, so the outcome does
// not depend on scheduling. If several jobs throw, the exception of the
// lowest job index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n_jobs, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n_jobs));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = n_jobs;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rose

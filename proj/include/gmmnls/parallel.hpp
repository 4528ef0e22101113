#ifndef GMMNLS_PARALLEL_HPP
#define GMMNLS_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gmmnls {

/// Runs fn(0..n-1) across a worker pool. Tasks must be independent; results
/// should be written to pre-sized per-index storage. n_threads <= 0 uses the
/// hardware concurrency, 1 runs inline.
inline void parallel_for(int n, const std::function<void(int)>& fn, int n_threads = 0) {
  if (n <= 0) return;
  if (n_threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    n_threads = (hw == 0) ? 1 : static_cast<int>(hw);
  }
  n_threads = std::min(n_threads, n);
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gmmnls

#endif  // GMMNLS_PARALLEL_HPP

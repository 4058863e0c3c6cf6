#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gcomp {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

// Global cap on worker threads (0 = hardware concurrency). Set once by the
// CLI before any parallel work starts.
inline void set_max_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned max_threads() {
  const unsigned cap = detail::thread_cap().load();
  if (cap != 0) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw != 0 ? hw : 1;
}

// Runs fn(chunk_index) for chunk_index in [0, n_chunks). Chunk indices are
// handed out through an atomic counter; each chunk must write only to its
// own output slots so results are identical for any thread count.
inline void parallel_for_chunks(std::uint64_t n_chunks,
                                const std::function<void(std::uint64_t)>& fn) {
  unsigned workers = max_threads();
  if (workers == 1 || n_chunks <= 1) {
    for (std::uint64_t i = 0; i < n_chunks; ++i) fn(i);
    return;
  }
  if (workers > n_chunks) workers = static_cast<unsigned>(n_chunks);

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n_chunks || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gcomp

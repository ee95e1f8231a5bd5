#include "cbvf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cbvf {

namespace {

std::atomic<unsigned> g_threads{1};

// Below this many items per worker the spawn cost dominates.
constexpr std::size_t kMinChunk = 2048;

}  // namespace

void set_thread_count(unsigned count) {
  if (count == 0) count = std::max(1U, std::thread::hardware_concurrency());
  g_threads.store(count);
}

unsigned thread_count() { return g_threads.load(); }

std::size_t chunk_count(std::size_t n) {
  return std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, n / kMinChunk));
}

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t workers = chunk_count(n);
  const std::size_t chunk = (n + workers - 1) / std::max<std::size_t>(1, workers);
  if (workers <= 1) {
    body(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        body(w, begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) { body(begin, end); });
}

}  // namespace cbvf

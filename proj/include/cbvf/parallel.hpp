#pragma once

#include <cstddef>
#include <functional>

namespace cbvf {

/// Worker count used by `parallel_for`; 0 selects hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Splits [0, n) into contiguous chunks, one per worker, and runs `body` on
/// each. Chunk boundaries depend only on `n` and the worker count; callers
/// that write disjoint outputs get results independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Number of chunks `parallel_chunks` will use for `n` items.
std::size_t chunk_count(std::size_t n);

/// As `parallel_for`, but also passes the chunk index in [0, chunk_count(n)).
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace cbvf

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tdn {

/// Process-wide cap on worker threads. 0 means "not set": the value of
/// TDNOISE_THREADS is used, falling back to hardware concurrency.
void set_thread_cap(unsigned threads);
unsigned thread_cap();

/// Runs body(chunk_begin, chunk_end, chunk_index) over [0, n) split into
/// fixed-size chunks. Chunk boundaries depend only on n and grain, never on
/// the thread count, so callers that reduce per chunk and merge in chunk
/// order get bit-identical results for any thread count.
template <typename Body>
void parallel_chunks(std::size_t n, std::size_t grain, Body&& body) {
  if (n == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t chunks = (n + grain - 1) / grain;
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(chunks, std::max(1u, thread_cap())));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c * grain, std::min(n, (c + 1) * grain), c);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) {
          body(c * grain, std::min(n, (c + 1) * grain), c);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t grain = 256) {
  parallel_chunks(n, grain, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) body(i);
  });
}

inline std::size_t chunk_count(std::size_t n, std::size_t grain) {
  return grain == 0 ? 0 : (n + grain - 1) / grain;
}

}  // namespace tdn

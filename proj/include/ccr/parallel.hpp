#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace ccr {

using Rng = std::mt19937_64;

/// Independent generator for one (seed, stream) pair. Streams are keyed by
/// path index so that adding paths never changes earlier ones.
inline Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

/// Runs body(i) for i in [0, count) on up to `threads` workers using
/// contiguous chunks. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_for(std::int64_t count, int threads, Body&& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  const auto workers = static_cast<std::int64_t>(std::min<std::int64_t>(threads, count));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t begin = count * w / workers;
    const std::int64_t end = count * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::int64_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ccr

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace ptkit {

/// Splits [0, count) into `workers` contiguous chunks and runs fn(begin, end)
/// on each. The first exception thrown by any chunk is rethrown.
template <typename Fn>
void parallel_for(std::int64_t count, int workers, Fn&& fn) {
  if (count <= 0) return;
  const std::int64_t chunks = std::clamp<std::int64_t>(workers, 1, count);
  if (chunks == 1) {
    fn(std::int64_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(chunks));
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t begin = count * c / chunks;
    const std::int64_t end = count * (c + 1) / chunks;
    threads.emplace_back([&, c, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ptkit

#pragma once

#include "ddcrf/types.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace ddcrf {

// Worker count from DDCRF_WORKERS, falling back to 1.
inline int default_workers() {
  if (const char* env = std::getenv("DDCRF_WORKERS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (...) {
    }
  }
  return 1;
}

// Runs fn(i) for i in [0, count) over contiguous blocks, one per worker.
// Callers write to disjoint outputs, so results do not depend on `workers`.
template <typename Fn>
void parallel_for(Index count, int workers, Fn&& fn) {
  const Index w = std::min<Index>(std::max(workers, 1), count);
  if (w <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  const Index block = (count + w - 1) / w;
  std::vector<std::jthread> threads;
  threads.reserve(static_cast<std::size_t>(w));
  for (Index begin = 0; begin < count; begin += block) {
    const Index end = std::min(count, begin + block);
    threads.emplace_back([&fn, begin, end] {
      for (Index i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace ddcrf

#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace mvcov {

// default worker count: MVCOV_THREADS env var, else 1
inline int default_threads() {
  if (const char* env = std::getenv("MVCOV_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

// Runs fn(i) for i in [0, count). Work items must be independent; results
// are deterministic as long as fn(i) depends only on i.
inline void parallel_for(long count, int threads,
                         const std::function<void(long)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int nw = static_cast<int>(std::min<long>(threads, count));
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace mvcov

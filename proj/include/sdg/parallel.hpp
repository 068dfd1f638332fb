#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace sdg {

/// Worker count from SDG_THREADS (default 1). Results of every parallel
/// loop in the library are independent of this value.
inline int thread_count() {
  if (const char* env = std::getenv("SDG_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return 1;
}

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// bodies must write to disjoint outputs.
template <typename Body>
void parallel_for(long n, Body&& body) {
  const int workers = static_cast<int>(std::min<long>(thread_count(), std::max<long>(n, 1)));
  if (workers <= 1 || n < 64) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = w * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (long i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sdg

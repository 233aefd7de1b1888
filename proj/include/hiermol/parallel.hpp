#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace hiermol {

/// Runs f(i) for i in [0, n) on up to `workers` threads, each thread taking
/// a strided subset. Callers write results by index, so output order never
/// depends on scheduling. The first exception (lowest worker) is rethrown.
template <typename F>
void parallel_for(int n, int workers, F&& f) {
  workers = std::clamp(workers, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace hiermol

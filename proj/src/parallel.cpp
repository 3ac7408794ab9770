#include "gatediag/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gatediag {

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int n) { g_threads.store(n < 0 ? 0 : n); }

int thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
#ifdef _OPENMP
  const int requested = g_threads.load();
  if (requested == 1) {
    serial_for(n, body);
    return;
  }
  const std::int64_t count = static_cast<std::int64_t>(n);
  if (requested > 0) {
#pragma omp parallel for schedule(static) num_threads(requested)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
#else
  serial_for(n, body);
#endif
}

void serial_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace gatediag

#pragma once

#include <cstddef>
#include <functional>

namespace gatediag {

// Worker-count control for the OpenMP kernels. 0 picks the runtime default.
// Outputs never depend on this: parallel loops write into disjoint
// per-index slots and all reductions run serially in index order.
void set_thread_count(int n);
int thread_count();

// Parallel loop over [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Serial twin, kept as the reference path for tests and the benchmark.
void serial_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace gatediag

#pragma once

#include <cstddef>
#include <functional>

namespace kickhj {

// Number of worker threads used by parallel_for. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Static contiguous partition of [0, n). fn must only write to disjoint outputs,
// so results never depend on the number of threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace kickhj

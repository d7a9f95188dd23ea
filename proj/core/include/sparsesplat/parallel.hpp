#pragma once

#include <cstddef>
#include <functional>

namespace sparsesplat {

// Worker count used by parallel_for. 0 means std::thread::hardware_concurrency.
void set_thread_count(int threads);
int thread_count();

// Runs fn(i) for i in [0, n). Each index must only write its own output slot;
// callers reduce results afterwards in index order so results do not depend
// on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sparsesplat

#pragma once

#include <cstddef>
#include <functional>

namespace mtlab {

/// Worker count: MTLAB_THREADS if set and positive, otherwise 1.
int thread_count();

/// Override the worker count for the current process (0 restores the env default).
void set_thread_count(int n);

/// Runs body(begin, end) over a static partition of [0, n).
///
/// Results must be written to per-index slots and reduced afterwards in index
/// order; that keeps every sum bit-identical for any worker count. Nested calls
/// from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mtlab

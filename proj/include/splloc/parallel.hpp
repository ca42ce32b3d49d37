#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace splloc::par {

// Number of worker threads parallel_for will use. Defaults to the OpenMP
// thread count; 1 when built without OpenMP.
int max_threads();

// Override the worker count (n <= 0 restores the default). Used by the
// benchmark and by tests that compare serial and parallel runs.
void set_max_threads(int n);

namespace detail {
int thread_override();
}

// Runs fn(i) for i in [0, n). Iterations must be independent. Callers that
// need a deterministic reduction write into per-index slots and combine
// serially afterwards; results are then identical for any thread count.
template <typename F>
void parallel_for(std::ptrdiff_t n, F&& fn) {
#ifdef _OPENMP
    const int threads = max_threads();
    if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
        for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
        return;
    }
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

}  // namespace splloc::par

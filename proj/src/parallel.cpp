#include "splloc/parallel.hpp"

#include <atomic>

namespace splloc::par {

namespace {
std::atomic<int> g_thread_override{0};
}

namespace detail {
int thread_override() { return g_thread_override.load(std::memory_order_relaxed); }
}

int max_threads() {
    const int override = detail::thread_override();
    if (override > 0) return override;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_max_threads(int n) { g_thread_override.store(n > 0 ? n : 0, std::memory_order_relaxed); }

}  // namespace splloc::par

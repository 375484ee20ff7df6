#include "cbsim/parallel.hpp"

#include <atomic>

namespace cbsim {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }

bool parallel_enabled() { return g_parallel.load(); }

int worker_count() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

}  // namespace cbsim

#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cbsim {

/// Process-wide switch between the OpenMP kernels and the serial reference
/// path. Both paths execute the same per-element functor; results agree
/// bit-for-bit because all cross-element reductions in this codebase are
/// performed serially after the parallel fill.
void set_parallel(bool enabled);
bool parallel_enabled();

/// Number of workers the parallel path would use (1 in serial mode).
int worker_count();

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  if (!parallel_enabled() || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace cbsim

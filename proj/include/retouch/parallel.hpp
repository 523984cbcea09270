#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace retouch {

/// Execution policy for the data-parallel kernels. Serial is the reference
/// path used by the tests and the benchmark; Parallel is the OpenMP path.
/// Every kernel must produce identical results under both policies and for
/// any thread count (outputs are written to disjoint slots and reductions
/// use fixed-order accumulation).
enum class Exec { Serial, Parallel };

int max_threads();
void set_threads_from_env();

template <class F>
void par_for(std::int64_t n, Exec exec, F&& fn) {
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace retouch

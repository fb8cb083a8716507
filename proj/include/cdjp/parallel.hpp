#pragma once

// Thin OpenMP shims. Every kernel that uses these also keeps a serial
// reference twin; both must produce bit-identical results.

#ifdef _OPENMP
#include <omp.h>
#define CDJP_PRAGMA(x) _Pragma(#x)
#define CDJP_PARALLEL_FOR CDJP_PRAGMA(omp parallel for schedule(static))
#define CDJP_PARALLEL_FOR_DYNAMIC CDJP_PRAGMA(omp parallel for schedule(dynamic))
#else
#define CDJP_PARALLEL_FOR
#define CDJP_PARALLEL_FOR_DYNAMIC
#endif

namespace cdjp {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline bool in_parallel() {
#ifdef _OPENMP
  return omp_in_parallel();
#else
  return false;
#endif
}

}  // namespace cdjp

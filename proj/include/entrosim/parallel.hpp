#pragma once

// OpenMP-backed parallel loop with a serial reference path. Callers must
// write results into preallocated per-index slots and reduce in index order,
// so output is bit-identical for any thread count (threads == 1 runs the
// plain serial loop, the reference used by tests and the benchmark).

#ifdef _OPENMP
#include <omp.h>
#endif

#include <exception>
#include <mutex>

namespace entrosim {

template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads == 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
  if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) fn(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) fn(i);
  }
#else
  for (int i = 0; i < n; ++i) fn(i);
#endif
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// parallel_for that captures the first exception thrown by any item and
/// rethrows it on the calling thread once the loop finishes. Exceptions must
/// not escape an OpenMP region directly.
template <class Fn>
void parallel_for_checked(int n, int threads, Fn&& fn) {
  std::exception_ptr error = nullptr;
  std::mutex error_mutex;
  parallel_for(n, threads, [&](int i) {
    try {
      fn(i);
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
}

}  // namespace entrosim

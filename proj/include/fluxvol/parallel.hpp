// Deterministic parallel map: OpenMP kernels with a serial reference path.
//
// Every data-parallel loop in the library goes through parallel_map_indexed.
// Results are written into a preallocated slot per index and reduced in fixed
// index order afterwards, so sums are bitwise identical for any worker count.
#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fluxvol {

enum class ExecPolicy {
  Serial,  // reference implementation, plain loop
  OpenMP,  // parallel for over indices
};

struct ParallelConfig {
  ExecPolicy policy = ExecPolicy::OpenMP;
  int num_threads = 0;  // 0 = library default
};

inline ParallelConfig& global_parallel_config() {
  static ParallelConfig cfg;
  return cfg;
}

// workers == 0 selects the serial reference path; workers >= 1 selects OpenMP
// with that thread count.
inline void set_workers(int workers) {
  auto& cfg = global_parallel_config();
  if (workers <= 0) {
    cfg.policy = ExecPolicy::Serial;
    cfg.num_threads = 0;
  } else {
    cfg.policy = ExecPolicy::OpenMP;
    cfg.num_threads = workers;
  }
}

// Evaluates fn(i) for i in [0, n) and returns the results indexed by i.
// fn must be pure with respect to shared state. Exceptions thrown by fn are
// captured and rethrown (first index wins) after the loop completes.
template <typename T, typename Fn>
std::vector<T> parallel_map_indexed(std::size_t n, Fn&& fn,
                                    const ParallelConfig& cfg = global_parallel_config()) {
  std::vector<T> out(n);
  if (cfg.policy == ExecPolicy::Serial) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errs(n);
  bool failed = false;
#ifdef _OPENMP
  int nthreads = cfg.num_threads > 0 ? cfg.num_threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      errs[static_cast<std::size_t>(i)] = std::current_exception();
      failed = true;
    }
  }
#else
  for (std::size_t i = 0; i < n; ++i) {
    try {
      out[i] = fn(i);
    } catch (...) {
      errs[i] = std::current_exception();
      failed = true;
    }
  }
#endif
  if (failed) {
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

// Fixed-order sum; the reduction companion to parallel_map_indexed.
inline double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace fluxvol

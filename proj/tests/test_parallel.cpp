#include <doctest.h>

#include <cmath>

#include "fluxvol/parallel.hpp"

using namespace fluxvol;

namespace {

double kernel(std::size_t i) {
  double x = 1e-3 * static_cast<double>(i + 1);
  return std::sin(x) * std::exp(-x) / (1.0 + x);
}

}  // namespace

TEST_CASE("openmp map matches the serial reference bitwise") {
  const std::size_t n = 20000;
  ParallelConfig serial{ExecPolicy::Serial, 0};
  std::vector<double> ref = parallel_map_indexed<double>(n, kernel, serial);
  for (int threads : {1, 2, 3, 7}) {
    ParallelConfig par{ExecPolicy::OpenMP, threads};
    std::vector<double> got = parallel_map_indexed<double>(n, kernel, par);
    REQUIRE(got.size() == ref.size());
    bool identical = true;
    for (std::size_t i = 0; i < n; ++i) identical = identical && (got[i] == ref[i]);
    CHECK(identical);
    CHECK(ordered_sum(got) == ordered_sum(ref));
  }
}

TEST_CASE("exceptions from workers propagate") {
  ParallelConfig par{ExecPolicy::OpenMP, 3};
  CHECK_THROWS_AS(parallel_map_indexed<double>(
                      100,
                      [](std::size_t i) -> double {
                        if (i == 57) throw std::runtime_error("boom");
                        return 0.0;
                      },
                      par),
                  std::runtime_error);
}

TEST_CASE("worker knob selects the policy") {
  set_workers(0);
  CHECK(global_parallel_config().policy == ExecPolicy::Serial);
  set_workers(4);
  CHECK(global_parallel_config().policy == ExecPolicy::OpenMP);
  CHECK(global_parallel_config().num_threads == 4);
  set_workers(0);
}

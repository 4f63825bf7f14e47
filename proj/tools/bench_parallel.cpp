// Compares the serial reference path against the OpenMP path on the
// data-parallel kernels (section-integral node traces and Monte-Carlo-style
// batches) and checks that both produce bitwise-identical sums.
#include <chrono>
#include <cstdio>

#include "fluxvol/parallel.hpp"
#include "fluxvol/tokamak.hpp"
#include "fluxvol/volume.hpp"

using namespace fluxvol;

namespace {

double timed(const char* name, ExecPolicy policy, double* out) {
  global_parallel_config().policy = policy;
  TokamakCircularParams params;
  auto field = make_tokamak_field(params);
  SectionDiskSpec disk{0.0, 1.0, 0.0, 0.5};
  SectionVolumeOptions opts;
  opts.n_radial = 24;
  opts.n_angular = 24;
  opts.trace.rtol = 1e-9;
  opts.trace.atol = 1e-11;
  opts.coarse_error_pass = false;
  auto t0 = std::chrono::steady_clock::now();
  SectionVolumeResult r = volume_eq1_section(*field, disk, opts);
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%-18s V = %.15f   %.3f s\n", name, r.V, dt);
  *out = r.V;
  return dt;
}

}  // namespace

int main() {
  double v_serial = 0.0, v_omp = 0.0;
  double t_serial = timed("serial reference", ExecPolicy::Serial, &v_serial);
  double t_omp = timed("openmp", ExecPolicy::OpenMP, &v_omp);
  bool identical = v_serial == v_omp;
  std::printf("speedup %.2fx, results %s\n", t_serial / t_omp,
              identical ? "bitwise identical" : "DIFFER");
  return identical ? 0 : 1;
}

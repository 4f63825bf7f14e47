// Single-orbit estimators: rotation number from successively closest returns
// (with continued-fraction digits), mean return time by the periodic
// trapezoidal rule on reordered returns, and a weighted Birkhoff average.
#pragma once

#include <cstddef>
#include <vector>

#include "fluxvol/field.hpp"
#include "fluxvol/tracer.hpp"

namespace fluxvol {

// Successive returns of an orbit to a closed curve: the curve coordinate
// phi_n in [0,1) of the n-th return (the initial point is coordinate 0) and
// the return time T_n between returns n-1 and n. When the series comes from
// a trace, windings carries the unwrapped revolution count of each return;
// synthetic series may leave it empty and the revolution counts are then
// bootstrapped from a running estimate.
struct ReturnSeries {
  std::vector<double> phis;
  std::vector<double> Ts;
  std::vector<double> windings;
  std::size_t size() const { return phis.size(); }
};

struct IotaEstimate {
  double iota = 0.0;
  std::vector<std::size_t> closest_return_indices;  // n_k
  std::vector<long> revolution_counts;              // m_k
  std::vector<long> cf_digits;                      // a_k from n_{k+1} = a_k n_k + n_{k-1}
  double error_estimate = 0.0;                      // |last two estimates' difference|
  bool sides_alternated = true;  // closest returns fell on alternate sides of 0
};

// Rotation number from the successively closest returns to phi = 0.
// Throws InsufficientDataError for too-short input and RationalWindingError
// (carrying the period) when an exact return is detected.
IotaEstimate estimate_iota_closest_returns(const ReturnSeries& series);

struct MeanReturnTime {
  double T_bar = 0.0;
  double error_estimate = 0.0;  // |full-sample - half-sample| estimate
};

// Labels the n-th return with theta_n = frac((n-1) iota), sorts, and applies
// the periodic trapezoidal rule on [0,1). Throws on duplicate labels within
// 1e-12 (rational contamination).
MeanReturnTime mean_return_time_trapezoid(const ReturnSeries& series, double iota);

// Weighted average with the bump window w(s) = exp(-1/(s(1-s))), s = n/(N+1).
// window_exponent <= 0 selects the flat window (arithmetic mean).
double weighted_birkhoff_average(const std::vector<double>& values, double window_exponent = 1.0);

// Builds a ReturnSeries by tracing from a point on the section curve.
// For a PlanePhi section the curve coordinate is the poloidal angle fraction
// about the section center; for a PoloidalAngle section it is the toroidal
// fraction. Orientation is set by the first return so coordinates advance
// positively; only transverse positive-direction crossings are used.
struct ReturnSeriesBuild {
  ReturnSeries series;
  std::vector<CrossingEvent> crossings;
  double psi_drift = 0.0;  // max |psi - psi0| along crossings when psi available
  int orientation = +1;    // sign applied to the raw angle differences
};

ReturnSeriesBuild build_return_series(const FieldModel& field, const Vec3& start,
                                      const SectionSpec& section, std::size_t n_returns,
                                      const TraceOptions& opts = {}, double t_budget = 1e6);

// Adaptive single-surface measurement: traces returns until the sorted
// trapezoid labels theta_n = frac((n-1) iota) cover the circle with max gap
// below the target (windings near a rational fill in slowly), then reports
// the rotation number and mean return time. Throws RationalWindingError for
// exactly periodic orbits and InsufficientDataError when n_max is exhausted
// before coverage.
struct SurfaceReturnMeasurement {
  IotaEstimate iota;
  MeanReturnTime mean_return;
  std::size_t n_returns_used = 0;
  double psi_drift = 0.0;
  double max_label_gap = 0.0;
};

SurfaceReturnMeasurement measure_surface_returns(const FieldModel& field, const Vec3& seed,
                                                 const SectionSpec& section, std::size_t n_floor,
                                                 std::size_t n_max, double max_gap,
                                                 const TraceOptions& opts = {});

// largest gap of the sorted labels frac((n-1) iota), n = 1..N, on the circle
double trapezoid_label_max_gap(std::size_t N, double iota);

}  // namespace fluxvol

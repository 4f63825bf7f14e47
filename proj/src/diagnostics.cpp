#include "fluxvol/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fluxvol/quadrature.hpp"

namespace fluxvol {

namespace {

// distance to 0 on the circle
double circle_dist(double phi) { return std::min(phi, 1.0 - phi); }

// signed representative in (-1/2, 1/2]
double signed_rep(double phi) { return phi > 0.5 ? phi - 1.0 : phi; }

}  // namespace

IotaEstimate estimate_iota_closest_returns(const ReturnSeries& series) {
  const std::size_t N = series.size();
  if (N < 3) throw InsufficientDataError("estimate_iota_closest_returns: need N >= 3 returns");
  for (double p : series.phis)
    if (!(p >= 0.0 && p < 1.0))
      throw std::invalid_argument("estimate_iota_closest_returns: phi_n outside [0,1)");

  IotaEstimate est;
  // records of the distance to the initial point; n is 1-based
  std::vector<std::size_t> records;
  double best = 2.0;
  for (std::size_t n = 1; n <= N; ++n) {
    double d = circle_dist(series.phis[n - 1]);
    if (d < 1e-12)
      throw RationalWindingError("estimate_iota_closest_returns: exact period detected",
                                 static_cast<int>(n));
    if (d < best) {
      best = d;
      records.push_back(n);
    }
  }
  if (records.size() < 2)
    throw InsufficientDataError("estimate_iota_closest_returns: fewer than two closest returns");

  // revolution counts: taken from the trace's unwrapped winding when the
  // series carries it (a closest return winds nearly integrally), otherwise
  // bootstrapped from a running estimate seeded by the first return
  const bool have_windings = series.windings.size() == N;
  double running = series.phis[records[0] - 1];
  std::vector<long> ms(records.size());
  std::vector<double> estimates;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (have_windings)
      ms[k] = std::lround(series.windings[records[k] - 1]);
    else
      ms[k] = std::lround(static_cast<double>(records[k]) * running);
    if (k >= 1) {
      double pk = signed_rep(series.phis[records[k] - 1]);
      double pk1 = signed_rep(series.phis[records[k - 1] - 1]);
      double nk = static_cast<double>(records[k]);
      double nk1 = static_cast<double>(records[k - 1]);
      double denom = nk * pk1 - nk1 * pk;
      if (denom != 0.0) {
        double iota = (ms[k] * pk1 - ms[k - 1] * pk) / denom;
        if (!have_windings) {
          long m_repinned = std::lround(nk * iota);
          if (m_repinned != ms[k]) {  // running estimate was too coarse; redo once
            ms[k] = m_repinned;
            iota = (ms[k] * pk1 - ms[k - 1] * pk) / denom;
          }
        }
        estimates.push_back(iota);
        running = iota;
      }
    }
  }
  if (estimates.empty())
    throw InsufficientDataError("estimate_iota_closest_returns: degenerate closest returns");

  // check the alternate-sides expectation; warn instead of correcting
  for (std::size_t k = 1; k < records.size(); ++k) {
    double s0 = signed_rep(series.phis[records[k - 1] - 1]);
    double s1 = signed_rep(series.phis[records[k] - 1]);
    if (s0 * s1 > 0.0) {
      est.sides_alternated = false;
      std::fprintf(stderr,
                   "warning: closest returns %zu and %zu fell on the same side of 0\n",
                   records[k - 1], records[k]);
    }
  }

  est.iota = estimates.back();
  est.error_estimate = estimates.size() >= 2
                           ? std::fabs(estimates.back() - estimates[estimates.size() - 2])
                           : std::fabs(estimates.back() - series.phis[records[0] - 1]);
  est.closest_return_indices = records;
  est.revolution_counts = ms;

  // digits from the index recurrence n_{k+1} = a_k n_k + n_{k-1}, n_0 = 1
  std::vector<std::size_t> ns;
  ns.push_back(1);  // n_0
  ns.insert(ns.end(), records.begin(), records.end());
  for (std::size_t k = 1; k + 1 < ns.size(); ++k) {
    long num = static_cast<long>(ns[k + 1]) - static_cast<long>(ns[k - 1]);
    long a = num / static_cast<long>(ns[k]);
    if (a >= 1 && static_cast<std::size_t>(a) * ns[k] + ns[k - 1] == ns[k + 1])
      est.cf_digits.push_back(a);
    else
      break;  // recurrence violated (noise); stop emitting digits
  }
  return est;
}

MeanReturnTime mean_return_time_trapezoid(const ReturnSeries& series, double iota) {
  const std::size_t N = series.size();
  if (N < 3) throw InsufficientDataError("mean_return_time_trapezoid: need N >= 3 returns");
  if (series.Ts.size() != N)
    throw std::invalid_argument("mean_return_time_trapezoid: phis/Ts length mismatch");

  auto estimate = [&](std::size_t first, std::size_t count) {
    std::vector<std::pair<double, double>> pts(count);
    for (std::size_t n = 1; n <= count; ++n) {
      double th = static_cast<double>(first + n - 1) * iota;
      th -= std::floor(th);
      pts[n - 1] = {th, series.Ts[first + n - 1]};
    }
    std::sort(pts.begin(), pts.end());
    for (std::size_t j = 0; j + 1 < count; ++j)
      if (pts[j + 1].first - pts[j].first < 1e-12)
        throw std::invalid_argument(
            "mean_return_time_trapezoid: degenerate spacing (rational contamination)");
    return periodic_trapezoid_scattered(std::move(pts));
  };

  MeanReturnTime out;
  out.T_bar = estimate(0, N);
  // two-sided half-sample proxy: both halves are themselves estimators of
  // the same limit, so their spread tracks the sensitivity to the sample
  // window; the safety factor makes the estimate cover initial-point shifts
  double first_half = estimate(0, N / 2);
  double second_half = estimate(N - N / 2, N / 2);
  out.error_estimate =
      3.0 * std::max(std::fabs(out.T_bar - first_half), std::fabs(out.T_bar - second_half));
  return out;
}

double trapezoid_label_max_gap(std::size_t N, double iota) {
  std::vector<double> th(N);
  for (std::size_t n = 1; n <= N; ++n) {
    double t = static_cast<double>(n - 1) * iota;
    th[n - 1] = t - std::floor(t);
  }
  std::sort(th.begin(), th.end());
  double g = th.front() + 1.0 - th.back();
  for (std::size_t j = 0; j + 1 < N; ++j) g = std::max(g, th[j + 1] - th[j]);
  return g;
}

SurfaceReturnMeasurement measure_surface_returns(const FieldModel& field, const Vec3& seed,
                                                 const SectionSpec& section, std::size_t n_floor,
                                                 std::size_t n_max, double max_gap,
                                                 const TraceOptions& opts) {
  SurfaceReturnMeasurement out;
  std::size_t N = std::max<std::size_t>(n_floor, 8);
  for (;;) {
    ReturnSeriesBuild series = build_return_series(field, seed, section, N, opts);
    out.psi_drift = series.psi_drift;
    try {
      out.iota = estimate_iota_closest_returns(series.series);
    } catch (const InsufficientDataError&) {
      if (N >= n_max) throw;
      N = std::min(n_max, 4 * N);
      continue;
    }
    out.max_label_gap = trapezoid_label_max_gap(N, out.iota.iota);
    if (out.max_label_gap > max_gap && N < n_max) {
      // pre-coverage the gap shrinks like 1 - N d; project the count that
      // closes the circle, otherwise double
      std::size_t next = 2 * N;
      if (out.max_label_gap > 0.5)
        next = std::max(next, static_cast<std::size_t>(1.15 * static_cast<double>(N) /
                                                       (1.0 - out.max_label_gap)));
      N = std::min(n_max, next);
      continue;
    }
    out.mean_return = mean_return_time_trapezoid(series.series, out.iota.iota);
    out.n_returns_used = N;
    if (out.max_label_gap > max_gap)
      throw InsufficientDataError("measure_surface_returns: coverage target not reached");
    return out;
  }
}

double weighted_birkhoff_average(const std::vector<double>& values, double window_exponent) {
  if (values.empty()) throw std::invalid_argument("weighted_birkhoff_average: empty input");
  const std::size_t N = values.size();
  if (window_exponent <= 0.0) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(N);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    double s = static_cast<double>(n) / static_cast<double>(N + 1);
    double w = std::exp(-window_exponent / (s * (1.0 - s)));
    num += w * values[n - 1];
    den += w;
  }
  return num / den;
}

ReturnSeriesBuild build_return_series(const FieldModel& field, const Vec3& start,
                                      const SectionSpec& section, std::size_t n_returns,
                                      const TraceOptions& opts, double t_budget) {
  ReturnSeriesBuild out;
  TraceOptions o = opts;
  o.store_points = false;

  // the start must lie on the section so returns are counted from it
  const bool toroidal_section = section.kind == SectionSpec::Kind::PlanePhi;

  OrbitSegment orbit = trace(field, start, t_budget, o, &section, n_returns + 4);
  std::vector<CrossingEvent> evs;
  for (const auto& ev : orbit.crossings)
    if (ev.transverse) evs.push_back(ev);
  if (evs.size() < n_returns)
    throw InsufficientDataError("build_return_series: time budget exhausted before N returns");
  evs.resize(n_returns);

  // curve coordinate: the other angle, unwrapped, relative to the start
  CylPoint c0 = to_cylindrical(start);
  double a0 = toroidal_section ? std::atan2(c0.Z - section.Z_center, c0.R - section.R_center)
                               : c0.phi;
  auto raw_angle = [&](const CrossingEvent& ev) {
    return toroidal_section ? ev.theta_unwrapped : ev.phi_unwrapped;
  };

  double first_delta = raw_angle(evs.front()) - a0;
  out.orientation = (first_delta >= 0.0) ? +1 : -1;

  double psi0 = 0.0;
  bool have_psi = field.has_flux_label();
  if (have_psi) psi0 = field.eval_psi(start);

  double prev_t = 0.0;
  for (const auto& ev : evs) {
    double winding = out.orientation * (raw_angle(ev) - a0) / kTwoPi;
    double coord = winding - std::floor(winding);
    out.series.phis.push_back(coord);
    out.series.Ts.push_back(ev.t - prev_t);
    out.series.windings.push_back(winding);
    prev_t = ev.t;
    if (have_psi) out.psi_drift = std::max(out.psi_drift, std::fabs(field.eval_psi(ev.point) - psi0));
  }
  out.crossings = std::move(evs);
  return out;
}

}  // namespace fluxvol

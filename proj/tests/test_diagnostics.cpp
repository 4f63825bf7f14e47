#include <doctest.h>

#include <cmath>
#include <random>

#include "analytic_oracles.hpp"
#include "fluxvol/diagnostics.hpp"
#include "fluxvol/tokamak.hpp"

using namespace fluxvol;

namespace {

const oracles::Tokamak tok{};
constexpr double kGolden = 0.6180339887498949;  // (sqrt 5 - 1) / 2

ReturnSeries rigid_rotation(double iota, std::size_t N, double T_const = 1.0) {
  ReturnSeries s;
  for (std::size_t n = 1; n <= N; ++n) {
    double p = static_cast<double>(n) * iota;
    s.phis.push_back(p - std::floor(p));
    s.Ts.push_back(T_const);
  }
  return s;
}

}  // namespace

TEST_CASE("golden-mean rotation: iota exact, digits all ones") {
  IotaEstimate est = estimate_iota_closest_returns(rigid_rotation(kGolden, 200));
  CHECK(std::fabs(est.iota - kGolden) < 1e-9);
  REQUIRE(est.cf_digits.size() >= 8);
  for (std::size_t k = 0; k < 8; ++k) CHECK(est.cf_digits[k] == 1);
  CHECK(est.sides_alternated);
  // closest-return indices follow the Fibonacci recurrence exactly
  const auto& ns = est.closest_return_indices;
  REQUIRE(ns.size() >= 4);
  for (std::size_t k = 1; k + 1 < ns.size(); ++k)
    CHECK(est.cf_digits[k - 1] * ns[k] + ns[k - 1] == ns[k + 1]);
}

TEST_CASE("1/sqrt(2) rotation: digits all twos") {
  IotaEstimate est = estimate_iota_closest_returns(rigid_rotation(1.0 / std::sqrt(2.0), 1500));
  CHECK(std::fabs(est.iota - 1.0 / std::sqrt(2.0)) < 1e-9);
  REQUIRE(est.cf_digits.size() >= 8);
  for (std::size_t k = 0; k < 8; ++k) CHECK(est.cf_digits[k] == 2);
}

TEST_CASE("rational winding raises with the period") {
  ReturnSeries s = rigid_rotation(0.25, 20);
  CHECK_THROWS_AS(estimate_iota_closest_returns(s), RationalWindingError);
  try {
    estimate_iota_closest_returns(s);
  } catch (const RationalWindingError& e) {
    CHECK(e.period == 4);
  }
}

TEST_CASE("too-short series raises") {
  CHECK_THROWS_AS(estimate_iota_closest_returns(rigid_rotation(kGolden, 2)),
                  InsufficientDataError);
}

TEST_CASE("estimates improve through the record sequence on a circle diffeo") {
  // smooth circle-map coordinate phi = F(theta): the estimate sharpens as the
  // records deepen, so truncating the series at growing N gives a
  // non-increasing error
  const double iota = kGolden;
  auto series_to = [&](std::size_t N) {
    ReturnSeries s;
    for (std::size_t n = 1; n <= N; ++n) {
      double th = static_cast<double>(n) * iota;
      th -= std::floor(th);
      double p = th + 0.08 * std::sin(kTwoPi * th) / kTwoPi;
      p -= std::floor(p);
      s.phis.push_back(p);
      s.Ts.push_back(1.0);
    }
    return s;
  };
  double prev_err = 1.0;
  for (std::size_t N : {20, 60, 200, 600, 2000}) {
    IotaEstimate est = estimate_iota_closest_returns(series_to(N));
    double err = std::fabs(est.iota - iota);
    CHECK(err <= prev_err + 1e-15);
    prev_err = err;
  }
  IotaEstimate final = estimate_iota_closest_returns(series_to(2000));
  CHECK(std::fabs(final.iota - iota) < 1e-8);
  CHECK(final.error_estimate < 1e-5);
}

TEST_CASE("trapezoid mean: constant series is exact") {
  MeanReturnTime mrt = mean_return_time_trapezoid(rigid_rotation(kGolden, 100, 3.25), kGolden);
  CHECK(mrt.T_bar == doctest::Approx(3.25).epsilon(1e-14));
}

TEST_CASE("trapezoid mean: cosine return-time model converges") {
  const double iota = kGolden;
  ReturnSeries s;
  for (std::size_t n = 1; n <= 1000; ++n) {
    double p = static_cast<double>(n) * iota;
    p -= std::floor(p);
    s.phis.push_back(p);
    double theta = static_cast<double>(n - 1) * iota;
    theta -= std::floor(theta);
    s.Ts.push_back(1.0 + 0.3 * std::cos(kTwoPi * theta));
  }
  MeanReturnTime mrt = mean_return_time_trapezoid(s, iota);
  CHECK(std::fabs(mrt.T_bar - 1.0) < 1e-4);
}

TEST_CASE("trapezoid mean: rational contamination raises") {
  ReturnSeries s = rigid_rotation(kGolden, 50);
  CHECK_THROWS(mean_return_time_trapezoid(s, 0.5));  // duplicate labels at iota = 1/2
}

TEST_CASE("weighted birkhoff: normalization and flat window") {
  std::vector<double> c(37, 2.5);
  CHECK(weighted_birkhoff_average(c) == doctest::Approx(2.5).epsilon(1e-14));
  std::vector<double> alt;
  for (int i = 0; i < 40; ++i) alt.push_back(i % 2 == 0 ? 1.0 : -1.0);
  CHECK(weighted_birkhoff_average(alt, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("traced benchmark surface: iota and mean return time") {
  auto field = make_tokamak_field({1.0, 1.0});
  TraceOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-13;
  Vec3 start = to_cartesian({1.5, 0.0, 0.0});
  SectionSpec sec = SectionSpec::plane_phi(0.0);
  sec.R_center = 1.0;
  ReturnSeriesBuild series = build_return_series(*field, start, sec, 500, o);
  CHECK(series.psi_drift < 1e-8);

  IotaEstimate est = estimate_iota_closest_returns(series.series);
  CHECK(std::fabs(est.iota - tok.iota(0.5)) < 1e-6);

  MeanReturnTime mrt = mean_return_time_trapezoid(series.series, est.iota);
  CHECK(std::fabs(mrt.T_bar - tok.mean_return_time(0.5)) < 1e-5);

  // weighted Birkhoff average of the same data agrees with the trapezoid
  double wba = weighted_birkhoff_average(series.series.Ts);
  CHECK(std::fabs(wba - mrt.T_bar) < 1e-5);
}

TEST_CASE("trapezoid mean is invariant under dropping the leading returns") {
  auto field = make_tokamak_field({1.0, 1.0});
  TraceOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-13;
  Vec3 start = to_cartesian({1.5, 0.0, 0.0});
  SectionSpec sec = SectionSpec::plane_phi(0.0);
  sec.R_center = 1.0;
  ReturnSeriesBuild series = build_return_series(*field, start, sec, 700, o);
  IotaEstimate est = estimate_iota_closest_returns(series.series);

  // same orbit relabeled from the 101st return: all theta labels shift by a
  // constant mod 1
  ReturnSeries shifted;
  for (std::size_t n = 100; n < series.series.size(); ++n) {
    shifted.phis.push_back(series.series.phis[n]);
    shifted.Ts.push_back(series.series.Ts[n]);
  }
  MeanReturnTime full = mean_return_time_trapezoid(series.series, est.iota);
  MeanReturnTime tail = mean_return_time_trapezoid(shifted, est.iota);
  CHECK(std::fabs(full.T_bar - tail.T_bar) <=
        10.0 * (full.error_estimate + tail.error_estimate) + 1e-9);
}

TEST_CASE("half-sample error proxy is sane") {
  auto field = make_tokamak_field({1.0, 1.0});
  TraceOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-13;
  Vec3 start = to_cartesian({1.45, 0.0, 0.0});
  SectionSpec sec = SectionSpec::plane_phi(0.0);
  sec.R_center = 1.0;
  ReturnSeriesBuild series = build_return_series(*field, start, sec, 600, o);
  IotaEstimate est = estimate_iota_closest_returns(series.series);
  MeanReturnTime full = mean_return_time_trapezoid(series.series, est.iota);

  ReturnSeries half;
  half.phis.assign(series.series.phis.begin(), series.series.phis.begin() + 300);
  half.Ts.assign(series.series.Ts.begin(), series.series.Ts.begin() + 300);
  MeanReturnTime part = mean_return_time_trapezoid(half, est.iota);
  CHECK(std::fabs(full.T_bar - part.T_bar) <= 10.0 * (full.error_estimate + 1e-12));
}

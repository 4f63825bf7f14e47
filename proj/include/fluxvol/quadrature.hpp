// Quadrature and interpolation helpers shared across modules.
#pragma once

#include <functional>
#include <vector>

namespace fluxvol {

// Gauss-Legendre nodes/weights on [a, b].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n, double a, double b);

// Adaptive Simpson on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 40);

// Periodic trapezoidal rule for scattered samples (x_i, y_i) of a 1-periodic
// function: sorts by x and closes the interval between the last point and the
// first point shifted by one period.
double periodic_trapezoid_scattered(std::vector<std::pair<double, double>> pts);

// Cumulative integral of tabulated (x_i, f_i) with strictly increasing x,
// one output value per node (first is 0). Uses local quadratic (Simpson-like)
// interpolation on irregular grids; exact for quadratics. Also emits a
// per-node error proxy, the difference against the trapezoid rule.
struct CumulativeIntegral {
  std::vector<double> values;
  std::vector<double> error_estimate;
};
CumulativeIntegral cumulative_integral(const std::vector<double>& x, const std::vector<double>& f);

// Natural cubic spline on irregular nodes; evaluation clamps to [x_front, x_back].
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);
  double operator()(double t) const;
  bool valid() const { return x_.size() >= 2; }

 private:
  std::vector<double> x_, y_, m_;  // m_ = second derivatives at nodes
};

}  // namespace fluxvol

#include "fluxvol/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fluxvol/geometry.hpp"

namespace fluxvol {

GaussLegendre gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  // Newton iteration on Legendre polynomials, nodes symmetric about 0.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    gl.nodes[i] = x;
    gl.nodes[n - 1 - i] = -x;
    gl.weights[i] = w;
    gl.weights[n - 1 - i] = w;
  }
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    gl.nodes[i] = mid - half * gl.nodes[i];
    gl.weights[i] *= half;
  }
  std::sort(gl.nodes.begin(), gl.nodes.end());
  return gl;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                   double fb, double m, double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double periodic_trapezoid_scattered(std::vector<std::pair<double, double>> pts) {
  if (pts.empty()) throw std::invalid_argument("periodic_trapezoid_scattered: empty input");
  std::sort(pts.begin(), pts.end());
  const std::size_t n = pts.size();
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double x0 = pts[j].first, y0 = pts[j].second;
    double x1 = (j + 1 < n) ? pts[j + 1].first : pts[0].first + 1.0;
    double y1 = (j + 1 < n) ? pts[j + 1].second : pts[0].second;
    s += (x1 - x0) * 0.5 * (y0 + y1);
  }
  return s;
}

CumulativeIntegral cumulative_integral(const std::vector<double>& x, const std::vector<double>& f) {
  if (x.size() != f.size() || x.size() < 2)
    throw std::invalid_argument("cumulative_integral: need >= 2 matching nodes");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("cumulative_integral: x not increasing");
  const std::size_t n = x.size();
  CumulativeIntegral out;
  out.values.assign(n, 0.0);
  out.error_estimate.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double h = x[i + 1] - x[i];
    double trap = 0.5 * h * (f[i] + f[i + 1]);
    // integrate the Lagrange quadratic through three nodes containing [x_i, x_{i+1}]
    std::size_t j = (i == 0) ? 0 : i - 1;
    if (j + 2 >= n) j = n - 3;
    double x0 = x[j], x1 = x[j + 1], x2 = x[j + 2];
    double f0 = f[j], f1 = f[j + 1], f2 = f[j + 2];
    double d0 = (x0 - x1) * (x0 - x2);
    double d1 = (x1 - x0) * (x1 - x2);
    double d2 = (x2 - x0) * (x2 - x1);
    // antiderivative at t of (t-xa)(t-xb)
    auto P = [](double t, double xa, double xb) {
      return t * t * t / 3.0 - (xa + xb) * t * t / 2.0 + xa * xb * t;
    };
    auto prim = [&](double t) {
      return f0 * P(t, x1, x2) / d0 + f1 * P(t, x0, x2) / d1 + f2 * P(t, x0, x1) / d2;
    };
    double quad = prim(x[i + 1]) - prim(x[i]);
    out.values[i + 1] = out.values[i] + quad;
    out.error_estimate[i + 1] = out.error_estimate[i] + std::fabs(quad - trap);
  }
  return out;
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n != y_.size() || n < 2) throw std::invalid_argument("CubicSpline: bad input");
  m_.assign(n, 0.0);
  if (n == 2) return;
  if (n == 3) {
    // single quadratic: constant second derivative
    double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
    double dd = 2.0 * ((y_[2] - y_[1]) / h1 - (y_[1] - y_[0]) / h0) / (h0 + h1);
    m_[0] = m_[1] = m_[2] = dd;
    return;
  }
  // not-a-knot boundary conditions; small dense solve for second derivatives
  std::vector<double> M(n * n, 0.0), rhs(n, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return M[i * n + j]; };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    at(i, i - 1) = h0 / 6.0;
    at(i, i) = (h0 + h1) / 3.0;
    at(i, i + 1) = h1 / 6.0;
    rhs[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
  }
  {  // third-derivative continuity at the second and second-to-last knots
    double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
    at(0, 0) = 1.0 / h0;
    at(0, 1) = -(1.0 / h0 + 1.0 / h1);
    at(0, 2) = 1.0 / h1;
    double hn0 = x_[n - 2] - x_[n - 3], hn1 = x_[n - 1] - x_[n - 2];
    at(n - 1, n - 3) = 1.0 / hn0;
    at(n - 1, n - 2) = -(1.0 / hn0 + 1.0 / hn1);
    at(n - 1, n - 1) = 1.0 / hn1;
  }
  // Gaussian elimination with partial pivoting (node counts are small)
  std::vector<std::size_t> piv(n);
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(at(r, col)) > std::fabs(at(best, col))) best = r;
    if (best != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(at(col, j), at(best, j));
      std::swap(rhs[col], rhs[best]);
    }
    double pivot = at(col, col);
    if (std::fabs(pivot) < 1e-300) throw std::runtime_error("CubicSpline: singular system");
    for (std::size_t r = col + 1; r < n; ++r) {
      double w = at(r, col) / pivot;
      if (w == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) at(r, j) -= w * at(col, j);
      rhs[r] -= w * rhs[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= at(i, j) * m_[j];
    m_[i] = s / at(i, i);
  }
}

double CubicSpline::operator()(double t) const {
  if (x_.size() < 2) throw std::logic_error("CubicSpline: not initialized");
  if (t <= x_.front()) t = x_.front();
  if (t >= x_.back()) t = x_.back();
  auto it = std::upper_bound(x_.begin(), x_.end(), t);
  std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  if (i + 1 >= x_.size()) i = x_.size() - 2;
  double h = x_[i + 1] - x_[i];
  double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
  return A * y_[i] + B * y_[i + 1] +
         ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

}  // namespace fluxvol

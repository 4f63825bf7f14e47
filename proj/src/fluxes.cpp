#include "fluxvol/fluxes.hpp"

#include <cmath>
#include <stdexcept>

namespace fluxvol {

Vec3 LoopSpec::tangent_at(double theta) const {
  if (tangent) return tangent(theta);
  const double h = 1e-6;
  // 4th-order central difference on the periodic parameter
  auto wrap = [](double t) { return t - std::floor(t); };
  Vec3 p1 = position(wrap(theta + h)), m1 = position(wrap(theta - h));
  Vec3 p2 = position(wrap(theta + 2 * h)), m2 = position(wrap(theta - 2 * h));
  return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
}

LoopSpec poloidal_circle(double R_axis, double r, double phi0, double Z_axis) {
  LoopSpec loop;
  loop.homology = LoopSpec::Homology::Poloidal;
  loop.position = [=](double th) {
    double a = kTwoPi * th;
    return to_cartesian({R_axis + r * std::cos(a), phi0, Z_axis - r * std::sin(a)});
  };
  loop.tangent = [=](double th) {
    double a = kTwoPi * th;
    double dR = -r * kTwoPi * std::sin(a);
    double dZ = -r * kTwoPi * std::cos(a);
    return from_cyl_components(dR, 0.0, dZ, phi0);
  };
  return loop;
}

LoopSpec toroidal_circle(double Rc, double Zc) {
  LoopSpec loop;
  loop.homology = LoopSpec::Homology::Toroidal;
  loop.position = [=](double th) { return to_cartesian({Rc, kTwoPi * th, Zc}); };
  loop.tangent = [=](double th) {
    return from_cyl_components(0.0, Rc * kTwoPi, 0.0, kTwoPi * th);
  };
  return loop;
}

LoopSpec wobbled_poloidal_loop(double R_axis, double r, double phi0, double wobble) {
  LoopSpec loop;
  loop.homology = LoopSpec::Homology::Poloidal;
  loop.position = [=](double th) {
    double a = kTwoPi * th + 0.3 * std::sin(2.0 * kTwoPi * th);
    double phi = phi0 + wobble * std::sin(kTwoPi * th);
    return to_cartesian({R_axis + r * std::cos(a), wrap_angle(phi), -r * std::sin(a)});
  };
  return loop;
}

namespace {

double loop_integral_A(const FieldModel& field, const LoopSpec& loop, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double th = static_cast<double>(i) / n;
    Vec3 x = loop.position(th);
    s += dot(field.eval_A(x), loop.tangent_at(th));
  }
  return s / n;
}

}  // namespace

FluxValue loop_flux(const FieldModel& field, const LoopSpec& loop, int n_quad, double tol,
                    int max_doublings) {
  if (!field.has_vector_potential())
    throw CapabilityError(
        "loop_flux: field has no vector potential; use flux_derivative instead");
  // degenerate (zero-length) loop: all nodes coincide
  FluxValue v;
  v.method = "A-loop";
  double prev = loop_integral_A(field, loop, n_quad);
  int n = n_quad;
  double conv = std::fabs(prev);
  for (int d = 0; d < max_doublings; ++d) {
    double next = loop_integral_A(field, loop, 2 * n);
    conv = std::fabs(next - prev);
    n *= 2;
    prev = next;
    if (conv < tol) break;
  }
  v.Phi = prev;
  v.n_quad = n;
  v.convergence = conv;
  return v;
}

FluxValue annulus_flux(const FieldModel& field, const LoopSpec& loop, const LoopSpec& axis_loop,
                       int n_quad, double tol) {
  FluxValue a = loop_flux(field, loop, n_quad, tol);
  FluxValue b = loop_flux(field, axis_loop, n_quad, tol);
  FluxValue v;
  v.Phi = a.Phi - b.Phi;
  v.method = "annulus";
  v.n_quad = std::max(a.n_quad, b.n_quad);
  v.convergence = a.convergence + b.convergence;
  return v;
}

FluxDerivative flux_derivative(const FieldModel& field, const LoopSpec& loop,
                               const std::function<Vec3(const Vec3&)>& Y, int n_quad) {
  FluxDerivative out;
  out.n_quad = n_quad;
  double s = 0.0;
  double max_term = 0.0, max_scale = 0.0;
  for (int i = 0; i < n_quad; ++i) {
    double th = static_cast<double>(i) / n_quad;
    Vec3 x = loop.position(th);
    Vec3 B = field.eval_B(x);
    Vec3 y = Y(x);
    Vec3 tg = loop.tangent_at(th);
    double term = triple(B, y, tg);
    s += term;
    max_term = std::max(max_term, std::fabs(term));
    max_scale = std::max(max_scale, norm(B) * norm(y) * norm(tg));
  }
  out.dPhi = s / n_quad;
  out.degenerate_Y = max_scale > 0.0 && max_term < 1e-12 * max_scale;
  return out;
}

std::function<Vec3(const Vec3&)> homologue_from_label(
    const std::function<double(const Vec3&)>& label, double fd_step) {
  return [label, fd_step](const Vec3& x) {
    const double h = fd_step;
    Vec3 g{(label({x.x + h, x.y, x.z}) - label({x.x - h, x.y, x.z})) / (2 * h),
           (label({x.x, x.y + h, x.z}) - label({x.x, x.y - h, x.z})) / (2 * h),
           (label({x.x, x.y, x.z + h}) - label({x.x, x.y, x.z - h})) / (2 * h)};
    double g2 = norm2(g);
    if (g2 < 1e-24) throw ConvergenceError("homologue_from_label: vanishing label gradient");
    return g / g2;
  };
}

}  // namespace fluxvol

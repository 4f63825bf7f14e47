#include "fluxvol/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace fluxvol {

namespace {

Vec3 flow_u(const ActionFlow& action, const Vec3& x, double t) {
  if (t == 0.0) return x;
  auto f = [&](const Vec3& p) { return action.field->eval_u(p); };
  return flow_vector_field(f, x, t, action.opts);
}

Vec3 flow_B(const ActionFlow& action, const Vec3& x, double t) {
  if (t == 0.0) return x;
  auto f = [&](const Vec3& p) { return action.field->eval_B(p); };
  return flow_vector_field(f, x, t, action.opts);
}

}  // namespace

Vec3 flow_action_unchecked(const ActionFlow& action, const Vec3& x, const LatticeVec& t) {
  if (!action.field || !action.field->has_symmetry_field())
    throw CapabilityError("flow_action: field must provide a symmetry field u");
  return flow_B(action, flow_u(action, x, t.t_u), t.t_B);
}

Vec3 flow_action(const ActionFlow& action, const Vec3& x, const LatticeVec& t) {
  Vec3 a = flow_action_unchecked(action, x, t);
  Vec3 b = flow_u(action, flow_B(action, x, t.t_B), t.t_u);
  if (norm(a - b) > action.commutation_tol)
    throw ConvergenceError("flow_action: u and B flows do not commute at this point");
  return a;
}

namespace {

}  // namespace

// First time the u-flow returns to the seed point: coarse march to bracket
// the closest approach, then golden-section refinement of |x(t) - seed|.
double u_line_period(const ActionFlow& action, const Vec3& seed) {
  // march in fractions of an estimated period until the point comes back near
  double speed = norm(action.field->eval_u(seed));
  if (speed < 1e-14) throw ConvergenceError("u_line_period: u vanishes at seed");
  // crude upper bound on the period from the orbit scale
  double scale = std::max(1.0, norm(seed));
  double t_max = 64.0 * kTwoPi * scale / speed;
  double dt = t_max / 16384.0;
  Vec3 x = seed;
  double best_t = -1.0;
  double prev_d = 0.0;
  bool left = false;
  double t = 0.0;
  for (int i = 0; i < 16384; ++i) {
    x = flow_vector_field([&](const Vec3& p) { return action.field->eval_u(p); }, x, dt,
                          action.opts);
    t += dt;
    double d = norm(x - seed);
    if (!left && d > 10.0 * dt * speed) left = true;
    // distance grows again after a close approach: the minimum is bracketed
    if (left && d > prev_d && prev_d > 0 && prev_d < 2.0 * dt * speed) {
      best_t = t;
      break;
    }
    prev_d = d;
  }
  if (best_t < 0.0) throw ConvergenceError("u_line_period: no return detected");

  // golden-section refine min |x(t) - seed| over the bracket
  auto dist = [&](double tt) {
    return norm(flow_u(action, seed, tt) - seed);
  };
  double a = best_t - 2.0 * dt, b = best_t;
  const double gr = 0.6180339887498949;
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = dist(c1), f2 = dist(c2);
  for (int it = 0; it < 90; ++it) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - gr * (b - a);
      f1 = dist(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (b - a);
      f2 = dist(c2);
    }
    if (b - a < 1e-13 * std::max(1.0, best_t)) break;
  }
  return 0.5 * (a + b);
}

namespace {

// Least-squares Newton polish of phi_t(seed) = seed over t = (t_u, t_B).
// The Jacobian columns are u and B at the endpoint.
LatticeVec newton_polish(const ActionFlow& action, const Vec3& seed, LatticeVec t,
                         double* residual_out) {
  double resid = 0.0;
  for (int it = 0; it < 30; ++it) {
    Vec3 y = flow_action_unchecked(action, seed, t);
    Vec3 g = y - seed;
    resid = norm(g);
    if (residual_out) *residual_out = resid;
    if (resid < 1e-12) return t;
    Vec3 ju = action.field->eval_u(y);
    Vec3 jb = action.field->eval_B(y);
    // normal equations for the 3x2 least-squares step J d = -g
    double a11 = dot(ju, ju), a12 = dot(ju, jb), a22 = dot(jb, jb);
    double r1 = -dot(ju, g), r2 = -dot(jb, g);
    double det = a11 * a22 - a12 * a12;
    if (std::fabs(det) < 1e-30)
      throw ConvergenceError("find_lattice_generators: degenerate Newton system (u || B?)");
    double du = (r1 * a22 - r2 * a12) / det;
    double db = (a11 * r2 - a12 * r1) / det;
    t.t_u += du;
    t.t_B += db;
    if (std::hypot(du, db) < 1e-14 * (1.0 + std::hypot(t.t_u, t.t_B))) {
      Vec3 yf = flow_action_unchecked(action, seed, t);
      resid = norm(yf - seed);
      if (residual_out) *residual_out = resid;
      return t;
    }
  }
  if (resid > 1e-8) throw ConvergenceError("find_lattice_generators: Newton polish stalled");
  return t;
}

}  // namespace

double B_return_to_u_line(const ActionFlow& action, const Vec3& seed, double* u_offset_angle) {
  // the u-line through the seed is the level curve of the poloidal angle on
  // the invariant surface; detect the B-flow return as a crossing of the
  // poloidal-angle section about the surface axis
  CylPoint cs = to_cylindrical(seed);
  SectionSpec sec = SectionSpec::poloidal_angle(0.0, cs.R, cs.Z);
  // place the poloidal-angle center on the flux-surface axis: step inward
  // from the seed along the psi gradient by the minor-radius estimate
  if (action.field->has_flux_label()) {
    Vec3 g = action.field->eval_grad_psi(seed);
    double gR = g.x * std::cos(cs.phi) + g.y * std::sin(cs.phi);
    double gZ = g.z;
    double gn = std::hypot(gR, gZ);
    if (gn > 1e-12) {
      double rho = std::sqrt(std::max(2.0 * action.field->eval_psi(seed), 0.0));
      if (rho > 0.0) {
        sec.R_center = cs.R - gR / gn * rho;
        sec.Z_center = cs.Z - gZ / gn * rho;
      }
    }
  }
  sec.theta0 = std::atan2(cs.Z - sec.Z_center, cs.R - sec.R_center);

  auto evs = find_crossings(*action.field, seed, sec, 2, 1e5, action.opts);
  if (evs.empty())
    throw ConvergenceError("B_return_to_u_line: B-flow does not return to the u-line");
  if (u_offset_angle) *u_offset_angle = evs.front().phi_unwrapped - cs.phi;
  return evs.front().t;
}

LatticeBasis find_lattice_generators(const ActionFlow& action, const Vec3& seed) {
  if (!action.field || !action.field->has_symmetry_field())
    throw CapabilityError("find_lattice_generators: field must provide u");

  LatticeBasis basis;
  if (action.field->has_flux_label()) basis.surface_label = action.field->eval_psi(seed);

  // (i) candidate 1: the u-line closes onto the seed (it meets the B-line there)
  double tau = u_line_period(action, seed);
  LatticeVec T1{tau, 0.0};

  // (ii) candidate 2: B-flow first return to the seed's u-line, u-corrected
  double dphi = 0.0;
  double T_B = B_return_to_u_line(action, seed, &dphi);
  // u-flow time per unit toroidal angle over the closed u-line
  double angle_rate = kTwoPi / tau;
  double t_u_correction = -dphi / angle_rate;
  LatticeVec T2{t_u_correction, T_B};

  double res1 = 0.0, res2 = 0.0;
  T1 = newton_polish(action, seed, T1, &res1);
  T2 = newton_polish(action, seed, T2, &res2);
  basis.closure_residual = std::max(res1, res2);

  // (iii) Lagrange reduction to minimal-norm generators
  auto nrm2 = [](const LatticeVec& v) { return v.t_u * v.t_u + v.t_B * v.t_B; };
  LatticeVec v1 = T1, v2 = T2;
  if (nrm2(v1) > nrm2(v2)) std::swap(v1, v2);
  for (int it = 0; it < 64; ++it) {
    double mu = (v2.t_u * v1.t_u + v2.t_B * v1.t_B) / nrm2(v1);
    long k = std::lround(mu);
    if (k == 0) break;
    v2.t_u -= k * v1.t_u;
    v2.t_B -= k * v1.t_B;
    if (nrm2(v2) < nrm2(v1)) std::swap(v1, v2);
  }

  double det = lattice_det(v1, v2);
  if (std::fabs(det) < 1e-10 * std::sqrt(nrm2(v1) * nrm2(v2)))
    throw ConvergenceError("find_lattice_generators: near-parallel generators");
  if (det < 0.0) {  // orientation convention: Delta positive
    v2.t_u = -v2.t_u;
    v2.t_B = -v2.t_B;
    det = -det;
  }
  basis.T1 = v1;
  basis.T2 = v2;
  basis.Delta = det;
  return basis;
}

std::optional<QuasisymmetricForm> classify_quasisymmetric_form(const LatticeBasis& basis,
                                                               double tol) {
  // search small integer combinations for a vector with vanishing t_B
  const int range = 16;
  double scale = std::max({std::fabs(basis.T1.t_B), std::fabs(basis.T2.t_B), 1e-30});
  long best_a = 0, best_b = 0;
  double best = std::numeric_limits<double>::max();
  for (int a = -range; a <= range; ++a) {
    for (int b = -range; b <= range; ++b) {
      if (a == 0 && b == 0) continue;
      if (std::gcd(std::abs(a), std::abs(b)) != 1) continue;
      double tB = a * basis.T1.t_B + b * basis.T2.t_B;
      double tu = a * basis.T1.t_u + b * basis.T2.t_u;
      if (std::fabs(tu) < 1e-12) continue;
      if (std::fabs(tB) < best) {
        best = std::fabs(tB);
        best_a = a;
        best_b = b;
      }
    }
  }
  if (best > tol * scale) return std::nullopt;

  // complete the unimodular basis: a q - b p = 1
  long a = best_a, b = best_b, p = 0, q = 0;
  // extended Euclid on (a, b)
  long r0 = a, r1 = b, s0 = 1, s1 = 0, t0 = 0, t1 = 1;
  while (r1 != 0) {
    long qq = r0 / r1;
    std::tie(r0, r1) = std::make_pair(r1, r0 - qq * r1);
    std::tie(s0, s1) = std::make_pair(s1, s0 - qq * s1);
    std::tie(t0, t1) = std::make_pair(t1, t0 - qq * t1);
  }
  // r0 = gcd = +-1 = s0 a + t0 b ; want a q - b p = 1, i.e. (p, q) with
  // det [[a, p], [b, q]] = a q - b p = 1
  long g = r0;
  if (g == 0) return std::nullopt;
  q = s0 / g;  // a s0 + b t0 = g -> a (s0/g) + b (t0/g) = 1
  p = -t0 / g;
  // now a q - b p = a s0/g + b t0/g = 1

  QuasisymmetricForm form;
  LatticeVec vsym{best_a * basis.T1.t_u + best_b * basis.T2.t_u,
                  best_a * basis.T1.t_B + best_b * basis.T2.t_B};
  LatticeVec vcomp{p * basis.T1.t_u + q * basis.T2.t_u, p * basis.T1.t_B + q * basis.T2.t_B};
  // sign flips are unimodular; normalize tau > 0 and T > 0 independently
  if (vsym.t_u < 0.0) {
    vsym.t_u = -vsym.t_u;
    vsym.t_B = -vsym.t_B;
  }
  if (vcomp.t_B < 0.0) {
    vcomp.t_u = -vcomp.t_u;
    vcomp.t_B = -vcomp.t_B;
  }
  form.tau = vsym.t_u;
  form.T = vcomp.t_B;
  // report c reduced modulo tau into [-tau/2, tau/2) for a canonical value
  double c = vcomp.t_u;
  c -= form.tau * std::floor(c / form.tau + 0.5);
  form.c = c;
  return form;
}

}  // namespace fluxvol

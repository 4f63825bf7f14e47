#include "fluxvol/field.hpp"

#include <cmath>
#include <random>

namespace fluxvol {

Vec3 FieldModel::eval_grad_psi(const Vec3& x, double h) const {
  if (h <= 0.0) h = 1e-6;
  Vec3 g;
  g.x = (eval_psi({x.x + h, x.y, x.z}) - eval_psi({x.x - h, x.y, x.z})) / (2.0 * h);
  g.y = (eval_psi({x.x, x.y + h, x.z}) - eval_psi({x.x, x.y - h, x.z})) / (2.0 * h);
  g.z = (eval_psi({x.x, x.y, x.z + h}) - eval_psi({x.x, x.y, x.z - h})) / (2.0 * h);
  return g;
}

namespace {

// 3x3 Jacobian of a vector field by central differences; columns are d/dx_j.
struct Jac3 {
  Vec3 col[3];
};

template <typename F>
Jac3 fd_jacobian(F&& f, const Vec3& x, double h) {
  Jac3 J;
  const Vec3 ex{h, 0, 0}, ey{0, h, 0}, ez{0, 0, h};
  J.col[0] = (f(x + ex) - f(x - ex)) / (2.0 * h);
  J.col[1] = (f(x + ey) - f(x - ey)) / (2.0 * h);
  J.col[2] = (f(x + ez) - f(x - ez)) / (2.0 * h);
  return J;
}

Vec3 jac_apply(const Jac3& J, const Vec3& v) {
  return J.col[0] * v.x + J.col[1] * v.y + J.col[2] * v.z;
}

}  // namespace

Vec3 fd_curl(const FieldModel& field, bool of_A, const Vec3& x, double h) {
  auto f = [&](const Vec3& p) { return of_A ? field.eval_A(p) : field.eval_B(p); };
  Jac3 J = fd_jacobian(f, x, h);
  // curl = (dFz/dy - dFy/dz, dFx/dz - dFz/dx, dFy/dx - dFx/dy)
  return {J.col[1].z - J.col[2].y, J.col[2].x - J.col[0].z, J.col[0].y - J.col[1].x};
}

double fd_div_B(const FieldModel& field, const Vec3& x, double h) {
  auto f = [&](const Vec3& p) { return field.eval_B(p); };
  Jac3 J = fd_jacobian(f, x, h);
  return J.col[0].x + J.col[1].y + J.col[2].z;
}

Vec3 fd_commutator_uB(const FieldModel& field, const Vec3& x, double h) {
  auto fB = [&](const Vec3& p) { return field.eval_B(p); };
  auto fu = [&](const Vec3& p) { return field.eval_u(p); };
  Jac3 JB = fd_jacobian(fB, x, h);
  Jac3 Ju = fd_jacobian(fu, x, h);
  Vec3 u = field.eval_u(x), B = field.eval_B(x);
  // [u, B] = (u . grad) B - (B . grad) u
  return jac_apply(JB, u) - jac_apply(Ju, B);
}

ConsistencyReport check_field_consistency(const FieldModel& field, int n_samples, double h,
                                          std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("check_field_consistency: n_samples >= 1");
  if (!(h > 0.0)) throw std::invalid_argument("check_field_consistency: h > 0");
  ConsistencyReport rep;
  rep.n_samples = n_samples;
  rep.h = h;
  if (field.has_vector_potential()) rep.max_curl_A_minus_B = 0.0;
  if (field.has_flux_label()) rep.max_B_dot_grad_psi = 0.0;
  if (field.has_symmetry_field()) rep.max_commutator_uB = 0.0;

  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };

  int accepted = 0;
  while (accepted < n_samples) {
    // rejection sample a box until in-domain, with margin for the stencil
    Vec3 p{-2.0 + 4.0 * uniform(), -2.0 + 4.0 * uniform(), -1.0 + 2.0 * uniform()};
    bool ok = field.in_domain(p);
    const double margin = 16.0 * h;
    for (int d = 0; ok && d < 3; ++d) {
      Vec3 q = p;
      (&q.x)[d] += margin;
      ok = ok && field.in_domain(q);
      (&q.x)[d] -= 2.0 * margin;
      ok = ok && field.in_domain(q);
    }
    if (!ok) continue;
    ++accepted;

    Vec3 B = field.eval_B(p);
    double Bn = norm(B);
    if (Bn == 0.0) Bn = 1.0;
    rep.max_div_B = std::max(rep.max_div_B, std::fabs(fd_div_B(field, p, h)) / Bn);
    if (field.has_vector_potential()) {
      Vec3 resid = fd_curl(field, true, p, h) - B;
      rep.max_curl_A_minus_B = std::max(rep.max_curl_A_minus_B, norm(resid) / Bn);
    }
    if (field.has_flux_label()) {
      Vec3 g = field.eval_grad_psi(p, h);
      double gn = norm(g);
      if (gn > 1e-12)
        rep.max_B_dot_grad_psi = std::max(rep.max_B_dot_grad_psi, std::fabs(dot(B, g)) / (Bn * gn));
    }
    if (field.has_symmetry_field()) {
      Vec3 u = field.eval_u(p);
      double un = norm(u);
      if (un == 0.0) un = 1.0;
      Vec3 comm = fd_commutator_uB(field, p, h);
      rep.max_commutator_uB = std::max(rep.max_commutator_uB, norm(comm) / (Bn * un));
    }
  }
  return rep;
}

}  // namespace fluxvol

// Surface fluxes by 1D loop integrals of the vector potential, and the flux
// derivative through a homologue field Y, which needs no potential.
#pragma once

#include <functional>
#include <string>

#include "fluxvol/field.hpp"

namespace fluxvol {

// Closed parametrized loop, theta in [0,1).
struct LoopSpec {
  std::function<Vec3(double)> position;
  std::function<Vec3(double)> tangent;  // dx/dtheta; optional, FD fallback when absent
  enum class Homology { Poloidal, Toroidal, Custom } homology = Homology::Custom;
  int p = 0, q = 0;  // custom homology class

  Vec3 tangent_at(double theta) const;
};

struct FluxValue {
  double Phi = 0.0;
  std::string method;  // "A-loop" | "annulus" | "dPhi"
  int n_quad = 0;
  double convergence = 0.0;  // |last doubling difference|
};

// Circle of minor radius r about (R_axis, Z_axis) in the plane phi = phi0.
LoopSpec poloidal_circle(double R_axis, double r, double phi0, double Z_axis = 0.0);
// Toroidal circle R = Rc, Z = Zc.
LoopSpec toroidal_circle(double Rc, double Zc);
// Poloidal loop on the circular surface of radius r with angular wobble, for
// homology-invariance checks: same class as the plane circle.
LoopSpec wobbled_poloidal_loop(double R_axis, double r, double phi0, double wobble = 0.2);

// Spectrally accurate loop integral of A . dx over gamma: n_quad is doubled
// until successive values differ by < tol (at most max_doublings times).
FluxValue loop_flux(const FieldModel& field, const LoopSpec& loop, int n_quad = 256,
                    double tol = 1e-10, int max_doublings = 3);

// Flux for a non-poloidal class relative to a reference loop:
// int_gamma A - int_gamma0 A.
FluxValue annulus_flux(const FieldModel& field, const LoopSpec& loop, const LoopSpec& axis_loop,
                       int n_quad = 256, double tol = 1e-10);

// dPhi along the loop for the homologue field Y: the loop integral of the
// triple product det[B, Y, dx/dtheta]. Warns (returns flag) when Y is
// numerically tangent to the surface.
struct FluxDerivative {
  double dPhi = 0.0;
  int n_quad = 0;
  bool degenerate_Y = false;
};

FluxDerivative flux_derivative(const FieldModel& field, const LoopSpec& loop,
                               const std::function<Vec3(const Vec3&)>& Y, int n_quad = 256);

// Homologue field for a labeled foliation: Y = grad(L)/|grad(L)|^2 for the
// label function L, so flux_derivative returns dPhi per unit label.
std::function<Vec3(const Vec3&)> homologue_from_label(
    const std::function<double(const Vec3&)>& label, double fd_step = 1e-6);

}  // namespace fluxvol

// Period lattice of the R^2 action generated by a commuting pair (u, B) on a
// flux surface: generators, the determinant Delta, and the classification of
// the basis into the upper-triangular symmetric form when one exists.
#pragma once

#include <optional>
#include <utility>

#include "fluxvol/field.hpp"
#include "fluxvol/tracer.hpp"

namespace fluxvol {

// A lattice vector is a pair of flow times (t_u, t_B).
struct LatticeVec {
  double t_u = 0.0;
  double t_B = 0.0;
};

inline double lattice_det(const LatticeVec& a, const LatticeVec& b) {
  return a.t_u * b.t_B - a.t_B * b.t_u;
}

struct LatticeBasis {
  LatticeVec T1, T2;
  double Delta = 0.0;  // |det [T1 T2]|, sign normalized positive
  double surface_label = 0.0;  // psi at the seed when available
  double closure_residual = 0.0;  // |phi_T(seed) - seed| after Newton polish
};

struct ActionFlow {
  const FieldModel* field = nullptr;  // must provide eval_u
  TraceOptions opts;
  double commutation_tol = 1e-7;
};

// Point reached by flowing t_u with u and t_B with B. Also computes the
// reverse composition order and throws ConvergenceError if the two endpoints
// disagree beyond the tolerance (u is then not a symmetry of B).
Vec3 flow_action(const ActionFlow& action, const Vec3& x, const LatticeVec& t);

// Composition in one fixed order, without the commutation check.
Vec3 flow_action_unchecked(const ActionFlow& action, const Vec3& x, const LatticeVec& t);

// Finds generators of the period lattice through the seed: the u-line period
// (point return), the B-flow first return to the seed's u-line with its
// u-offset correction, a 2-vector Newton polish of both, then Lagrange
// reduction. Delta is reported positive.
LatticeBasis find_lattice_generators(const ActionFlow& action, const Vec3& seed);

// Period of the closed u-line through the seed.
double u_line_period(const ActionFlow& action, const Vec3& seed);

// First return time of the B-flow to the u-line through the seed; the
// landing offset along the u-line is also reported when requested.
double B_return_to_u_line(const ActionFlow& action, const Vec3& seed,
                          double* u_offset_angle = nullptr);

// Upper-triangular form [[tau, c], [0, T]] under a unimodular change of
// basis, when one brings the (2,1) entry below tol.
struct QuasisymmetricForm {
  double tau = 0.0;
  double T = 0.0;
  double c = 0.0;
};

std::optional<QuasisymmetricForm> classify_quasisymmetric_form(const LatticeBasis& basis,
                                                               double tol);

}  // namespace fluxvol

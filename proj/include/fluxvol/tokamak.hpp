// Circular-cross-section tokamak benchmark field.
//
// Unperturbed field: B = grad(phi) x grad(psi) + F0 grad(phi) with
// psi = ((R - R0)^2 + Z^2) / 2, giving physical cylindrical components
//   B_R = Z / R,  B_Z = -(R - R0) / R,  B_phi = F0 / R.
// Flux surfaces are the circles (R - R0)^2 + Z^2 = const; the magnetic axis
// is the circle R = R0, Z = 0.
//
// Vector potential, in the gauge fixed here (axis loop integral vanishes):
//   A_phi = -psi / R,   A_Z = -F0 ln(R / R0),   A_R = 0.
//
// Optional perturbation, applied through the potential so exactness is kept:
//   dA = eps * psi * cos(m theta - n phi) * grad(psi),  theta = atan2(Z, R - R0).
// Its curl, differentiated by hand from the closed form (s = sin(m theta - n phi)):
//   dB_R   =  eps * n * psi * Z * s / R
//   dB_phi = -eps * m * psi * s
//   dB_Z   = -eps * n * psi * (R - R0) * s / R
// Since dA is proportional to grad(psi), dB = grad(f) x grad(psi) is tangent
// to the psi level sets, so psi remains an exact flux label for any eps; the
// perturbation changes the field-line flow on each torus, not the tori.
#pragma once

#include <memory>

#include "fluxvol/field.hpp"

namespace fluxvol {

struct TokamakCircularParams {
  double R0 = 1.0;   // major radius, > 0
  double F0 = 1.0;   // toroidal field strength (B_phi = F0 / R)
  double eps = 0.0;  // perturbation amplitude
  int m = 2;         // poloidal mode number
  int n = 1;         // toroidal mode number
};

class TokamakField : public FieldModel {
 public:
  explicit TokamakField(const TokamakCircularParams& params);

  bool has_vector_potential() const override { return true; }
  bool has_flux_label() const override { return true; }
  bool has_symmetry_field() const override { return true; }

  // Valid for minor radius r < 0.95 R0, keeping clear of the R = 0 axis.
  bool in_domain(const Vec3& x) const override;
  std::string name() const override;

  Vec3 eval_grad_psi(const Vec3& x, double h = 0.0) const override;

  const TokamakCircularParams& params() const { return params_; }
  double minor_radius(const Vec3& x) const;

 protected:
  Vec3 B_impl(const Vec3& x) const override;
  Vec3 A_impl(const Vec3& x) const override;
  double psi_impl(const Vec3& x) const override;
  Vec3 u_impl(const Vec3& x) const override;

 private:
  void require_domain(const Vec3& x) const;
  TokamakCircularParams params_;
};

std::shared_ptr<FieldModel> make_tokamak_field(const TokamakCircularParams& params);

}  // namespace fluxvol

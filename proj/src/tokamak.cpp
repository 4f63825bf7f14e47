#include "fluxvol/tokamak.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fluxvol {

TokamakField::TokamakField(const TokamakCircularParams& params) : params_(params) {
  if (!(params.R0 > 0.0)) throw std::invalid_argument("TokamakField: R0 must be > 0");
}

double TokamakField::minor_radius(const Vec3& x) const {
  CylPoint c = to_cylindrical(x);
  return std::hypot(c.R - params_.R0, c.Z);
}

bool TokamakField::in_domain(const Vec3& x) const {
  return minor_radius(x) < 0.95 * params_.R0;
}

void TokamakField::require_domain(const Vec3& x) const {
  if (!in_domain(x)) {
    std::ostringstream os;
    os << "TokamakField: point (" << x.x << ", " << x.y << ", " << x.z
       << ") outside domain r < 0.95 R0";
    throw DomainError(os.str());
  }
}

std::string TokamakField::name() const { return "tokamak-circular"; }

Vec3 TokamakField::B_impl(const Vec3& x) const {
  require_domain(x);
  CylPoint c = to_cylindrical(x);
  const double R0 = params_.R0, F0 = params_.F0;
  double dR = c.R - R0;
  double BR = c.Z / c.R;
  double BZ = -dR / c.R;
  double Bphi = F0 / c.R;
  if (params_.eps != 0.0) {
    double psi = 0.5 * (dR * dR + c.Z * c.Z);
    double theta = std::atan2(c.Z, dR);
    double s = std::sin(params_.m * theta - params_.n * c.phi);
    BR += params_.eps * params_.n * psi * c.Z * s / c.R;
    Bphi += -params_.eps * params_.m * psi * s;
    BZ += -params_.eps * params_.n * psi * dR * s / c.R;
  }
  return from_cyl_components(BR, Bphi, BZ, c.phi);
}

Vec3 TokamakField::A_impl(const Vec3& x) const {
  require_domain(x);
  CylPoint c = to_cylindrical(x);
  const double R0 = params_.R0, F0 = params_.F0;
  double dR = c.R - R0;
  double psi = 0.5 * (dR * dR + c.Z * c.Z);
  double AR = 0.0;
  double Aphi = -psi / c.R;
  double AZ = -F0 * std::log(c.R / R0);
  if (params_.eps != 0.0) {
    double theta = std::atan2(c.Z, dR);
    double f = params_.eps * psi * std::cos(params_.m * theta - params_.n * c.phi);
    AR += f * dR;  // grad(psi) = (R - R0, 0, Z) in cylindrical components
    AZ += f * c.Z;
  }
  return from_cyl_components(AR, Aphi, AZ, c.phi);
}

double TokamakField::psi_impl(const Vec3& x) const {
  CylPoint c = to_cylindrical(x);
  double dR = c.R - params_.R0;
  return 0.5 * (dR * dR + c.Z * c.Z);
}

Vec3 TokamakField::u_impl(const Vec3& x) const {
  // azimuthal Killing field d/dphi; physical component R in the phi direction
  CylPoint c = to_cylindrical(x);
  return from_cyl_components(0.0, c.R, 0.0, c.phi);
}

Vec3 TokamakField::eval_grad_psi(const Vec3& x, double /*h*/) const {
  CylPoint c = to_cylindrical(x);
  double dR = c.R - params_.R0;
  return from_cyl_components(dR, 0.0, c.Z, c.phi);
}

std::shared_ptr<FieldModel> make_tokamak_field(const TokamakCircularParams& params) {
  return std::make_shared<TokamakField>(params);
}

}  // namespace fluxvol

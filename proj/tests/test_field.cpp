#include <doctest.h>

#include <cmath>
#include <random>

#include "analytic_oracles.hpp"
#include "fluxvol/tokamak.hpp"

using namespace fluxvol;

TEST_CASE("unperturbed field components at a reference point") {
  auto field = make_tokamak_field({1.0, 1.0});
  // point (R=1.5, phi=0, Z=0): B = (0, 2/3, -1/3) in (R, phi, Z), psi = 0.125
  Vec3 p = to_cartesian({1.5, 0.0, 0.0});
  Vec3 B = field->eval_B(p);
  CHECK(B.x == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(B.y == doctest::Approx(2.0 / 3.0).epsilon(1e-14));  // phi direction at phi=0
  CHECK(B.z == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  CHECK(field->eval_psi(p) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("magnetic axis has a purely toroidal field") {
  auto field = make_tokamak_field({1.0, 1.0});
  for (double phi : {0.0, 1.0, 2.5}) {
    Vec3 p = to_cartesian({1.0, phi, 0.0});
    Vec3 B = field->eval_B(p);
    CHECK(dot(B, unit_R(phi)) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(dot(B, unit_Z()) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(dot(B, unit_phi(phi)) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("divergence-free by central differences at random points") {
  auto field = make_tokamak_field({1.0, 1.0});
  std::mt19937_64 rng(11);
  auto uniform = [&] { return (rng() >> 11) * 0x1.0p-53; };
  int checked = 0;
  while (checked < 100) {
    double r = 0.6 * uniform(), th = kTwoPi * uniform(), phi = kTwoPi * uniform();
    Vec3 p = to_cartesian({1.0 + r * std::cos(th), phi, r * std::sin(th)});
    double div = fd_div_B(*field, p, 1e-5);
    CHECK(std::fabs(div) < 1e-8);
    ++checked;
  }
}

TEST_CASE("consistency report: unperturbed") {
  auto field = make_tokamak_field({1.0, 1.0});
  ConsistencyReport rep = check_field_consistency(*field, 200, 1e-5, 42);
  CHECK(rep.max_div_B < 1e-7);
  CHECK(rep.max_curl_A_minus_B < 1e-7);
  CHECK(rep.max_B_dot_grad_psi < 1e-7);
  CHECK(rep.max_commutator_uB < 1e-7);
  CHECK(rep.pass(1e-7));
}

TEST_CASE("consistency report: perturbed potential stays exact") {
  TokamakCircularParams params{1.0, 1.0, 0.01, 2, 1};
  auto field = make_tokamak_field(params);
  ConsistencyReport rep = check_field_consistency(*field, 200, 1e-5, 42);
  // the perturbation enters through A, so div B and curl A - B stay at
  // finite-difference round-off, and psi remains an exact flux label
  CHECK(rep.max_div_B < 1e-7);
  CHECK(rep.max_curl_A_minus_B < 1e-6);
  CHECK(rep.max_B_dot_grad_psi < 1e-7);
  // axisymmetry is broken: the commutator with d/dphi must NOT vanish
  CHECK(rep.max_commutator_uB > 1e-4);
}

namespace {

// wrapper with a deliberately broken potential
class BrokenAField : public TokamakField {
 public:
  using TokamakField::TokamakField;

 protected:
  Vec3 A_impl(const Vec3& x) const override { return 1.1 * TokamakField::A_impl(x); }
};

}  // namespace

TEST_CASE("broken potential is caught by the curl check") {
  BrokenAField field({1.0, 1.0});
  ConsistencyReport rep = check_field_consistency(field, 100, 1e-5, 42);
  CHECK(rep.max_curl_A_minus_B > 0.05);  // ~ 0.1 |B| by linearity of curl
  CHECK(rep.max_curl_A_minus_B < 0.2);
  CHECK(!rep.pass(1e-7));
}

TEST_CASE("domain guard") {
  auto field = make_tokamak_field({1.0, 1.0});
  CHECK_THROWS_AS(field->eval_B(to_cartesian({1.96, 0.0, 0.0})), DomainError);
  CHECK_THROWS_AS(field->eval_B(to_cartesian({1.0, 0.0, 0.96})), DomainError);
  CHECK(field->in_domain(to_cartesian({1.5, 1.0, 0.3})));
}

TEST_CASE("u is the azimuthal field") {
  auto field = make_tokamak_field({1.0, 1.0});
  Vec3 p = to_cartesian({1.4, 0.8, 0.2});
  Vec3 u = field->eval_u(p);
  CHECK(norm(u) == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(dot(u, unit_phi(0.8)) == doctest::Approx(1.4).epsilon(1e-14));
}

TEST_CASE("grad psi is analytic and matches finite differences") {
  TokamakCircularParams params{1.0, 1.0, 0.0, 2, 1};
  TokamakField field(params);
  Vec3 p = to_cartesian({1.3, 0.5, -0.2});
  Vec3 g = field.eval_grad_psi(p);
  Vec3 g_fd = field.FieldModel::eval_grad_psi(p, 1e-6);
  CHECK(norm(g - g_fd) < 1e-9);
}

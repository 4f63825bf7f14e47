// Magnetic-field abstraction: pointwise evaluation of B, and optionally a
// vector potential A, a flux label psi, and a commuting symmetry field u.
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "fluxvol/geometry.hpp"

namespace fluxvol {

// Running evaluation counts, shared by copies of a field handle. Used by the
// benchmark reports to compare method costs.
struct EvalCounters {
  std::atomic<std::uint64_t> n_B{0};
  std::atomic<std::uint64_t> n_A{0};
  std::atomic<std::uint64_t> n_psi{0};
  std::atomic<std::uint64_t> n_u{0};
  void reset() { n_B = 0; n_A = 0; n_psi = 0; n_u = 0; }
};

// Abstract field model. Evaluation is pure and reentrant: const methods with
// no mutable state beyond the atomic counters, safe to call from any number
// of workers concurrently.
class FieldModel {
 public:
  FieldModel() : counters_(std::make_shared<EvalCounters>()) {}
  virtual ~FieldModel() = default;

  Vec3 eval_B(const Vec3& x) const {
    counters_->n_B.fetch_add(1, std::memory_order_relaxed);
    return B_impl(x);
  }
  Vec3 eval_A(const Vec3& x) const {
    if (!has_vector_potential()) throw CapabilityError("field has no vector potential");
    counters_->n_A.fetch_add(1, std::memory_order_relaxed);
    return A_impl(x);
  }
  double eval_psi(const Vec3& x) const {
    if (!has_flux_label()) throw CapabilityError("field has no flux label");
    counters_->n_psi.fetch_add(1, std::memory_order_relaxed);
    return psi_impl(x);
  }
  Vec3 eval_u(const Vec3& x) const {
    if (!has_symmetry_field()) throw CapabilityError("field has no symmetry field");
    counters_->n_u.fetch_add(1, std::memory_order_relaxed);
    return u_impl(x);
  }
  // Gradient of the flux label; central differences unless overridden.
  virtual Vec3 eval_grad_psi(const Vec3& x, double h = 1e-6) const;

  virtual bool has_vector_potential() const { return false; }
  virtual bool has_flux_label() const { return false; }
  virtual bool has_symmetry_field() const { return false; }

  virtual bool in_domain(const Vec3& x) const = 0;
  virtual std::string name() const = 0;

  EvalCounters& counters() const { return *counters_; }

 protected:
  virtual Vec3 B_impl(const Vec3& x) const = 0;
  virtual Vec3 A_impl(const Vec3&) const { throw CapabilityError("no vector potential"); }
  virtual double psi_impl(const Vec3&) const { throw CapabilityError("no flux label"); }
  virtual Vec3 u_impl(const Vec3&) const { throw CapabilityError("no symmetry field"); }

 private:
  std::shared_ptr<EvalCounters> counters_;
};

// Finite-difference verification of the field identities: div B = 0,
// curl A = B, B . grad psi = 0, [u, B] = 0, sampled at seeded random points.
struct ConsistencyReport {
  int n_samples = 0;
  double h = 0.0;
  double max_div_B = 0.0;          // |div B| / |B|, relative
  double max_curl_A_minus_B = -1.0;  // |curl A - B| / |B|; -1 when A absent
  double max_B_dot_grad_psi = -1.0;  // |B . grad psi| / (|B| |grad psi|); -1 when psi absent
  double max_commutator_uB = -1.0;   // |[u,B]| / (|u| |B| / L); -1 when u absent

  bool pass(double tolerance) const {
    if (max_div_B > tolerance) return false;
    if (max_curl_A_minus_B >= 0.0 && max_curl_A_minus_B > tolerance) return false;
    if (max_B_dot_grad_psi >= 0.0 && max_B_dot_grad_psi > tolerance) return false;
    if (max_commutator_uB >= 0.0 && max_commutator_uB > tolerance) return false;
    return true;
  }
};

ConsistencyReport check_field_consistency(const FieldModel& field, int n_samples, double h,
                                          std::uint64_t seed);

// Central-difference differential operators, exposed for tests.
Vec3 fd_curl(const FieldModel& field, bool of_A, const Vec3& x, double h);
double fd_div_B(const FieldModel& field, const Vec3& x, double h);
Vec3 fd_commutator_uB(const FieldModel& field, const Vec3& x, double h);

}  // namespace fluxvol

// Field-line tracing: adaptive Dormand-Prince 5(4) with dense output,
// transverse-section crossing detection, and the return-map axis finder.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fluxvol/field.hpp"
#include "fluxvol/geometry.hpp"

namespace fluxvol {

struct TraceOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 1e-3;
  double max_step = 0.5;
  std::uint64_t max_steps = 50'000'000;
  // Largest angular advance (toroidal or poloidal) allowed per step, so that
  // section crossings are bracketed by consecutive step endpoints.
  double max_angle_per_step = 0.45;
  bool store_points = true;
};

enum class TraceStatus { Ok, DomainExit, StepUnderflow, MaxSteps };

// Where an orbit pierced a section, refined on the dense output.
struct CrossingEvent {
  double t = 0.0;
  Vec3 point;
  int direction = 0;          // sign of d(section fn)/dt at the crossing
  bool transverse = true;     // false when the derivative was below threshold
  double phi_unwrapped = 0.0;    // toroidal angle, continuous along the orbit
  double theta_unwrapped = 0.0;  // poloidal angle about the section center, continuous
  double section_residual = 0.0;
};

// Transverse section. Plane kind: the half-plane phi = phi0. PoloidalAngle
// kind: the surface theta = theta0 about the center circle (R_center, Z_center);
// crossing it on an invariant torus realizes the return to a curve on the
// surface, with the other angle as curve coordinate.
struct SectionSpec {
  enum class Kind { PlanePhi, PoloidalAngle } kind = Kind::PlanePhi;
  double phi0 = 0.0;
  double theta0 = 0.0;
  double R_center = 1.0;
  double Z_center = 0.0;

  static SectionSpec plane_phi(double phi0_) {
    SectionSpec s;
    s.kind = Kind::PlanePhi;
    s.phi0 = phi0_;
    return s;
  }
  static SectionSpec poloidal_angle(double theta0_, double R_center_, double Z_center_ = 0.0) {
    SectionSpec s;
    s.kind = Kind::PoloidalAngle;
    s.theta0 = theta0_;
    s.R_center = R_center_;
    s.Z_center = Z_center_;
    return s;
  }
};

struct OrbitSegment {
  std::vector<double> times;
  std::vector<Vec3> points;
  std::vector<CrossingEvent> crossings;
  TraceStatus status = TraceStatus::Ok;
  double t_end_requested = 0.0;
  double t_reached = 0.0;
};

// Integrate the field-line flow dx/dt = B(x) from start for t in [0, t_end]
// (t_end < 0 integrates backwards). When a section is given, crossings are
// detected live against the dense output, both directions recorded; tracing
// stops early once max_crossings have been found (0 = unlimited).
OrbitSegment trace(const FieldModel& field, const Vec3& start, double t_end,
                   const TraceOptions& opts = {},
                   const SectionSpec* section = nullptr, std::size_t max_crossings = 0);

// Trace until max_count crossings of the section (or the time budget runs
// out) and return just the crossing events.
std::vector<CrossingEvent> find_crossings(const FieldModel& field, const Vec3& start,
                                          const SectionSpec& section, std::size_t max_count,
                                          double t_budget = 1e6, const TraceOptions& opts = {});

// Newton iteration on the section return map to locate the closed field line.
struct AxisResult {
  Vec3 point;
  double return_time = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // |return(x) - x| at the last iterate
};

AxisResult find_magnetic_axis(const FieldModel& field, const Vec3& guess,
                              const SectionSpec& section, const TraceOptions& opts = {},
                              int max_iterations = 50, double tol = 1e-10);

// Flow of a generic vector field with the same integrator (used for the
// symmetry-field flows). Returns the endpoint.
Vec3 flow_vector_field(const std::function<Vec3(const Vec3&)>& f, const Vec3& start, double t,
                       const TraceOptions& opts = {});

}  // namespace fluxvol

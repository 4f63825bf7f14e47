// Enclosed-volume methods for flux surfaces: the section integral of the
// return time, profile integrations of dV/dlabel (symmetric, lattice, and
// general mean-return-time forms), the Stokes surface integral, the
// boundary-integral reduction of the section integral, and a Monte-Carlo
// oracle.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fluxvol/field.hpp"
#include "fluxvol/fluxes.hpp"
#include "fluxvol/parallel.hpp"
#include "fluxvol/tracer.hpp"

namespace fluxvol {

// Tabulated V(label) along a nested family of surfaces.
struct VolumeProfile {
  std::vector<double> labels;
  std::vector<double> V;
  std::vector<double> dV_dlabel;
  std::vector<double> error_estimate;
  std::string method;
  double reference_label = 0.0;
  double reference_volume = 0.0;

  double total() const { return V.empty() ? 0.0 : V.back(); }
};

// Double-periodic embedding sampled on an N x M grid; grid(i, j) is the point
// at (theta1, theta2) = (i/N, j/M).
struct SurfaceMesh {
  int N = 0, M = 0;
  std::vector<Vec3> pts;  // row-major, index i * M + j

  const Vec3& at(int i, int j) const { return pts[static_cast<std::size_t>(i) * M + j]; }
  Vec3& at(int i, int j) { return pts[static_cast<std::size_t>(i) * M + j]; }

  static SurfaceMesh sample(const std::function<Vec3(double, double)>& embedding, int N, int M);
  // smallest cross-product norm of the two tangents over the grid
  double min_jacobian() const;
};

// An invariant torus located from a seed: label, estimated winding, and
// diagnostics from the locating trace.
struct SurfaceHandle {
  Vec3 seed;
  double label = 0.0;  // psi or minor radius
  double iota = 0.0;
  double iota_error = 0.0;
  double psi_drift = 0.0;
};

// ---- Section integral of T beta (the baseline; also the cross-method oracle)

struct SectionDiskSpec {
  double phi0 = 0.0;
  double R_center = 1.0;   // contraction/polar center in the section plane
  double Z_center = 0.0;
  double radius = 0.5;     // disk boundary on the target surface
};

struct SectionVolumeResult {
  double V = 0.0;
  double error_estimate = 0.0;
  int n_flagged = 0;  // nodes whose return exceeded the time budget
};

struct SectionVolumeOptions {
  int n_radial = 64;
  int n_angular = 64;
  TraceOptions trace;
  double time_budget = 1e4;
  bool coarse_error_pass = true;  // re-run at half resolution for the error proxy
};

SectionVolumeResult volume_eq1_section(const FieldModel& field, const SectionDiskSpec& disk,
                                       const SectionVolumeOptions& opts = {});

// ---- Profile methods: 1D integration of dV/dlabel from the axis (V = 0)

struct ProfileOptions {
  double anchor_label = 0.0;
  // integrand value at the anchor; extrapolated from the first two grid
  // points when absent
  std::optional<double> anchor_integrand;
};

// dV/dpsi = tau(psi) T(psi) with caller-supplied period and return-time maps.
VolumeProfile volume_profile_quasisym(const std::vector<double>& psi_grid,
                                      const std::function<double(double)>& tau_fn,
                                      const std::function<double(double)>& T_fn,
                                      const ProfileOptions& opts = {});

// dV/dpsi = Delta(psi) from the period lattice at each surface.
VolumeProfile volume_profile_lattice(const FieldModel& field, const std::vector<double>& psi_grid,
                                     const std::function<Vec3(double)>& seed_fn,
                                     const TraceOptions& trace_opts = {},
                                     const ProfileOptions& opts = {});

// dV/dlabel = T_bar * dPhi/dlabel: mean return time from one orbit segment
// times the flux derivative through the homologue field of the label.
struct GeneralProfileOptions {
  std::size_t n_returns = 200;   // per-surface floor; raised until covered
  std::size_t max_returns = 8000;
  double max_label_gap = 0.02;   // coverage target for the trapezoid labels
  TraceOptions trace;
  SectionSpec section = SectionSpec::plane_phi(0.0);
  std::function<double(const Vec3&)> label_fn;  // required: the label function
  int n_quad_loop = 256;
  double psi_drift_tol = 1e-6;  // surface-existence diagnostic
  ProfileOptions profile;
};

struct GeneralProfileResult {
  VolumeProfile profile;
  std::vector<SurfaceHandle> surfaces;
  std::vector<std::size_t> skipped;  // grid indices skipped (rational winding)
};

GeneralProfileResult volume_profile_general(const FieldModel& field,
                                            const std::vector<double>& label_grid,
                                            const std::function<Vec3(double)>& seed_fn,
                                            const std::function<LoopSpec(double)>& loop_family,
                                            const GeneralProfileOptions& opts);

// ---- Stokes surface integral of the primitive x dy ^ dz (or cyclic)

// axis: 0 -> x dy^dz, 1 -> y dz^dx, 2 -> z dx^dy. Signed value; the volume is
// its absolute value.
double volume_stokes_surface_signed(const SurfaceMesh& mesh, int axis = 0);
double volume_stokes_surface(const SurfaceMesh& mesh, int axis = 0);

// ---- Boundary-integral form of the section integral

// Generic core: boundary node j sits at w_j (coordinates relative to the
// contraction center) with tangent xi_j = dw/dlambda; density(j, s) is the
// section 2-form density at the contracted point center + s * w_j. Computes
// the loop integral of eta(xi) = cross(w, xi) * int s * density ds.
struct PoincareBoundaryOptions {
  int n_boundary = 64;
  int n_ray_samples = 33;
  double quad_tol = 1e-9;
  double t_cut = 30.0;  // lower cutoff exp(-t_cut) of the contraction variable
  TraceOptions trace;
  double time_budget = 1e4;
};

double poincare_boundary_integral(
    const std::vector<std::pair<double, double>>& boundary_nodes,
    const std::vector<std::pair<double, double>>& boundary_tangents,
    const std::function<double(std::size_t, double)>& density, double quad_tol, double s_min);

// Field version: circular boundary of the given radius about the contraction
// center in the plane phi0. The return-time field is precomputed on radial
// rays (traced) and cubic-interpolated along each ray.
SectionVolumeResult volume_poincare_boundary(const FieldModel& field, const SectionDiskSpec& disk,
                                             const PoincareBoundaryOptions& opts = {});

// ---- Monte-Carlo oracle

struct Box3 {
  Vec3 lo, hi;
  double volume() const { return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z); }
};

struct MonteCarloResult {
  double V = 0.0;
  double ci_half_width = 0.0;  // binomial 95% confidence interval
  std::uint64_t n_inside = 0;
  std::uint64_t n_samples = 0;
};

MonteCarloResult volume_monte_carlo(const std::function<bool(const Vec3&)>& inside, const Box3& bbox,
                                    std::uint64_t n_samples, std::uint64_t seed);

// Inside tests for the two supported presentations.
std::function<bool(const Vec3&)> inside_by_psi(const FieldModel& field, double psi_max);

class MeshInsideTester {
 public:
  explicit MeshInsideTester(const SurfaceMesh& mesh, int bins = 64);
  bool operator()(const Vec3& p) const;
  Box3 bbox() const { return bbox_; }

 private:
  struct Tri {
    Vec3 a, b, c;
  };
  std::vector<Tri> tris_;
  std::vector<std::vector<std::uint32_t>> grid_;
  int bins_;
  Box3 bbox_;
  double x0_, y0_, dx_, dy_;
};

// First-return time to the plane phi = phi0 starting from a point on it.
// Returns nullopt when the budget is exhausted.
std::optional<double> section_return_time(const FieldModel& field, const Vec3& start,
                                          double phi0, const TraceOptions& opts,
                                          double time_budget);

}  // namespace fluxvol

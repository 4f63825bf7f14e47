#include "fluxvol/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "fluxvol/diagnostics.hpp"
#include "fluxvol/quadrature.hpp"
#include "fluxvol/symmetry.hpp"

namespace fluxvol {

SurfaceMesh SurfaceMesh::sample(const std::function<Vec3(double, double)>& embedding, int N,
                                int M) {
  SurfaceMesh mesh;
  mesh.N = N;
  mesh.M = M;
  mesh.pts.resize(static_cast<std::size_t>(N) * M);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j)
      mesh.at(i, j) = embedding(static_cast<double>(i) / N, static_cast<double>(j) / M);
  return mesh;
}

namespace {

// trigonometric differentiation of one periodic line of samples (period 1)
void spectral_deriv_line(const double* f, double* df, int n, int stride) {
  // d_jk = 2*pi * (-1)^(j-k) * 0.5 * cot(pi (j-k) / n), exact for trig
  // polynomials below the Nyquist mode
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      int d = j - k;
      double sign = (d & 1) ? -1.0 : 1.0;
      s += sign * 0.5 / std::tan(kPi * d / n) * f[k * stride];
    }
    df[j * stride] = kTwoPi * s;
  }
}

struct MeshDerivs {
  std::vector<Vec3> d1, d2;  // tangents along theta1 and theta2
};

MeshDerivs mesh_spectral_derivs(const SurfaceMesh& mesh) {
  MeshDerivs out;
  const int N = mesh.N, M = mesh.M;
  out.d1.resize(mesh.pts.size());
  out.d2.resize(mesh.pts.size());
  std::vector<double> line(std::max(N, M)), dline(std::max(N, M));
  for (int comp = 0; comp < 3; ++comp) {
    auto get = [&](const Vec3& v) { return comp == 0 ? v.x : (comp == 1 ? v.y : v.z); };
    auto set = [&](Vec3& v, double val) {
      (comp == 0 ? v.x : (comp == 1 ? v.y : v.z)) = val;
    };
    for (int j = 0; j < M; ++j) {  // derivative along theta1 (vary i)
      for (int i = 0; i < N; ++i) line[i] = get(mesh.at(i, j));
      spectral_deriv_line(line.data(), dline.data(), N, 1);
      for (int i = 0; i < N; ++i) set(out.d1[static_cast<std::size_t>(i) * M + j], dline[i]);
    }
    for (int i = 0; i < N; ++i) {  // derivative along theta2 (vary j)
      for (int j = 0; j < M; ++j) line[j] = get(mesh.at(i, j));
      spectral_deriv_line(line.data(), dline.data(), M, 1);
      for (int j = 0; j < M; ++j) set(out.d2[static_cast<std::size_t>(i) * M + j], dline[j]);
    }
  }
  return out;
}

}  // namespace

double SurfaceMesh::min_jacobian() const {
  MeshDerivs d = mesh_spectral_derivs(*this);
  double mn = std::numeric_limits<double>::max();
  for (std::size_t k = 0; k < pts.size(); ++k) mn = std::min(mn, norm(cross(d.d1[k], d.d2[k])));
  return mn;
}

std::optional<double> section_return_time(const FieldModel& field, const Vec3& start, double phi0,
                                          const TraceOptions& opts, double time_budget) {
  SectionSpec sec = SectionSpec::plane_phi(phi0);
  TraceOptions o = opts;
  o.store_points = false;
  OrbitSegment orbit = trace(field, start, time_budget, o, &sec, 1);
  for (const auto& ev : orbit.crossings)
    if (ev.transverse) return ev.t;
  return std::nullopt;
}

SectionVolumeResult volume_eq1_section(const FieldModel& field, const SectionDiskSpec& disk,
                                       const SectionVolumeOptions& opts) {
  SectionVolumeResult res;

  auto run_pass = [&](int ns, int na, int* flagged) -> double {
    GaussLegendre gl = gauss_legendre(ns, 0.0, disk.radius);
    const std::size_t n_nodes = static_cast<std::size_t>(ns) * na;
    // integrand T * B_phi * s on the (s, alpha) polar grid; each node is an
    // independent trace, mapped in parallel and reduced in fixed order
    std::vector<double> vals = parallel_map_indexed<double>(n_nodes, [&](std::size_t idx) {
      int i = static_cast<int>(idx) / na;
      int j = static_cast<int>(idx) % na;
      double s = gl.nodes[i];
      double alpha = kTwoPi * j / na;
      CylPoint cp{disk.R_center + s * std::cos(alpha), disk.phi0,
                  disk.Z_center + s * std::sin(alpha)};
      Vec3 p = to_cartesian(cp);
      auto T = section_return_time(field, p, disk.phi0, opts.trace, opts.time_budget);
      if (!T) return std::numeric_limits<double>::quiet_NaN();
      Vec3 B = field.eval_B(p);
      double Bphi = (p.x * B.y - p.y * B.x) / cp.R;
      return gl.weights[i] * (kTwoPi / na) * (*T) * Bphi * s;
    });
    // degrade flagged nodes to the mean of their radial ring
    int nflag = 0;
    for (int i = 0; i < ns; ++i) {
      double ring_sum = 0.0;
      int ring_n = 0;
      for (int j = 0; j < na; ++j) {
        double v = vals[static_cast<std::size_t>(i) * na + j];
        if (!std::isnan(v)) {
          ring_sum += v;
          ++ring_n;
        }
      }
      for (int j = 0; j < na; ++j) {
        double& v = vals[static_cast<std::size_t>(i) * na + j];
        if (std::isnan(v)) {
          ++nflag;
          v = ring_n > 0 ? ring_sum / ring_n : 0.0;
        }
      }
    }
    if (nflag > 0)
      std::fprintf(stderr, "warning: volume_eq1_section: %d node(s) exceeded the time budget\n",
                   nflag);
    if (flagged) *flagged = nflag;
    return std::fabs(ordered_sum(vals));
  };

  res.V = run_pass(opts.n_radial, opts.n_angular, &res.n_flagged);
  if (opts.coarse_error_pass) {
    double coarse = run_pass(std::max(4, opts.n_radial / 2), std::max(4, opts.n_angular / 2),
                             nullptr);
    res.error_estimate = std::fabs(res.V - coarse);
  }
  return res;
}

namespace {

VolumeProfile integrate_profile(std::vector<double> labels, std::vector<double> integrand,
                                const std::string& method, const ProfileOptions& opts) {
  if (labels.size() != integrand.size() || labels.empty())
    throw std::invalid_argument("integrate_profile: bad grid");
  // prepend the anchor when the grid does not start there
  if (labels.front() > opts.anchor_label) {
    double f0;
    if (opts.anchor_integrand) {
      f0 = *opts.anchor_integrand;
    } else if (labels.size() >= 2) {
      // linear extrapolation to the anchor
      double x0 = labels[0], x1 = labels[1];
      f0 = integrand[0] + (integrand[1] - integrand[0]) * (opts.anchor_label - x0) / (x1 - x0);
    } else {
      f0 = integrand[0];
    }
    labels.insert(labels.begin(), opts.anchor_label);
    integrand.insert(integrand.begin(), f0);
  }
  CumulativeIntegral ci = cumulative_integral(labels, integrand);
  VolumeProfile prof;
  prof.labels = std::move(labels);
  prof.dV_dlabel = std::move(integrand);
  prof.V = std::move(ci.values);
  prof.error_estimate = std::move(ci.error_estimate);
  prof.method = method;
  prof.reference_label = opts.anchor_label;
  prof.reference_volume = 0.0;
  return prof;
}

}  // namespace

VolumeProfile volume_profile_quasisym(const std::vector<double>& psi_grid,
                                      const std::function<double(double)>& tau_fn,
                                      const std::function<double(double)>& T_fn,
                                      const ProfileOptions& opts) {
  std::vector<double> labels, f;
  std::vector<double> grid = psi_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> vals = parallel_map_indexed<double>(grid.size(), [&](std::size_t i) {
    return tau_fn(grid[i]) * T_fn(grid[i]);
  });
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] <= opts.anchor_label) continue;
    labels.push_back(grid[i]);
    f.push_back(vals[i]);
  }
  return integrate_profile(std::move(labels), std::move(f), "quasisym", opts);
}

VolumeProfile volume_profile_lattice(const FieldModel& field, const std::vector<double>& psi_grid,
                                     const std::function<Vec3(double)>& seed_fn,
                                     const TraceOptions& trace_opts, const ProfileOptions& opts) {
  std::vector<double> grid = psi_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> labels;
  for (double psi : grid)
    if (psi > opts.anchor_label) labels.push_back(psi);

  ActionFlow action;
  action.field = &field;
  action.opts = trace_opts;
  std::vector<double> f = parallel_map_indexed<double>(labels.size(), [&](std::size_t i) {
    LatticeBasis basis = find_lattice_generators(action, seed_fn(labels[i]));
    return basis.Delta;
  });
  return integrate_profile(std::move(labels), std::move(f), "lattice", opts);
}

GeneralProfileResult volume_profile_general(const FieldModel& field,
                                            const std::vector<double>& label_grid,
                                            const std::function<Vec3(double)>& seed_fn,
                                            const std::function<LoopSpec(double)>& loop_family,
                                            const GeneralProfileOptions& opts) {
  if (!opts.label_fn)
    throw std::invalid_argument("volume_profile_general: label_fn is required");
  GeneralProfileResult out;
  std::vector<double> grid = label_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> labels;
  for (double L : grid)
    if (L > opts.profile.anchor_label) labels.push_back(L);

  auto Y = homologue_from_label(opts.label_fn);

  struct PerSurface {
    double integrand = 0.0;
    SurfaceHandle handle;
    bool rational = false;
  };
  std::vector<PerSurface> rows = parallel_map_indexed<PerSurface>(
      labels.size(), [&](std::size_t i) {
        PerSurface row;
        double L = labels[i];
        Vec3 seed = seed_fn(L);
        row.handle.seed = seed;
        row.handle.label = L;
        SurfaceReturnMeasurement m;
        try {
          m = measure_surface_returns(field, seed, opts.section, opts.n_returns,
                                      opts.max_returns, opts.max_label_gap, opts.trace);
        } catch (const RationalWindingError&) {
          row.rational = true;
          return row;
        }
        row.handle.psi_drift = m.psi_drift;
        row.handle.iota = m.iota.iota;
        row.handle.iota_error = m.iota.error_estimate;
        if (field.has_flux_label() && m.psi_drift > opts.psi_drift_tol)
          throw ConvergenceError("volume_profile_general: orbit is not surface-like at label " +
                                 std::to_string(L));
        FluxDerivative d = flux_derivative(field, loop_family(L), Y, opts.n_quad_loop);
        row.integrand = m.mean_return.T_bar * std::fabs(d.dPhi);
        return row;
      });

  std::vector<double> keep_labels, keep_f;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rational) {
      std::fprintf(stderr,
                   "warning: volume_profile_general: rational winding at label %g, skipped\n",
                   labels[i]);
      out.skipped.push_back(i);
      continue;
    }
    keep_labels.push_back(labels[i]);
    keep_f.push_back(rows[i].integrand);
    out.surfaces.push_back(rows[i].handle);
  }
  out.profile =
      integrate_profile(std::move(keep_labels), std::move(keep_f), "general", opts.profile);
  return out;
}

double volume_stokes_surface_signed(const SurfaceMesh& mesh, int axis) {
  if (mesh.N < 4 || mesh.M < 4) throw std::invalid_argument("volume_stokes_surface: mesh too small");
  MeshDerivs d = mesh_spectral_derivs(mesh);
  // primitive x dy^dz (axis 0) or cyclic permutations
  auto comp = [&](const Vec3& v, int c) { return c == 0 ? v.x : (c == 1 ? v.y : v.z); };
  int c0 = axis % 3, c1 = (axis + 1) % 3, c2 = (axis + 2) % 3;
  double sum = 0.0;
  std::size_t n_deg = 0;
  for (std::size_t k = 0; k < mesh.pts.size(); ++k) {
    double jac = comp(d.d1[k], c1) * comp(d.d2[k], c2) - comp(d.d2[k], c1) * comp(d.d1[k], c2);
    if (norm(cross(d.d1[k], d.d2[k])) < 1e-14) ++n_deg;
    sum += comp(mesh.pts[k], c0) * jac;
  }
  if (n_deg > 0)
    throw std::invalid_argument("volume_stokes_surface: degenerate Jacobian node(s) in mesh");
  return sum / static_cast<double>(mesh.pts.size());
}

double volume_stokes_surface(const SurfaceMesh& mesh, int axis) {
  return std::fabs(volume_stokes_surface_signed(mesh, axis));
}

double poincare_boundary_integral(
    const std::vector<std::pair<double, double>>& boundary_nodes,
    const std::vector<std::pair<double, double>>& boundary_tangents,
    const std::function<double(std::size_t, double)>& density, double quad_tol, double s_min) {
  if (boundary_nodes.size() != boundary_tangents.size() || boundary_nodes.empty())
    throw std::invalid_argument("poincare_boundary_integral: bad boundary");
  const std::size_t n = boundary_nodes.size();
  std::vector<double> etas = parallel_map_indexed<double>(n, [&](std::size_t j) {
    auto [u, v] = boundary_nodes[j];
    auto [xu, xv] = boundary_tangents[j];
    double wedge = u * xv - v * xu;  // cross(w, xi) in the section plane
    if (wedge == 0.0) return 0.0;
    double integral = adaptive_simpson(
        [&](double s) { return s * density(j, s); }, s_min, 1.0, quad_tol);
    return wedge * integral;
  });
  return ordered_sum(etas) / static_cast<double>(n);
}

SectionVolumeResult volume_poincare_boundary(const FieldModel& field, const SectionDiskSpec& disk,
                                             const PoincareBoundaryOptions& opts) {
  const int nb = opts.n_boundary;
  const int nr = opts.n_ray_samples;
  if (nb < 4 || nr < 4) throw std::invalid_argument("volume_poincare_boundary: too few nodes");

  std::vector<std::pair<double, double>> nodes(nb), tangents(nb);
  for (int j = 0; j < nb; ++j) {
    double lam = kTwoPi * j / nb;
    nodes[j] = {disk.radius * std::cos(lam), disk.radius * std::sin(lam)};
    tangents[j] = {-kTwoPi * disk.radius * std::sin(lam), kTwoPi * disk.radius * std::cos(lam)};
  }

  // return time sampled along each contraction ray, then cubic-interpolated;
  // every (ray, sample) pair is an independent trace
  std::vector<double> s_nodes(nr);
  for (int k = 0; k < nr; ++k) s_nodes[k] = static_cast<double>(k) / (nr - 1);
  int n_flagged = 0;
  std::vector<double> Tsamples = parallel_map_indexed<double>(
      static_cast<std::size_t>(nb) * nr, [&](std::size_t idx) {
        int j = static_cast<int>(idx) / nr;
        int k = static_cast<int>(idx) % nr;
        double s = s_nodes[k];
        CylPoint cp{disk.R_center + s * nodes[j].first, disk.phi0,
                    disk.Z_center + s * nodes[j].second};
        auto T = section_return_time(field, to_cartesian(cp), disk.phi0, opts.trace,
                                     opts.time_budget);
        return T ? *T : std::numeric_limits<double>::quiet_NaN();
      });
  std::vector<CubicSpline> rays(nb);
  for (int j = 0; j < nb; ++j) {
    std::vector<double> Ts(Tsamples.begin() + static_cast<std::size_t>(j) * nr,
                           Tsamples.begin() + static_cast<std::size_t>(j + 1) * nr);
    for (int k = 0; k < nr; ++k) {
      if (std::isnan(Ts[k])) {
        ++n_flagged;
        // fall back to the neighboring sample on the ray
        Ts[k] = (k > 0) ? Ts[k - 1] : 0.0;
      }
    }
    rays[j] = CubicSpline(s_nodes, Ts);
  }
  if (n_flagged > 0)
    std::fprintf(stderr, "warning: volume_poincare_boundary: %d ray sample(s) failed\n",
                 n_flagged);

  auto density = [&](std::size_t j, double s) {
    CylPoint cp{disk.R_center + s * nodes[j].first, disk.phi0,
                disk.Z_center + s * nodes[j].second};
    Vec3 p = to_cartesian(cp);
    Vec3 B = field.eval_B(p);
    double Bphi = (p.x * B.y - p.y * B.x) / cp.R;
    return rays[j](s) * Bphi;
  };

  SectionVolumeResult res;
  double s_min = std::exp(-opts.t_cut);
  res.V = std::fabs(
      poincare_boundary_integral(nodes, tangents, density, opts.quad_tol, s_min));
  res.n_flagged = n_flagged;
  // error proxy: halve the boundary resolution, reusing every other ray
  std::vector<std::pair<double, double>> nodes2, tangents2;
  std::vector<std::size_t> idx2;
  for (int j = 0; j < nb; j += 2) {
    nodes2.push_back(nodes[j]);
    tangents2.push_back(tangents[j]);
    idx2.push_back(j);
  }
  auto density2 = [&](std::size_t j, double s) { return density(idx2[j], s); };
  double coarse = std::fabs(
      poincare_boundary_integral(nodes2, tangents2, density2, opts.quad_tol, s_min));
  res.error_estimate = std::fabs(res.V - coarse) + opts.quad_tol * nb;
  return res;
}

MonteCarloResult volume_monte_carlo(const std::function<bool(const Vec3&)>& inside,
                                    const Box3& bbox, std::uint64_t n_samples,
                                    std::uint64_t seed) {
  if (n_samples == 0) throw std::invalid_argument("volume_monte_carlo: n_samples must be > 0");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    // draw all three coordinates unconditionally to keep the stream aligned
    double x = bbox.lo.x + (bbox.hi.x - bbox.lo.x) * uniform();
    double y = bbox.lo.y + (bbox.hi.y - bbox.lo.y) * uniform();
    double z = bbox.lo.z + (bbox.hi.z - bbox.lo.z) * uniform();
    if (inside({x, y, z})) ++hits;
  }
  MonteCarloResult res;
  res.n_inside = hits;
  res.n_samples = n_samples;
  double p = static_cast<double>(hits) / static_cast<double>(n_samples);
  double vb = bbox.volume();
  res.V = p * vb;
  res.ci_half_width = 1.959963984540054 * vb *
                      std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n_samples));
  return res;
}

std::function<bool(const Vec3&)> inside_by_psi(const FieldModel& field, double psi_max) {
  return [&field, psi_max](const Vec3& p) {
    if (!field.in_domain(p)) return false;
    return field.eval_psi(p) <= psi_max;
  };
}

MeshInsideTester::MeshInsideTester(const SurfaceMesh& mesh, int bins) : bins_(bins) {
  // triangulate the periodic quad grid
  tris_.reserve(static_cast<std::size_t>(mesh.N) * mesh.M * 2);
  for (int i = 0; i < mesh.N; ++i) {
    int i1 = (i + 1) % mesh.N;
    for (int j = 0; j < mesh.M; ++j) {
      int j1 = (j + 1) % mesh.M;
      const Vec3 &a = mesh.at(i, j), &b = mesh.at(i1, j), &c = mesh.at(i1, j1),
                 &d = mesh.at(i, j1);
      tris_.push_back({a, b, c});
      tris_.push_back({a, c, d});
    }
  }
  bbox_.lo = bbox_.hi = tris_.front().a;
  for (const auto& t : tris_) {
    for (const Vec3* v : {&t.a, &t.b, &t.c}) {
      bbox_.lo.x = std::min(bbox_.lo.x, v->x);
      bbox_.lo.y = std::min(bbox_.lo.y, v->y);
      bbox_.lo.z = std::min(bbox_.lo.z, v->z);
      bbox_.hi.x = std::max(bbox_.hi.x, v->x);
      bbox_.hi.y = std::max(bbox_.hi.y, v->y);
      bbox_.hi.z = std::max(bbox_.hi.z, v->z);
    }
  }
  // expand slightly so boundary points bin safely
  double ex = 1e-9 + 1e-9 * (bbox_.hi.x - bbox_.lo.x);
  bbox_.lo.x -= ex; bbox_.lo.y -= ex; bbox_.lo.z -= ex;
  bbox_.hi.x += ex; bbox_.hi.y += ex; bbox_.hi.z += ex;
  x0_ = bbox_.lo.x;
  y0_ = bbox_.lo.y;
  dx_ = (bbox_.hi.x - bbox_.lo.x) / bins_;
  dy_ = (bbox_.hi.y - bbox_.lo.y) / bins_;
  grid_.resize(static_cast<std::size_t>(bins_) * bins_);
  for (std::uint32_t t = 0; t < tris_.size(); ++t) {
    const Tri& tr = tris_[t];
    double xmin = std::min({tr.a.x, tr.b.x, tr.c.x}), xmax = std::max({tr.a.x, tr.b.x, tr.c.x});
    double ymin = std::min({tr.a.y, tr.b.y, tr.c.y}), ymax = std::max({tr.a.y, tr.b.y, tr.c.y});
    int bx0 = std::clamp(static_cast<int>((xmin - x0_) / dx_), 0, bins_ - 1);
    int bx1 = std::clamp(static_cast<int>((xmax - x0_) / dx_), 0, bins_ - 1);
    int by0 = std::clamp(static_cast<int>((ymin - y0_) / dy_), 0, bins_ - 1);
    int by1 = std::clamp(static_cast<int>((ymax - y0_) / dy_), 0, bins_ - 1);
    for (int bx = bx0; bx <= bx1; ++bx)
      for (int by = by0; by <= by1; ++by)
        grid_[static_cast<std::size_t>(bx) * bins_ + by].push_back(t);
  }
}

bool MeshInsideTester::operator()(const Vec3& p) const {
  if (p.x < bbox_.lo.x || p.x > bbox_.hi.x || p.y < bbox_.lo.y || p.y > bbox_.hi.y ||
      p.z < bbox_.lo.z || p.z > bbox_.hi.z)
    return false;
  int bx = std::clamp(static_cast<int>((p.x - x0_) / dx_), 0, bins_ - 1);
  int by = std::clamp(static_cast<int>((p.y - y0_) / dy_), 0, bins_ - 1);
  // vertical ray along +z: parity of triangle crossings
  int count = 0;
  for (std::uint32_t t : grid_[static_cast<std::size_t>(bx) * bins_ + by]) {
    const Tri& tr = tris_[t];
    // solve p + s e_z = a + u (b - a) + v (c - a) in the (x, y) plane
    double ux = tr.b.x - tr.a.x, uy = tr.b.y - tr.a.y;
    double vx = tr.c.x - tr.a.x, vy = tr.c.y - tr.a.y;
    double det = ux * vy - uy * vx;
    if (std::fabs(det) < 1e-300) continue;
    double px = p.x - tr.a.x, py = p.y - tr.a.y;
    double u = (px * vy - py * vx) / det;
    double v = (ux * py - uy * px) / det;
    if (u < 0.0 || v < 0.0 || u + v >= 1.0) continue;
    double zhit = tr.a.z + u * (tr.b.z - tr.a.z) + v * (tr.c.z - tr.a.z);
    if (zhit > p.z) ++count;
  }
  return (count & 1) != 0;
}

}  // namespace fluxvol

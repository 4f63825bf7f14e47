#include "fluxvol/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "fluxvol/diagnostics.hpp"
#include "fluxvol/fluxes.hpp"
#include "fluxvol/symmetry.hpp"

namespace fluxvol {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void emit_plot_data(const VolumeProfile& profile, const std::string& out_path) {
  if (profile.labels.empty())
    throw std::invalid_argument("emit_plot_data: empty profile");
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("emit_plot_data: cannot open " + out_path);
  f << "label,V,dV_dlabel,err,method\n";
  for (std::size_t i = 0; i < profile.labels.size(); ++i)
    f << format_double(profile.labels[i]) << ',' << format_double(profile.V[i]) << ','
      << format_double(profile.dV_dlabel[i]) << ',' << format_double(profile.error_estimate[i])
      << ',' << profile.method << '\n';
}

void write_orbit_csv(const OrbitSegment& orbit, const FieldModel& field,
                     const std::string& out_path) {
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("write_orbit_csv: cannot open " + out_path);
  f << "t,x,y,z,R,phi,Z,psi\n";
  for (std::size_t i = 0; i < orbit.times.size(); ++i) {
    const Vec3& p = orbit.points[i];
    CylPoint c = to_cylindrical(p);
    double psi = field.has_flux_label() ? field.eval_psi(p)
                                        : std::numeric_limits<double>::quiet_NaN();
    f << format_double(orbit.times[i]) << ',' << format_double(p.x) << ',' << format_double(p.y)
      << ',' << format_double(p.z) << ',' << format_double(c.R) << ',' << format_double(c.phi)
      << ',' << format_double(c.Z) << ',' << format_double(psi) << '\n';
  }
}

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::vector<double> linspace_labels(double r_max, int n) {
  std::vector<double> out(n);
  for (int i = 1; i <= n; ++i) out[i - 1] = r_max * i / n;
  return out;
}

// Newton minimization of psi in the section plane. The return-map axis search
// localizes the fixed point only up to the local shear (for an integer axis
// winding the displacement is cubic in the distance), while the flux label,
// when present, pins the axis to machine precision.
Vec3 polish_axis_with_flux_label(const FieldModel& field, Vec3 p, double phi0) {
  if (!field.has_flux_label()) return p;
  CylPoint c = to_cylindrical(p);
  double R = c.R, Z = c.Z;
  const double h = 1e-5;
  auto psi_at = [&](double R_, double Z_) { return field.eval_psi(to_cartesian({R_, phi0, Z_})); };
  for (int it = 0; it < 40; ++it) {
    double gR = (psi_at(R + h, Z) - psi_at(R - h, Z)) / (2 * h);
    double gZ = (psi_at(R, Z + h) - psi_at(R, Z - h)) / (2 * h);
    double hRR = (psi_at(R + h, Z) - 2 * psi_at(R, Z) + psi_at(R - h, Z)) / (h * h);
    double hZZ = (psi_at(R, Z + h) - 2 * psi_at(R, Z) + psi_at(R, Z - h)) / (h * h);
    double hRZ = (psi_at(R + h, Z + h) - psi_at(R + h, Z - h) - psi_at(R - h, Z + h) +
                  psi_at(R - h, Z - h)) /
                 (4 * h * h);
    double det = hRR * hZZ - hRZ * hRZ;
    if (std::fabs(det) < 1e-14) break;
    double dR = (-gR * hZZ + gZ * hRZ) / det;
    double dZ = (-hRR * gZ + hRZ * gR) / det;
    R += dR;
    Z += dZ;
    if (std::hypot(dR, dZ) < 1e-12) break;
  }
  return to_cartesian({R, phi0, Z});
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& cfg, const std::string& out_dir, bool verbose) {
  ScenarioResult out;
  auto field_ptr = make_field(cfg);
  const FieldModel& field = *field_ptr;

  TraceOptions trace_opts;
  trace_opts.rtol = cfg.rtol;
  trace_opts.atol = cfg.atol;

  // locate the magnetic axis once; all methods anchor to it
  SectionSpec plane = SectionSpec::plane_phi(0.0);
  Vec3 axis_guess = to_cartesian({cfg.field_params.R0 + 0.25 * cfg.r_target, 0.0, 0.0});
  out.axis = find_magnetic_axis(field, axis_guess, plane, trace_opts);
  if (!out.axis.converged)
    throw ConvergenceError("run_scenario: magnetic axis search did not converge");
  out.axis.point = polish_axis_with_flux_label(field, out.axis.point, 0.0);
  CylPoint axis_c = to_cylindrical(out.axis.point);
  const double R_ax = axis_c.R, Z_ax = axis_c.Z;

  auto seed_at = [&](double r) { return to_cartesian({R_ax + r, 0.0, Z_ax}); };
  const double psi_target = field.eval_psi(seed_at(cfg.r_target));

  auto run_method = [&](const std::string& name) {
    MethodReport rep;
    rep.method = name;
    std::uint64_t evals0 = field.counters().n_B.load();
    Timer timer;
    try {
      if (name == "eq1") {
        SectionDiskSpec disk{0.0, R_ax, Z_ax, cfg.r_target};
        SectionVolumeOptions o;
        o.n_radial = cfg.grid_eq1;
        o.n_angular = cfg.grid_eq1;
        o.trace = trace_opts;
        o.time_budget = cfg.time_budget;
        SectionVolumeResult r = volume_eq1_section(field, disk, o);
        rep.V = r.V;
        rep.error_estimate = r.error_estimate;
        rep.ok = r.n_flagged == 0;
        if (r.n_flagged > 0) rep.note = "flagged nodes: " + std::to_string(r.n_flagged);
      } else if (name == "quasisym") {
        ActionFlow action{&field, trace_opts};
        std::vector<double> psi_grid;
        for (double r : linspace_labels(cfg.r_target, cfg.n_surfaces))
          psi_grid.push_back(field.eval_psi(seed_at(r)));
        auto seed_of_psi = [&](double psi) { return seed_at(std::sqrt(2.0 * psi)); };
        auto tau_fn = [&](double psi) { return u_line_period(action, seed_of_psi(psi)); };
        auto T_fn = [&](double psi) { return B_return_to_u_line(action, seed_of_psi(psi)); };
        VolumeProfile prof = volume_profile_quasisym(psi_grid, tau_fn, T_fn);
        rep.V = prof.total();
        rep.error_estimate = prof.error_estimate.back();
        rep.ok = std::is_sorted(prof.V.begin(), prof.V.end());
        out.profiles.push_back(std::move(prof));
      } else if (name == "lattice") {
        std::vector<double> psi_grid;
        for (double r : linspace_labels(cfg.r_target, cfg.n_surfaces))
          psi_grid.push_back(field.eval_psi(seed_at(r)));
        auto seed_of_psi = [&](double psi) { return seed_at(std::sqrt(2.0 * psi)); };
        VolumeProfile prof =
            volume_profile_lattice(field, psi_grid, seed_of_psi, trace_opts);
        rep.V = prof.total();
        rep.error_estimate = prof.error_estimate.back();
        rep.ok = std::is_sorted(prof.V.begin(), prof.V.end());
        out.profiles.push_back(std::move(prof));
      } else if (name == "general") {
        GeneralProfileOptions o;
        o.n_returns = static_cast<std::size_t>(cfg.n_returns);
        o.trace = trace_opts;
        o.section = SectionSpec::plane_phi(0.0);
        o.section.R_center = R_ax;
        o.section.Z_center = Z_ax;
        o.label_fn = [&](const Vec3& p) { return std::sqrt(2.0 * field.eval_psi(p)); };
        o.profile.anchor_integrand = 0.0;  // dPhi/dr vanishes at the axis
        auto loops = [&](double r) { return poloidal_circle(R_ax, r, 0.0, Z_ax); };
        GeneralProfileResult r = volume_profile_general(
            field, linspace_labels(cfg.r_target, cfg.n_surfaces), seed_at, loops, o);
        rep.V = r.profile.total();
        rep.error_estimate = r.profile.error_estimate.back();
        rep.ok = r.skipped.empty() && std::is_sorted(r.profile.V.begin(), r.profile.V.end());
        if (!r.skipped.empty())
          rep.note = "skipped rational surfaces: " + std::to_string(r.skipped.size());
        out.profiles.push_back(std::move(r.profile));
      } else if (name == "stokes") {
        // surface presented as an embedding: circular cross-section about the
        // located axis (exact for this field family)
        double r = cfg.r_target;
        SurfaceMesh mesh = SurfaceMesh::sample(
            [&](double t1, double t2) {
              return to_cartesian({R_ax + r * std::cos(kTwoPi * t2), kTwoPi * t1,
                                   Z_ax - r * std::sin(kTwoPi * t2)});
            },
            cfg.grid_stokes, cfg.grid_stokes);
        rep.V = volume_stokes_surface(mesh);
        // gauge spread across the cyclic primitives as the error proxy
        double v1 = volume_stokes_surface(mesh, 1), v2 = volume_stokes_surface(mesh, 2);
        rep.error_estimate = std::max(std::fabs(rep.V - v1), std::fabs(rep.V - v2));
        rep.ok = true;
      } else if (name == "poincare") {
        SectionDiskSpec disk{0.0, R_ax, Z_ax, cfg.r_target};
        PoincareBoundaryOptions o;
        o.n_boundary = cfg.n_boundary;
        o.n_ray_samples = cfg.n_ray_samples;
        o.trace = trace_opts;
        o.time_budget = cfg.time_budget;
        SectionVolumeResult r = volume_poincare_boundary(field, disk, o);
        rep.V = r.V;
        rep.error_estimate = r.error_estimate;
        rep.ok = r.n_flagged == 0;
      } else if (name == "mc") {
        double rb = 1.02 * (R_ax + cfg.r_target);
        double zb = Z_ax + 1.05 * cfg.r_target;
        Box3 box{{-rb, -rb, Z_ax - 1.05 * cfg.r_target}, {rb, rb, zb}};
        MonteCarloResult r =
            volume_monte_carlo(inside_by_psi(field, psi_target), box, cfg.mc_samples, cfg.seed);
        rep.V = r.V;
        rep.error_estimate = r.ci_half_width;
        rep.ok = true;
      } else {
        throw std::invalid_argument("unknown method: " + name);
      }
    } catch (const std::exception& ex) {
      rep.ok = false;
      rep.note = ex.what();
    }
    rep.wall_time_s = timer.elapsed();
    rep.field_evals = field.counters().n_B.load() - evals0;
    return rep;
  };

  for (const auto& m : cfg.methods) {
    if (verbose) std::fprintf(stderr, "running method %s...\n", m.c_str());
    out.reports.push_back(run_method(m));
  }
  out.all_ok = true;
  for (const auto& r : out.reports) out.all_ok = out.all_ok && r.ok;

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
      std::ofstream f(out_dir + "/results.csv");
      f << "method,V,err,field_evals\n";
      for (const auto& r : out.reports)
        f << r.method << ',' << format_double(r.V) << ',' << format_double(r.error_estimate)
          << ',' << r.field_evals << '\n';
    }
    {
      std::ofstream f(out_dir + "/timings.csv");
      f << "method,wall_time_s\n";
      for (const auto& r : out.reports) f << r.method << ',' << r.wall_time_s << '\n';
    }
    for (const auto& prof : out.profiles)
      emit_plot_data(prof, out_dir + "/profile_" + prof.method + ".csv");
    {
      nlohmann::json j;
      j["provenance"]["tool"] = kToolVersion;
      j["provenance"]["config_hash"] = config_hash(cfg.source_text);
      j["provenance"]["seed"] = cfg.seed;
      j["axis"]["R"] = R_ax;
      j["axis"]["Z"] = Z_ax;
      j["axis"]["return_time"] = out.axis.return_time;
      for (const auto& r : out.reports) {
        nlohmann::json jr;
        jr["method"] = r.method;
        jr["V"] = r.V;
        jr["err"] = r.error_estimate;
        jr["field_evals"] = r.field_evals;
        jr["ok"] = r.ok;
        if (!r.note.empty()) jr["note"] = r.note;
        j["methods"].push_back(jr);
      }
      std::ofstream f(out_dir + "/results.json");
      f << j.dump(2) << '\n';
    }
  }
  return out;
}

}  // namespace fluxvol

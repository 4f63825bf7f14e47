// fluxvol: volumes enclosed by magnetic flux surfaces, and the single-orbit
// diagnostics behind them. Batch front end over a TOML config.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluxvol/config.hpp"
#include "fluxvol/diagnostics.hpp"
#include "fluxvol/fluxes.hpp"
#include "fluxvol/parallel.hpp"
#include "fluxvol/percival.hpp"
#include "fluxvol/scenario.hpp"
#include "fluxvol/symmetry.hpp"
#include "fluxvol/tracer.hpp"
#include "fluxvol/volume.hpp"

namespace {

using namespace fluxvol;

Vec3 parse_point(const std::string& s) {
  double R, phi, Z;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &R, &phi, &Z) != 3)
    throw CLI::ValidationError("expected R,phi,Z");
  return to_cartesian({R, phi, Z});
}

void write_json(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << std::endl;
  } else {
    std::ofstream f(out_path);
    f << j.dump(2) << '\n';
  }
}

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  int workers = -1;  // -1: leave library default
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

RunConfig load(const GlobalArgs& g) {
  if (g.config_path.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

TraceOptions trace_opts_from(const RunConfig& cfg) {
  TraceOptions o;
  o.rtol = cfg.rtol;
  o.atol = cfg.atol;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volumes enclosed by magnetic flux surfaces"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "TOML run configuration")->envname("FLUXVOL_CONFIG");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--workers", g.workers, "worker threads (0 = serial reference)");
  app.add_option("--seed", g.seed, "override the scenario seed");
  app.add_flag("--verbose", g.verbose, "progress chatter on stderr");

  // trace
  auto* cmd_trace = app.add_subcommand("trace", "integrate a field line and write an orbit CSV");
  std::string start_str = "1.5,0,0";
  double t_end = 100.0;
  std::string orbit_out = "orbit.csv";
  cmd_trace->add_option("--start", start_str, "start point R,phi,Z");
  cmd_trace->add_option("--t-end", t_end, "integration time");
  cmd_trace->add_option("--out", orbit_out, "orbit CSV path");

  // iota / return-time
  auto* cmd_iota = app.add_subcommand("iota", "rotation number from closest returns");
  auto* cmd_rett = app.add_subcommand("return-time", "mean return time by the trapezoid rule");
  double diag_r = 0.5;
  int diag_n = 500;
  std::string diag_out;
  for (auto* c : {cmd_iota, cmd_rett}) {
    c->add_option("--r", diag_r, "surface minor radius (seed on the outboard midplane)");
    c->add_option("--n-returns", diag_n, "number of section returns");
    c->add_option("--out", diag_out, "JSON output path (default stdout)");
  }

  // lattice
  auto* cmd_lat = app.add_subcommand("lattice", "period lattice of the (u,B) action");
  std::string seed_str = "1.5,0,0";
  std::string lat_out;
  cmd_lat->add_option("--seed", seed_str, "seed point R,phi,Z");
  cmd_lat->add_option("--out", lat_out, "JSON output path (default stdout)");

  // flux
  auto* cmd_flux = app.add_subcommand("flux", "loop flux of the vector potential");
  std::string loop_kind = "poloidal";
  double flux_r = 0.5;
  std::string flux_out;
  cmd_flux->add_option("--loop", loop_kind, "poloidal | toroidal")
      ->check(CLI::IsMember({"poloidal", "toroidal"}));
  cmd_flux->add_option("--r", flux_r, "loop minor radius");
  cmd_flux->add_option("--out", flux_out, "JSON output path (default stdout)");

  // volume
  auto* cmd_vol = app.add_subcommand("volume", "enclosed volume by one method");
  std::string method = "general";
  std::string profile_out = "profile.csv";
  cmd_vol->add_option("--method", method, "eq1|quasisym|lattice|general|stokes|poincare|mc")
      ->check(CLI::IsMember({"eq1", "quasisym", "lattice", "general", "stokes", "poincare", "mc"}));
  cmd_vol->add_option("--out", profile_out, "profile CSV path (profile methods)");

  // percival
  auto* cmd_perc = app.add_subcommand("percival", "stationary torus embedding solve");
  std::string omega_str = "";
  int K = 16;
  std::string init_str = "circular:r=0.45";
  std::string perc_out;
  cmd_perc->add_option("--omega", omega_str, "frequency vector w1,w2 (default 1,iota(r_target))");
  cmd_perc->add_option("--K", K, "Fourier cutoff per angle");
  cmd_perc->add_option("--init", init_str, "initial guess, e.g. circular:r=0.45");
  cmd_perc->add_option("--out", perc_out, "JSON output path (default stdout)");

  // benchmark
  auto* cmd_bench = app.add_subcommand("benchmark", "run all configured methods and compare");

  CLI11_PARSE(app, argc, argv);

  try {
    if (g.workers >= 0) set_workers(g.workers);
    RunConfig cfg = load(g);
    auto field_ptr = make_field(cfg);
    const FieldModel& field = *field_ptr;
    TraceOptions topts = trace_opts_from(cfg);

    const double R0 = cfg.field_params.R0;

    if (cmd_trace->parsed()) {
      OrbitSegment orbit = trace(field, parse_point(start_str), t_end, topts);
      write_orbit_csv(orbit, field, orbit_out);
      if (orbit.status != TraceStatus::Ok) {
        std::fprintf(stderr, "trace truncated (status %d) at t = %g\n",
                     static_cast<int>(orbit.status), orbit.t_reached);
        return 1;
      }
      return 0;
    }

    if (cmd_iota->parsed() || cmd_rett->parsed()) {
      Vec3 start = to_cartesian({R0 + diag_r, 0.0, 0.0});
      SectionSpec sec = SectionSpec::plane_phi(0.0);
      sec.R_center = R0;
      ReturnSeriesBuild series =
          build_return_series(field, start, sec, static_cast<std::size_t>(diag_n), topts);
      IotaEstimate iota = estimate_iota_closest_returns(series.series);
      nlohmann::json j;
      j["iota"] = iota.iota;
      j["cf_digits"] = iota.cf_digits;
      j["error_estimates"]["iota"] = iota.error_estimate;
      if (cmd_rett->parsed()) {
        MeanReturnTime mrt = mean_return_time_trapezoid(series.series, iota.iota);
        j["T_bar"] = mrt.T_bar;
        j["error_estimates"]["T_bar"] = mrt.error_estimate;
      }
      write_json(j, diag_out);
      return 0;
    }

    if (cmd_lat->parsed()) {
      ActionFlow action{&field, topts};
      LatticeBasis basis = find_lattice_generators(action, parse_point(seed_str));
      nlohmann::json j;
      j["T1"] = {basis.T1.t_u, basis.T1.t_B};
      j["T2"] = {basis.T2.t_u, basis.T2.t_B};
      j["Delta"] = basis.Delta;
      if (auto form = classify_quasisymmetric_form(basis, 1e-7)) {
        j["classification"] = "quasisymmetric";
        j["tau"] = form->tau;
        j["T"] = form->T;
        j["c"] = form->c;
      } else {
        j["classification"] = "general";
      }
      write_json(j, lat_out);
      return 0;
    }

    if (cmd_flux->parsed()) {
      FluxValue v;
      if (loop_kind == "poloidal") {
        v = loop_flux(field, poloidal_circle(R0, flux_r, 0.0));
      } else {
        LoopSpec gamma = toroidal_circle(R0 + flux_r, 0.0);
        LoopSpec gamma0 = toroidal_circle(R0, 0.0);  // magnetic axis circle
        v = annulus_flux(field, gamma, gamma0);
      }
      nlohmann::json j;
      j["Phi"] = v.Phi;
      j["method"] = v.method;
      j["n_quad"] = v.n_quad;
      j["convergence"] = v.convergence;
      write_json(j, flux_out);
      return 0;
    }

    if (cmd_vol->parsed()) {
      RunConfig one = cfg;
      one.methods = {method};
      ScenarioResult res = run_scenario(one, g.out_dir, g.verbose);
      const MethodReport& rep = res.reports.front();
      if (!res.profiles.empty()) emit_plot_data(res.profiles.front(), profile_out);
      std::printf("%s V = %.10g err = %.3g field_evals = %llu\n", rep.method.c_str(), rep.V,
                  rep.error_estimate, static_cast<unsigned long long>(rep.field_evals));
      return rep.ok ? 0 : 1;
    }

    if (cmd_perc->parsed()) {
      double r_init = 0.45;
      if (std::sscanf(init_str.c_str(), "circular:r=%lf", &r_init) != 1)
        throw ConfigError("percival --init expects circular:r=<minor radius>");
      FrequencyVector omega;
      if (!omega_str.empty()) {
        double w1, w2;
        if (std::sscanf(omega_str.c_str(), "%lf,%lf", &w1, &w2) != 2)
          throw ConfigError("percival --omega expects w1,w2");
        omega = FrequencyVector(w1, w2);
      } else {
        // default: measured winding of the target surface
        Vec3 start = to_cartesian({R0 + cfg.r_target, 0.0, 0.0});
        SectionSpec sec = SectionSpec::plane_phi(0.0);
        sec.R_center = R0;
        auto series = build_return_series(field, start, sec, 400, topts);
        omega = FrequencyVector(1.0, estimate_iota_closest_returns(series.series).iota);
      }
      TorusEmbedding init = TorusEmbedding::circular_guess(R0, r_init, std::min(K, 4), K);
      SolveOptions sopts;
      sopts.N = std::max(16, 4 * std::min(K, 4) + 4);
      sopts.M = std::max(32, 4 * K);
      SolveResult sol = solve_stationary(field, omega, init, sopts);
      nlohmann::json j;
      j["P"] = sol.result.P;
      j["residual"] = sol.result.residual;
      j["c_bar"] = sol.result.c_bar;
      j["converged"] = sol.converged;
      j["iterations"] = sol.iterations;
      auto exact = [&](const FrequencyVector&) { return sol.x; };
      auto [phi1, phi2] = flux_from_dP_domega(field, exact, omega, 1e-3, sopts.N, sopts.M);
      j["fluxes"] = {phi1, phi2};
      write_json(j, perc_out);
      return sol.converged ? 0 : 1;
    }

    if (cmd_bench->parsed()) {
      ScenarioResult res = run_scenario(cfg, g.out_dir, g.verbose);
      std::printf("%-10s %14s %12s %12s %14s\n", "method", "V", "err", "wall[s]", "field_evals");
      for (const auto& r : res.reports)
        std::printf("%-10s %14.8f %12.3e %12.3f %14llu %s\n", r.method.c_str(), r.V,
                    r.error_estimate, r.wall_time_s,
                    static_cast<unsigned long long>(r.field_evals), r.ok ? "" : "FAILED");
      return res.all_ok ? 0 : 1;
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 0;
}

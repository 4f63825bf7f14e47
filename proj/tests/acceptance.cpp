// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any fail. Reference values come from the closed forms of the
// circular tokamak benchmark (see analytic_oracles.hpp) and from
// cross-method identities.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "analytic_oracles.hpp"
#include "fluxvol/config.hpp"
#include "fluxvol/diagnostics.hpp"
#include "fluxvol/fluxes.hpp"
#include "fluxvol/percival.hpp"
#include "fluxvol/scenario.hpp"
#include "fluxvol/symmetry.hpp"
#include "fluxvol/tokamak.hpp"
#include "fluxvol/tracer.hpp"
#include "fluxvol/volume.hpp"

using namespace fluxvol;

namespace {

const oracles::Tokamak tok{};
int g_failures = 0;

void report(int id, const char* label, bool pass, const std::string& detail) {
  std::printf("criterion %d [%s]: %s  (%s)\n", id, label, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

TraceOptions tol(double rtol, double atol) {
  TraceOptions o;
  o.rtol = rtol;
  o.atol = atol;
  return o;
}

ReturnSeries rigid_rotation(double iota, std::size_t N) {
  ReturnSeries s;
  for (std::size_t n = 1; n <= N; ++n) {
    double p = static_cast<double>(n) * iota;
    s.phis.push_back(p - std::floor(p));
    s.Ts.push_back(1.0);
  }
  return s;
}

// ---------------------------------------------------------------- criterion 1
void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  const double V_ref = tok.volume(0.5);  // pi^2 / 2

  RunConfig cfg;
  cfg.field_params = {1.0, 1.0, 0.0, 2, 1};
  cfg.methods = {"eq1", "quasisym", "lattice", "general", "stokes", "poincare", "mc"};
  cfg.r_target = 0.5;
  cfg.n_surfaces = 16;
  cfg.n_returns = 150;
  cfg.grid_eq1 = 64;
  cfg.grid_stokes = 64;
  cfg.n_boundary = 64;
  cfg.n_ray_samples = 33;
  cfg.mc_samples = 10000000ull;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  cfg.seed = 20240801;

  ScenarioResult res = run_scenario(cfg, "");
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  struct Want {
    const char* method;
    double tolerance;  // 0: use the Monte-Carlo confidence interval
  };
  const Want wants[] = {{"eq1", 1e-4},     {"quasisym", 1e-6}, {"lattice", 1e-6},
                        {"general", 1e-4}, {"stokes", 1e-9},   {"poincare", 1e-4},
                        {"mc", 0.0}};
  bool pass = true;
  std::ostringstream detail;
  for (const Want& w : wants) {
    const MethodReport* rep = nullptr;
    for (const auto& r : res.reports)
      if (r.method == w.method) rep = &r;
    if (!rep || !rep->ok) {
      pass = false;
      detail << w.method << "=FAILED ";
      continue;
    }
    double err = std::fabs(rep->V - V_ref);
    double allowed = w.tolerance > 0.0 ? w.tolerance : rep->error_estimate;
    bool ok = err <= allowed;
    pass = pass && ok;
    detail << w.method << "=" << fmt("%.2e", err) << (ok ? " " : "! ");
  }
  bool time_ok = elapsed < 120.0;
  pass = pass && time_ok;
  detail << fmt("wall=%.1fs", elapsed);
  report(1, "Pappus oracle, all methods", pass, detail.str());
}

// ---------------------------------------------------------------- criterion 2
void criterion_2() {
  auto field = make_tokamak_field({1.0, 1.0});
  ActionFlow action{field.get(), tol(1e-11, 1e-13)};

  bool pass23 = true, pass43 = true;
  double worst23 = 0.0, worst43 = 0.0;
  auto Y = homologue_from_label([&](const Vec3& p) { return field->eval_psi(p); });
  for (int i = 0; i < 16; ++i) {
    // surface family offset so no grid point lands on an exactly rational
    // winding (at r = 0.28 the winding is 24/25: a Pythagorean point where a
    // single orbit closes and cannot sample the curve)
    double r = 0.207 + 0.2865 * i / 15.0;
    Vec3 seed = to_cartesian({1.0 + r, 0.0, 0.0});

    double tau = u_line_period(action, seed);
    double T = B_return_to_u_line(action, seed);
    LatticeBasis basis = find_lattice_generators(action, seed);
    double rel23 = std::fabs(tau * T - basis.Delta) / basis.Delta;
    worst23 = std::max(worst23, rel23);
    pass23 = pass23 && rel23 < 1e-6;

    // dV/dpsi by the mean-return-time route: T-bar times dPhi/dpsi. The
    // label coverage is adaptive: windings near a low-order rational (e.g.
    // 7/8 near r = 0.48) fill the curve coordinate in slowly.
    SectionSpec sec = SectionSpec::plane_phi(0.0);
    sec.R_center = 1.0;
    SurfaceReturnMeasurement m =
        measure_surface_returns(*field, seed, sec, 300, 8000, 0.004, tol(1e-11, 1e-13));
    double Tbar = m.mean_return.T_bar;
    double dPhi = std::fabs(flux_derivative(*field, poloidal_circle(1.0, r, 0.0), Y).dPhi);
    double rel43 = std::fabs(Tbar * dPhi - basis.Delta) / basis.Delta;
    worst43 = std::max(worst43, rel43);
    pass43 = pass43 && rel43 < 1e-5;
  }
  report(2, "theorem consistency", pass23 && pass43,
         fmt("|tauT-Delta|/Delta max %.2e (<1e-6), |Tbar dPhi-Delta|/Delta max %.2e (<1e-5), 16 surfaces",
             worst23, worst43));
}

// ---------------------------------------------------------------- criterion 3
void criterion_3() {
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  IotaEstimate g200 = estimate_iota_closest_returns(rigid_rotation(golden, 200));
  IotaEstimate s200 = estimate_iota_closest_returns(rigid_rotation(inv_sqrt2, 200));
  bool err_ok =
      std::fabs(g200.iota - golden) < 1e-8 && std::fabs(s200.iota - inv_sqrt2) < 1e-8;

  // digit emission needs records deep enough for eight quotients
  IotaEstimate sdig = estimate_iota_closest_returns(rigid_rotation(inv_sqrt2, 1500));
  bool dig_ok = g200.cf_digits.size() >= 8 && sdig.cf_digits.size() >= 8;
  for (int k = 0; dig_ok && k < 8; ++k)
    dig_ok = g200.cf_digits[k] == 1 && sdig.cf_digits[k] == 2;

  auto field = make_tokamak_field({1.0, 1.0});
  SectionSpec sec = SectionSpec::plane_phi(0.0);
  sec.R_center = 1.0;
  ReturnSeriesBuild series = build_return_series(*field, to_cartesian({1.5, 0.0, 0.0}), sec, 500,
                                                 tol(1e-11, 1e-13));
  IotaEstimate bench = estimate_iota_closest_returns(series.series);
  bool bench_ok = std::fabs(bench.iota - tok.iota(0.5)) < 1e-6;

  report(3, "rotation-number estimator", err_ok && dig_ok && bench_ok,
         fmt("golden err %.1e, 1/sqrt2 err %.1e, digits %s, benchmark err %.1e",
             std::fabs(g200.iota - golden), std::fabs(s200.iota - inv_sqrt2),
             dig_ok ? "ok" : "BAD", std::fabs(bench.iota - tok.iota(0.5))));
}

// ---------------------------------------------------------------- criterion 4
void criterion_4() {
  auto field = make_tokamak_field({1.0, 1.0});
  SectionSpec sec = SectionSpec::plane_phi(0.0);
  sec.R_center = 1.0;
  TraceOptions o = tol(1e-11, 1e-13);

  ReturnSeriesBuild sA = build_return_series(*field, to_cartesian({1.5, 0.0, 0.0}), sec, 1000, o);
  IotaEstimate iota = estimate_iota_closest_returns(sA.series);
  MeanReturnTime mA = mean_return_time_trapezoid(sA.series, iota.iota);
  double errA = std::fabs(mA.T_bar - tok.mean_return_time(0.5));
  bool acc_ok = errA < 1e-5;

  // a different initial point on the same surface shifts every label
  double th = 2.4;
  Vec3 startB = to_cartesian({1.0 + 0.5 * std::cos(th), 0.0, 0.5 * std::sin(th)});
  ReturnSeriesBuild sB = build_return_series(*field, startB, sec, 1000, o);
  IotaEstimate iotaB = estimate_iota_closest_returns(sB.series);
  MeanReturnTime mB = mean_return_time_trapezoid(sB.series, iotaB.iota);
  double shift_diff = std::fabs(mA.T_bar - mB.T_bar);
  bool shift_ok = shift_diff <= mA.error_estimate + mB.error_estimate + 1e-9;

  report(4, "mean return time", acc_ok && shift_ok,
         fmt("err %.2e (<1e-5), shift diff %.2e vs estimates %.2e", errA, shift_diff,
             mA.error_estimate + mB.error_estimate));
}

// ---------------------------------------------------------------- criterion 5
class GaugeShiftedField : public TokamakField {
 public:
  using TokamakField::TokamakField;

 protected:
  Vec3 A_impl(const Vec3& x) const override {
    // A + grad(chi), chi = sin(x) cos(2z) + y
    Vec3 g{std::cos(x.x) * std::cos(2.0 * x.z), 1.0, -2.0 * std::sin(x.x) * std::sin(2.0 * x.z)};
    return TokamakField::A_impl(x) + g;
  }
};

void criterion_5() {
  auto field = make_tokamak_field({1.0, 1.0});

  double hom = std::fabs(loop_flux(*field, poloidal_circle(1.0, 0.5, 0.0), 256, 1e-12).Phi -
                         loop_flux(*field, wobbled_poloidal_loop(1.0, 0.5, 0.0), 512, 1e-12).Phi);

  GaugeShiftedField shifted({1.0, 1.0});
  double gauge = 0.0;
  for (const LoopSpec& loop : {poloidal_circle(1.0, 0.4, 1.2), toroidal_circle(1.35, 0.1)})
    gauge = std::max(gauge, std::fabs(loop_flux(*field, loop, 256, 1e-12).Phi -
                                      loop_flux(shifted, loop, 256, 1e-12).Phi));

  auto Y_psi = homologue_from_label([&](const Vec3& p) { return field->eval_psi(p); });
  double tau_err =
      std::fabs(std::fabs(flux_derivative(*field, toroidal_circle(1.5, 0.0), Y_psi).dPhi) -
                kTwoPi);

  const double r = 0.5, h = 1e-4;
  double fd = (loop_flux(*field, poloidal_circle(1.0, r + h, 0.0), 256, 1e-12).Phi -
               loop_flux(*field, poloidal_circle(1.0, r - h, 0.0), 256, 1e-12).Phi) /
              (2.0 * h);
  auto Y_r = homologue_from_label([&](const Vec3& p) { return std::sqrt(2.0 * field->eval_psi(p)); });
  double fd_err = std::fabs(
      std::fabs(flux_derivative(*field, poloidal_circle(1.0, r, 0.0), Y_r).dPhi) - std::fabs(fd));

  bool pass = hom < 1e-8 && gauge < 1e-10 && tau_err < 1e-6 && fd_err < 1e-6;
  report(5, "flux identities", pass,
         fmt("homology %.1e (<1e-8), gauge %.1e (<1e-10), dPhi=tau dpsi %.1e (<1e-6), fd %.1e (<1e-6)",
             hom, gauge, tau_err, fd_err));
}

// ---------------------------------------------------------------- criterion 6
void criterion_6() {
  // synthetic: constant density on the unit disk
  std::vector<std::pair<double, double>> nodes(64), tangents(64);
  for (int j = 0; j < 64; ++j) {
    double lam = kTwoPi * j / 64;
    nodes[j] = {std::cos(lam), std::sin(lam)};
    tangents[j] = {-kTwoPi * std::sin(lam), kTwoPi * std::cos(lam)};
  }
  double synthetic = poincare_boundary_integral(
      nodes, tangents, [](std::size_t, double) { return 1.0; }, 1e-12, 1e-14);
  bool synth_ok = std::fabs(synthetic - oracles::kPi) < 1e-10;

  auto field = make_tokamak_field({1.0, 1.0});
  bool nested_ok = true;
  std::ostringstream detail;
  for (double rb : {0.2, 0.35, 0.5}) {
    SectionDiskSpec disk{0.0, 1.0, 0.0, rb};
    SectionVolumeOptions eo;
    eo.n_radial = 48;
    eo.n_angular = 48;
    eo.trace = tol(1e-10, 1e-12);
    SectionVolumeResult direct = volume_eq1_section(*field, disk, eo);
    PoincareBoundaryOptions po;
    po.n_boundary = 64;
    po.n_ray_samples = 33;
    po.trace = tol(1e-10, 1e-12);
    SectionVolumeResult boundary = volume_poincare_boundary(*field, disk, po);
    double diff = std::fabs(direct.V - boundary.V);
    double tolerance = 10.0 * (direct.error_estimate + boundary.error_estimate) + 1e-7;
    nested_ok = nested_ok && diff <= tolerance;
    detail << fmt("r=%.2f diff %.1e (tol %.1e) ", rb, diff, tolerance);
  }
  report(6, "boundary-integral identity", synth_ok && nested_ok,
         fmt("synthetic |v-pi| %.1e (<1e-10), %s", std::fabs(synthetic - oracles::kPi),
             detail.str().c_str()));
}

// ---------------------------------------------------------------- criterion 7
void criterion_7() {
  auto field = make_tokamak_field({1.0, 1.0});
  const double r = 0.5;
  TorusEmbedding exact = oracles::exact_tokamak_embedding(1.0, r, 20);
  FrequencyVector w(1.0, tok.iota(r));

  double P1 = eval_P(*field, exact, w, 32, 80);
  double P2 = eval_P(*field, exact, {2.0 * w.w1, 2.0 * w.w2}, 32, 80);
  bool hom_ok = std::fabs(P2 - 2.0 * P1) <= 1e-14 * std::fabs(P1);

  PercivalResult stat = first_variation_residual(*field, exact, w, 32, 80);
  bool resid_ok = stat.residual < 1e-6;

  double Phi1 = loop_flux(*field, toroidal_circle(1.0 + r, 0.0), 256, 1e-12).Phi;
  double Phi2 = loop_flux(*field, poloidal_circle(1.0, r, 0.0), 256, 1e-12).Phi;
  double decomp = std::fabs(P1 - (Phi1 * w.w1 + Phi2 * w.w2));
  bool decomp_ok = decomp < 1e-6;

  auto stationary = [&](const FrequencyVector& omega) {
    double rr = std::sqrt(1.0 - omega.iota() * omega.iota());
    return oracles::exact_tokamak_embedding(1.0, rr, 20);
  };
  auto [dP1, dP2] = flux_from_dP_domega(*field, stationary, w, 1e-3, 32, 80);
  double flux_err = std::max(std::fabs(dP1 - Phi1), std::fabs(dP2 - Phi2));
  bool flux_ok = flux_err < 1e-5;

  // gradient check at a non-stationary configuration
  TorusEmbedding base = TorusEmbedding::circular_guess(1.0, 0.42, 1, 6);
  FrequencyVector wb(1.0, tok.iota(0.45));
  std::mt19937_64 rng(2024);
  auto uniform = [&] { return (rng() >> 11) * 0x1.0p-53; };
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(base.n_coeffs());
    for (auto& q : v) q = 2.0 * uniform() - 1.0;
    double analytic = directional_dP(*field, base, wb, 24, 48, v);
    const double h = 1e-5;
    TorusEmbedding plus = base, minus = base;
    for (int q = 0; q < base.n_coeffs(); ++q) {
      plus.coeffs()[q] += h * v[q];
      minus.coeffs()[q] -= h * v[q];
    }
    double fd =
        (eval_P(*field, plus, wb, 24, 48) - eval_P(*field, minus, wb, 24, 48)) / (2.0 * h);
    worst_rel = std::max(worst_rel, std::fabs(analytic - fd) / std::fabs(fd));
  }
  bool grad_ok = worst_rel < 1e-6;

  report(7, "variational functional suite", hom_ok && resid_ok && decomp_ok && flux_ok && grad_ok,
         fmt("homog %.1e, residual %.1e (<1e-6), P-flux %.1e (<1e-6), dP/domega %.1e (<1e-5), grad %.1e (<1e-6)",
             std::fabs(P2 - 2.0 * P1), stat.residual, decomp, flux_err, worst_rel));
}

// ---------------------------------------------------------------- criterion 8
void criterion_8() {
  TokamakCircularParams params{1.0, 1.0, 0.005, 2, 1};
  auto field = make_tokamak_field(params);
  const double V_ref = tok.volume(0.5);  // this perturbation preserves the circles

  // mean-return-time route tuned to the 1e-3 target: a sparse surface family
  // at radii whose windings cover the curve coordinate within ~100 returns,
  // and an ODE tolerance sized to the target
  std::uint64_t evals0 = field->counters().n_B.load();
  GeneralProfileOptions go;
  go.n_returns = 100;
  go.max_returns = 4000;
  go.trace = tol(1e-7, 1e-9);
  go.section = SectionSpec::plane_phi(0.0);
  go.section.R_center = 1.0;
  go.label_fn = [&](const Vec3& p) { return std::sqrt(2.0 * field->eval_psi(p)); };
  go.profile.anchor_integrand = 0.0;
  std::vector<double> grid = {0.25, 0.315, 0.355, 0.42, 0.465, 0.5};
  auto seeds = [&](double r) { return to_cartesian({1.0 + r, 0.0, 0.0}); };
  auto loops = [&](double r) { return poloidal_circle(1.0, r, 0.0); };
  GeneralProfileResult gen = volume_profile_general(*field, grid, seeds, loops, go);
  std::uint64_t evals_general = field->counters().n_B.load() - evals0;
  double V_gen = gen.profile.total();

  // section-integral baseline at its reference configuration (the criterion-1
  // grid with its half-resolution error pass)
  evals0 = field->counters().n_B.load();
  SectionDiskSpec disk{0.0, 1.0, 0.0, 0.5};
  SectionVolumeOptions eo;
  eo.n_radial = 64;
  eo.n_angular = 64;
  eo.trace = tol(1e-9, 1e-11);
  SectionVolumeResult eq1 = volume_eq1_section(*field, disk, eo);
  std::uint64_t evals_eq1 = field->counters().n_B.load() - evals0;

  // stationary embedding at the measured winding of the surviving torus
  double iota_measured = gen.surfaces.back().iota;
  FrequencyVector w(1.0, iota_measured);
  TorusEmbedding init = TorusEmbedding::circular_guess(1.0, 0.48, 3, 16);
  SolveOptions so;
  so.N = 14;
  so.M = 68;
  so.target_residual = 1e-8;
  SolveResult sol = solve_stationary(*field, w, init, so);
  SurfaceMesh mesh = SurfaceMesh::sample(
      [&](double t1, double t2) { return sol.x.eval(t1, t2); }, 64, 64);
  double V_stokes = volume_stokes_surface(mesh);

  double d1 = std::fabs(V_gen - eq1.V) / V_ref;
  double d2 = std::fabs(V_gen - V_stokes) / V_ref;
  double d3 = std::fabs(eq1.V - V_stokes) / V_ref;
  bool pair_ok = d1 < 1e-3 && d2 < 1e-3 && d3 < 1e-3;
  double ratio = static_cast<double>(evals_eq1) / static_cast<double>(evals_general);
  bool cost_ok = ratio >= 10.0;

  report(8, "perturbed-field cross-check", pair_ok && cost_ok && sol.result.residual < 1e-6,
         fmt("V: gen %.6f eq1 %.6f stokes %.6f (pairwise %.1e/%.1e/%.1e < 1e-3), evals %llu vs %llu (%.1fx >= 10), solve resid %.1e",
             V_gen, eq1.V, V_stokes, d1, d2, d3,
             static_cast<unsigned long long>(evals_eq1),
             static_cast<unsigned long long>(evals_general), ratio, sol.result.residual));
}

// ---------------------------------------------------------------- criterion 9
void criterion_9() {
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() / "fluxvol_acceptance_det";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  {
    std::ofstream f(tmp / "run.toml");
    f << "[field]\nkind = \"tokamak-circular\"\nR0 = 1.0\nF0 = 1.0\n\n"
      << "[scenario]\nmethods = [\"eq1\", \"quasisym\", \"stokes\", \"mc\"]\n"
      << "r_target = 0.5\nn_surfaces = 6\ngrid_eq1 = 12\ngrid_stokes = 32\n"
      << "mc_samples = 500000\nseed = 31415\nrtol = 1e-9\natol = 1e-11\n";
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  std::string base = std::string(FLUXVOL_CLI_PATH) + " --config " + (tmp / "run.toml").string();
  int rc1 = std::system((base + " --out-dir " + (tmp / "a").string() + " benchmark > /dev/null").c_str());
  int rc2 = std::system((base + " --out-dir " + (tmp / "b").string() + " benchmark > /dev/null").c_str());
  bool pass = rc1 == 0 && rc2 == 0;
  int compared = 0;
  if (pass) {
    for (const char* name : {"results.csv", "results.json", "profile_quasisym.csv"}) {
      std::string a = slurp(tmp / "a" / name), b = slurp(tmp / "b" / name);
      pass = pass && !a.empty() && a == b;
      ++compared;
    }
  }
  fs::remove_all(tmp);
  report(9, "determinism", pass, fmt("2 runs, %d artifacts byte-compared", compared));
}

}  // namespace

int main() {
  std::printf("fluxvol acceptance suite (benchmark field R0 = 1, F0 = 1)\n");
  auto t0 = std::chrono::steady_clock::now();
  struct Entry {
    int id;
    const char* label;
    void (*fn)();
  };
  const Entry entries[] = {
      {1, "Pappus oracle, all methods", criterion_1},
      {2, "theorem consistency", criterion_2},
      {3, "rotation-number estimator", criterion_3},
      {4, "mean return time", criterion_4},
      {5, "flux identities", criterion_5},
      {6, "boundary-integral identity", criterion_6},
      {7, "variational functional suite", criterion_7},
      {8, "perturbed-field cross-check", criterion_8},
      {9, "determinism", criterion_9},
  };
  for (const Entry& e : entries) {
    try {
      e.fn();
    } catch (const std::exception& ex) {
      report(e.id, e.label, false, std::string("exception: ") + ex.what());
    }
  }
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s (%d failure%s, %.1f s total)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
              g_failures, g_failures == 1 ? "" : "s", elapsed);
  return g_failures == 0 ? 0 : 1;
}

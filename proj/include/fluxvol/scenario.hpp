// Scenario orchestration for the CLI: runs the requested volume methods on a
// configured field, assembles comparison reports, and writes CSV/JSON
// artifacts.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluxvol/config.hpp"
#include "fluxvol/percival.hpp"
#include "fluxvol/tracer.hpp"
#include "fluxvol/volume.hpp"

namespace fluxvol {

inline constexpr const char* kToolVersion = "fluxvol 0.1.0";

struct MethodReport {
  std::string method;
  double V = 0.0;
  double error_estimate = 0.0;
  double wall_time_s = 0.0;          // excluded from deterministic artifacts
  std::uint64_t field_evals = 0;     // eval_B calls
  bool ok = false;
  std::string note;
};

struct ScenarioResult {
  std::vector<MethodReport> reports;
  std::vector<VolumeProfile> profiles;
  AxisResult axis;
  bool all_ok = false;
};

// Executes the configured methods. When out_dir is nonempty, writes
// results.csv, results.json, per-method profile CSVs, and timings.csv
// (timings are the one non-deterministic artifact and are kept separate).
ScenarioResult run_scenario(const RunConfig& cfg, const std::string& out_dir,
                            bool verbose = false);

// Long-format CSV: label, V, dV_dlabel, err, method.
void emit_plot_data(const VolumeProfile& profile, const std::string& out_path);

// Orbit CSV: t, x, y, z, R, phi, Z, psi.
void write_orbit_csv(const OrbitSegment& orbit, const FieldModel& field,
                     const std::string& out_path);

std::string format_double(double v);  // shortest round-trip, deterministic

}  // namespace fluxvol

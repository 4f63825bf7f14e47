// Run configuration: a strict TOML subset (flat [section] tables, scalar and
// array values) validated against the known schema before any computation.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fluxvol/field.hpp"
#include "fluxvol/tokamak.hpp"

namespace fluxvol {

struct TomlValue {
  std::variant<bool, std::int64_t, double, std::string, std::vector<double>,
               std::vector<std::string>>
      v;

  bool is_number() const {
    return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
  }
  double as_double() const;
  std::int64_t as_int() const;
};

using TomlTable = std::map<std::string, TomlValue>;
using TomlDoc = std::map<std::string, TomlTable>;

// Parses the subset; throws std::runtime_error with a line number on errors.
TomlDoc parse_toml(const std::string& text);
TomlDoc parse_toml_file(const std::string& path);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // [field]
  TokamakCircularParams field_params;

  // [scenario]
  std::vector<std::string> methods;  // subset of eq1 quasisym lattice general stokes poincare mc
  double r_target = 0.5;
  int n_surfaces = 16;
  int n_returns = 200;
  int grid_eq1 = 64;
  int grid_stokes = 64;
  int n_boundary = 64;
  int n_ray_samples = 33;
  std::uint64_t mc_samples = 1'000'000;
  double rtol = 1e-10;
  double atol = 1e-12;
  std::uint64_t seed = 12345;
  double time_budget = 1e4;

  // [output]
  std::string out_dir = "out";

  std::string source_text;  // raw config text, for provenance hashing
};

// Schema validation: unknown sections or keys are rejected, tolerances must
// be positive. Throws ConfigError.
RunConfig load_config(const std::string& path);
RunConfig config_from_doc(const TomlDoc& doc, std::string source_text);

std::shared_ptr<FieldModel> make_field(const RunConfig& cfg);

// FNV-1a hash of the config text, for the provenance sidecar.
std::uint64_t config_hash(const std::string& text);

}  // namespace fluxvol

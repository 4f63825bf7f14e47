#include "fluxvol/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fluxvol {

double TomlValue::as_double() const {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::int64_t>(v))
    return static_cast<double>(std::get<std::int64_t>(v));
  throw ConfigError("config value is not a number");
}

std::int64_t TomlValue::as_int() const {
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  if (std::holds_alternative<double>(v)) {
    double d = std::get<double>(v);
    if (d != std::floor(d)) throw ConfigError("config value is not an integer");
    return static_cast<std::int64_t>(d);
  }
  throw ConfigError("config value is not an integer");
}

namespace {

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// removes a trailing comment outside of quotes
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

TomlValue parse_scalar(const std::string& tok, int line_no) {
  if (tok.empty()) throw std::runtime_error("toml: empty value at line " + std::to_string(line_no));
  if (tok == "true") return {true};
  if (tok == "false") return {false};
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw std::runtime_error("toml: unterminated string at line " + std::to_string(line_no));
    return {tok.substr(1, tok.size() - 2)};
  }
  // number: integer when it parses exactly as one, float otherwise
  try {
    std::size_t pos = 0;
    if (tok.find_first_of(".eE") == std::string::npos ||
        (tok.size() > 1 && (tok.find("0x") == 0 || tok.find("-0x") == 0))) {
      long long iv = std::stoll(tok, &pos);
      if (pos == tok.size()) return {static_cast<std::int64_t>(iv)};
    }
    pos = 0;
    double dv = std::stod(tok, &pos);
    if (pos == tok.size()) return {dv};
  } catch (const std::exception&) {
  }
  throw std::runtime_error("toml: cannot parse value '" + tok + "' at line " +
                           std::to_string(line_no));
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = strip(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("toml: bad section header at line " + std::to_string(line_no));
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty())
        throw std::runtime_error("toml: empty section name at line " + std::to_string(line_no));
      doc[section];  // create, may be empty
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("toml: expected key = value at line " + std::to_string(line_no));
    std::string key = strip(line.substr(0, eq));
    std::string val = strip(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("toml: empty key at line " + std::to_string(line_no));
    if (doc[section].count(key))
      throw std::runtime_error("toml: duplicate key '" + key + "' at line " +
                               std::to_string(line_no));
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']')
        throw std::runtime_error("toml: unterminated array at line " + std::to_string(line_no));
      std::string inner = strip(val.substr(1, val.size() - 2));
      std::vector<std::string> toks;
      std::string cur;
      bool in_str = false;
      for (char ch : inner) {
        if (ch == '"') in_str = !in_str;
        if (ch == ',' && !in_str) {
          toks.push_back(strip(cur));
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      if (!strip(cur).empty()) toks.push_back(strip(cur));
      bool all_strings = !toks.empty() && toks.front().size() && toks.front().front() == '"';
      if (all_strings) {
        std::vector<std::string> arr;
        for (auto& t : toks) arr.push_back(std::get<std::string>(parse_scalar(t, line_no).v));
        doc[section][key] = TomlValue{arr};
      } else {
        std::vector<double> arr;
        for (auto& t : toks) arr.push_back(parse_scalar(t, line_no).as_double());
        doc[section][key] = TomlValue{arr};
      }
    } else {
      doc[section][key] = parse_scalar(val, line_no);
    }
  }
  return doc;
}

TomlDoc parse_toml_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_toml(ss.str());
}

namespace {

const std::set<std::string> kKnownMethods = {"eq1",    "quasisym", "lattice", "general",
                                             "stokes", "poincare", "mc"};

void reject_unknown(const TomlTable& table, const std::set<std::string>& known,
                    const std::string& section) {
  for (const auto& [k, v] : table)
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in [" + section + "]");
}

}  // namespace

RunConfig config_from_doc(const TomlDoc& doc, std::string source_text) {
  RunConfig cfg;
  cfg.source_text = std::move(source_text);

  for (const auto& [sec, _] : doc)
    if (sec != "field" && sec != "scenario" && sec != "output")
      throw ConfigError("unknown section [" + sec + "]");

  auto fit = doc.find("field");
  if (fit == doc.end()) throw ConfigError("missing [field] section");
  const TomlTable& field = fit->second;
  reject_unknown(field, {"kind", "R0", "F0", "eps", "m", "n"}, "field");
  auto kind_it = field.find("kind");
  if (kind_it == field.end() ||
      !std::holds_alternative<std::string>(kind_it->second.v) ||
      std::get<std::string>(kind_it->second.v) != "tokamak-circular")
    throw ConfigError("field.kind must be \"tokamak-circular\"");
  if (field.count("R0")) cfg.field_params.R0 = field.at("R0").as_double();
  if (field.count("F0")) cfg.field_params.F0 = field.at("F0").as_double();
  if (field.count("eps")) cfg.field_params.eps = field.at("eps").as_double();
  if (field.count("m")) cfg.field_params.m = static_cast<int>(field.at("m").as_int());
  if (field.count("n")) cfg.field_params.n = static_cast<int>(field.at("n").as_int());
  if (!(cfg.field_params.R0 > 0.0)) throw ConfigError("field.R0 must be > 0");

  if (auto sit = doc.find("scenario"); sit != doc.end()) {
    const TomlTable& sc = sit->second;
    reject_unknown(sc,
                   {"methods", "r_target", "n_surfaces", "n_returns", "grid_eq1", "grid_stokes",
                    "n_boundary", "n_ray_samples", "mc_samples", "rtol", "atol", "seed",
                    "time_budget"},
                   "scenario");
    if (sc.count("methods")) {
      const auto& mv = sc.at("methods").v;
      if (!std::holds_alternative<std::vector<std::string>>(mv))
        throw ConfigError("scenario.methods must be an array of strings");
      cfg.methods = std::get<std::vector<std::string>>(mv);
      for (const auto& m : cfg.methods)
        if (!kKnownMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
    }
    if (sc.count("r_target")) cfg.r_target = sc.at("r_target").as_double();
    if (sc.count("n_surfaces")) cfg.n_surfaces = static_cast<int>(sc.at("n_surfaces").as_int());
    if (sc.count("n_returns")) cfg.n_returns = static_cast<int>(sc.at("n_returns").as_int());
    if (sc.count("grid_eq1")) cfg.grid_eq1 = static_cast<int>(sc.at("grid_eq1").as_int());
    if (sc.count("grid_stokes")) cfg.grid_stokes = static_cast<int>(sc.at("grid_stokes").as_int());
    if (sc.count("n_boundary")) cfg.n_boundary = static_cast<int>(sc.at("n_boundary").as_int());
    if (sc.count("n_ray_samples"))
      cfg.n_ray_samples = static_cast<int>(sc.at("n_ray_samples").as_int());
    if (sc.count("mc_samples"))
      cfg.mc_samples = static_cast<std::uint64_t>(sc.at("mc_samples").as_int());
    if (sc.count("rtol")) cfg.rtol = sc.at("rtol").as_double();
    if (sc.count("atol")) cfg.atol = sc.at("atol").as_double();
    if (sc.count("seed")) cfg.seed = static_cast<std::uint64_t>(sc.at("seed").as_int());
    if (sc.count("time_budget")) cfg.time_budget = sc.at("time_budget").as_double();
  }

  if (auto oit = doc.find("output"); oit != doc.end()) {
    reject_unknown(oit->second, {"out_dir"}, "output");
    if (oit->second.count("out_dir")) {
      const auto& v = oit->second.at("out_dir").v;
      if (!std::holds_alternative<std::string>(v))
        throw ConfigError("output.out_dir must be a string");
      cfg.out_dir = std::get<std::string>(v);
    }
  }

  // tolerances and counts
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw ConfigError("tolerances must be > 0");
  if (!(cfg.time_budget > 0.0)) throw ConfigError("time_budget must be > 0");
  if (!(cfg.r_target > 0.0 && cfg.r_target < 0.95 * cfg.field_params.R0))
    throw ConfigError("r_target must lie inside the field domain");
  if (cfg.n_surfaces < 2 || cfg.n_returns < 3 || cfg.grid_eq1 < 4 || cfg.grid_stokes < 4 ||
      cfg.n_boundary < 4 || cfg.n_ray_samples < 4 || cfg.mc_samples < 1)
    throw ConfigError("grid/count parameters too small");
  if (cfg.methods.empty()) cfg.methods = {"eq1", "quasisym", "lattice", "general",
                                          "stokes", "poincare", "mc"};
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  return config_from_doc(parse_toml(text), text);
}

std::shared_ptr<FieldModel> make_field(const RunConfig& cfg) {
  return make_tokamak_field(cfg.field_params);
}

std::uint64_t config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace fluxvol

#pragma once

// Batch front end: key-value run configuration, sweep execution and
// CSV / JSON tables.
//
// Config format:
//
//   [mirror1]
//   model = plasma
//   lambda_p = 137nm
//   [geometry]
//   L = 1um
//   [sweep]
//   variable = L
//   from = 0.1um
//   to = 10um
//   points = 5
//   scale = log
//
// Sections: mirror1, mirror2 (defaults to mirror1), geometry, sweep,
// numerics, output. '#' starts a comment.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "casimir/constants.hpp"
#include "casimir/corrugation.hpp"
#include "casimir/dielectric.hpp"
#include "casimir/error.hpp"
#include "casimir/planesphere.hpp"
#include "casimir/plates.hpp"

namespace casimir::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kPointFailure = 3, kIoError = 4 };

/// Invalid configuration. `key()` is the dotted path, e.g. "geometry.L".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& reason)
      : std::runtime_error(key.empty() ? reason : key + ": " + reason), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Geometry { Plates, Sphere, Corrugation, OneDim };
enum class Format { Csv, Json };

inline std::string geometry_name(Geometry g) {
  switch (g) {
    case Geometry::Plates: return "plates";
    case Geometry::Sphere: return "sphere";
    case Geometry::Corrugation: return "corrugation";
    case Geometry::OneDim: return "onedim";
  }
  return "";
}

inline Geometry parse_geometry(std::string_view s) {
  if (s == "plates") return Geometry::Plates;
  if (s == "sphere") return Geometry::Sphere;
  if (s == "corrugation") return Geometry::Corrugation;
  if (s == "onedim" || s == "1d") return Geometry::OneDim;
  throw ConfigError("geometry", "unknown geometry '" + std::string(s) + "'");
}

struct MirrorSpec {
  std::string kind = "perfect";  // perfect | plasma | drude | tabulated | constant
  DielectricModel model = DielectricModel::perfect();
  double r = 1.0;  // constant 1d amplitude

  bool constant() const { return kind == "constant"; }

  /// Plasma wavelength of the conduction electrons, infinite for perfect or insulating mirrors.
  double lambda_p() const {
    if (constant() || model.is_perfect() || !model.has_conduction()) return std::numeric_limits<double>::infinity();
    return 2.0 * pi * PhysicalConstants::c / model.conduction().omega_p;
  }
};

struct SweepGrid {
  std::string variable;  // empty: single point at the geometry values
  std::vector<double> values;
};

struct Numerics {
  QuadratureSpec spec;
  int ell_max = 0;  // 0 selects MultipoleTruncation::for_ratio(x)
  int nodes = 0;
  double m_tol = 1e-10;
  DerivativeMethod method = DerivativeMethod::Analytic;
  double fd_step = 1e-3;
  int max_matsubara_terms = 100000;
  int threads = 1;
};

struct RunConfig {
  Geometry geometry = Geometry::Plates;
  MirrorSpec mirror1, mirror2;
  double L = 0.0, T = 0.0, A = 1.0, R = 0.0;
  CorrugationSpec corrugation{0.0, 0.0, 0.0, 0.0};
  SweepGrid sweep;
  Numerics numerics;
  Format format = Format::Csv;
  std::string output_path;  // empty: stdout
  std::vector<std::pair<std::string, std::string>> entries;  // effective key = value pairs, sorted
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  int line = 0;
};

inline const std::set<std::string>& known_sections() {
  static const std::set<std::string> s = {"mirror1", "mirror2", "geometry", "sweep", "numerics", "output"};
  return s;
}

/// Section-qualified key/value pairs; consumed entries are erased so leftovers can be reported.
class Entries {
 public:
  void set(const std::string& key, std::string value, int line, bool allow_replace) {
    const auto it = map_.find(key);
    if (it != map_.end() && !allow_replace)
      throw ConfigError(key, "duplicate key (line " + std::to_string(line) + ")");
    map_[key] = Entry{std::move(value), line};
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }
  bool has_section(const std::string& section) const {
    const auto it = map_.lower_bound(section + ".");
    return it != map_.end() && it->first.rfind(section + ".", 0) == 0;
  }

  std::optional<std::string> take(const std::string& key) {
    const auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    used_.emplace(key, it->second.value);
    std::string v = it->second.value;
    map_.erase(it);
    return v;
  }

  void reject_leftovers() const {
    if (!map_.empty()) {
      const auto& [key, e] = *map_.begin();
      throw ConfigError(key, "unknown key" + (e.line > 0 ? " (line " + std::to_string(e.line) + ")" : std::string()));
    }
  }

  const std::map<std::string, std::string>& used() const { return used_; }

 private:
  std::map<std::string, Entry> map_;
  std::map<std::string, std::string> used_;
};

inline void split_key(const std::string& dotted, std::string& section, std::string& key) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
    throw ConfigError(dotted, "override must have the form section.key=value");
  section = dotted.substr(0, dot);
  key = dotted.substr(dot + 1);
}

inline Entries tokenize(std::string_view text, const std::vector<std::string>& overrides) {
  Entries out;
  std::istringstream in{std::string(text)};
  std::string raw, section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_sections().count(section))
        throw ConfigError(section, "unknown section (line " + std::to_string(lineno) + ")");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (section.empty()) throw ConfigError(key, "key outside any [section] (line " + std::to_string(lineno) + ")");
    out.set(section + "." + key, trim(line.substr(eq + 1)), lineno, false);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must have the form section.key=value");
    const std::string dotted = trim(o.substr(0, eq));
    std::string section_name, key;
    split_key(dotted, section_name, key);
    if (!known_sections().count(section_name)) throw ConfigError(section_name, "unknown section");
    out.set(dotted, trim(o.substr(eq + 1)), 0, true);
  }
  return out;
}

enum class Dim { Length, Temperature, Frequency, Area, Number };

inline std::string dim_units(Dim d) {
  switch (d) {
    case Dim::Length: return "nm, um, mm, m";
    case Dim::Temperature: return "K";
    case Dim::Frequency: return "eV, rad/s";
    case Dim::Area: return "nm2, um2, mm2, m2";
    case Dim::Number: return "none";
  }
  return "";
}

/// Unit conversion: a decimal exponent shift (exact) followed by a factor.
struct Unit {
  int exponent = 0;
  double factor = 1.0;
};

inline std::optional<Unit> find_unit(Dim d, const std::string& u) {
  static const std::map<std::string, Unit> length = {{"", {}},      {"m", {}},         {"mm", {-3}},
                                                     {"um", {-6}},  {"\xc2\xb5m", {-6}}, {"nm", {-9}}};
  static const std::map<std::string, Unit> area = {{"", {}},         {"m2", {}},          {"m^2", {}},
                                                   {"mm2", {-6}},     {"mm^2", {-6}},      {"um2", {-12}},
                                                   {"um^2", {-12}},   {"nm2", {-18}},      {"nm^2", {-18}}};
  static const std::map<std::string, Unit> temperature = {{"", {}}, {"K", {}}};
  static const std::map<std::string, Unit> frequency = {
      {"", {}}, {"rad/s", {}}, {"eV", {0, PhysicalConstants::eV / PhysicalConstants::hbar}}};
  static const std::map<std::string, Unit> number = {{"", {}}};
  const std::map<std::string, Unit>* table = &number;
  switch (d) {
    case Dim::Length: table = &length; break;
    case Dim::Temperature: table = &temperature; break;
    case Dim::Frequency: table = &frequency; break;
    case Dim::Area: table = &area; break;
    case Dim::Number: break;
  }
  const auto it = table->find(u);
  if (it == table->end()) return std::nullopt;
  return it->second;
}

inline double parse_quantity(const std::string& key, const std::string& text, Dim d) {
  const std::string s = trim(text);
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  double probe = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, probe);
  if (ec != std::errc() || ptr == first)
    throw ConfigError(key, "cannot parse '" + s + "' as a number (units: " + dim_units(d) + ")");
  const std::string unit = trim(std::string_view(ptr, static_cast<std::size_t>(last - ptr)));
  const auto u = find_unit(d, unit);
  if (!u) throw ConfigError(key, "unknown unit '" + unit + "' in '" + s + "' (accepted: " + dim_units(d) + ")");
  if (!std::isfinite(probe)) throw ConfigError(key, "must be finite");

  // "0.1um" is read as the decimal 0.1e-6, so the result is correctly rounded
  std::string digits(first, ptr);
  int exponent = u->exponent;
  if (const auto e = digits.find_first_of("eE"); e != std::string::npos) {
    exponent += std::stoi(digits.substr(e + 1));
    digits.erase(e);
  }
  digits += "e" + std::to_string(exponent);
  double v = 0.0;
  std::from_chars(digits.data(), digits.data() + digits.size(), v);
  return v * u->factor;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(key, "cannot parse '" + s + "' as an integer");
  return v;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

inline Dim sweep_dim(const std::string& variable) {
  if (variable == "L" || variable == "R" || variable == "lambda_C") return Dim::Length;
  if (variable == "T") return Dim::Temperature;
  return Dim::Number;
}

inline std::vector<std::string> sweep_variables(Geometry g) {
  switch (g) {
    case Geometry::Plates: return {"L", "T"};
    case Geometry::Sphere: return {"x", "L", "R", "T"};
    case Geometry::Corrugation: return {"kCL", "lambda_C", "L"};
    case Geometry::OneDim: return {"L", "T"};
  }
  return {};
}

inline std::vector<std::string> geometry_keys(Geometry g) {
  switch (g) {
    case Geometry::Plates: return {"L", "T", "A"};
    case Geometry::Sphere: return {"L", "R", "T"};
    case Geometry::Corrugation: return {"L", "T", "A", "a1", "a2", "b", "lambda_C"};
    case Geometry::OneDim: return {"L", "T"};
  }
  return {};
}

inline MirrorSpec parse_mirror(Entries& e, const std::string& section, Geometry geometry,
                               const std::filesystem::path& base_dir) {
  const std::string p = section + ".";
  MirrorSpec m;
  const auto kind = e.take(p + "model");
  if (!kind) throw ConfigError(p + "model", "missing required key");
  m.kind = *kind;

  const auto lambda = e.take(p + "lambda_p");
  const auto omega = e.take(p + "omega_p");
  const auto gamma = e.take(p + "gamma");
  const auto table = e.take(p + "table");
  const auto r = e.take(p + "r");

  auto forbid = [&](const std::optional<std::string>& v, const char* key) {
    if (v) throw ConfigError(p + key, "not used by model '" + m.kind + "'");
  };
  auto plasma_frequency = [&]() -> std::optional<double> {
    if (lambda && omega) throw ConfigError(p + "omega_p", "give either lambda_p or omega_p, not both");
    if (lambda) {
      const double l = parse_quantity(p + "lambda_p", *lambda, Dim::Length);
      if (!(l > 0.0)) throw ConfigError(p + "lambda_p", "must be positive");
      return 2.0 * pi * PhysicalConstants::c / l;
    }
    if (omega) {
      const double w = parse_quantity(p + "omega_p", *omega, Dim::Frequency);
      if (!(w > 0.0)) throw ConfigError(p + "omega_p", "must be positive");
      return w;
    }
    return std::nullopt;
  };
  auto damping = [&](bool required) -> double {
    if (!gamma) {
      if (required) throw ConfigError(p + "gamma", "missing required key");
      return 0.0;
    }
    const double g = parse_quantity(p + "gamma", *gamma, Dim::Frequency);
    if (required ? !(g > 0.0) : !(g >= 0.0)) throw ConfigError(p + "gamma", required ? "must be positive" : "must be >= 0");
    return g;
  };

  if (m.kind == "perfect") {
    forbid(lambda, "lambda_p"), forbid(omega, "omega_p"), forbid(gamma, "gamma"), forbid(table, "table"), forbid(r, "r");
    m.model = DielectricModel::perfect();
  } else if (m.kind == "plasma") {
    forbid(gamma, "gamma"), forbid(table, "table"), forbid(r, "r");
    const auto w = plasma_frequency();
    if (!w) throw ConfigError(p + "lambda_p", "missing required key (or omega_p)");
    m.model = DielectricModel::plasma(*w);
  } else if (m.kind == "drude") {
    forbid(table, "table"), forbid(r, "r");
    const auto w = plasma_frequency();
    if (!w) throw ConfigError(p + "lambda_p", "missing required key (or omega_p)");
    m.model = DielectricModel::drude(*w, damping(true));
  } else if (m.kind == "tabulated") {
    forbid(r, "r");
    if (!table) throw ConfigError(p + "table", "missing required key");
    std::optional<DrudeTerm> conduction;
    if (const auto w = plasma_frequency()) conduction = DrudeTerm{*w, damping(false)};
    else forbid(gamma, "gamma");
    std::filesystem::path path(*table);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    std::ifstream in(path);
    if (!in) throw IoError(p + "table: cannot open '" + path.string() + "'");
    try {
      m.model = load_tabulated(in, conduction);
    } catch (const ParseError& err) {
      throw ConfigError(p + "table", err.what());
    } catch (const DomainError& err) {
      throw ConfigError(p + "table", err.what());
    }
  } else if (m.kind == "constant") {
    forbid(lambda, "lambda_p"), forbid(omega, "omega_p"), forbid(gamma, "gamma"), forbid(table, "table");
    if (geometry != Geometry::OneDim) throw ConfigError(p + "model", "'constant' is only available for onedim");
    if (!r) throw ConfigError(p + "r", "missing required key");
    m.r = parse_quantity(p + "r", *r, Dim::Number);
    if (!(std::abs(m.r) <= 1.0)) throw ConfigError(p + "r", "must lie in [-1, 1]");
  } else {
    throw ConfigError(p + "model", "unknown model '" + m.kind + "' (perfect, plasma, drude, tabulated, constant)");
  }
  return m;
}

inline SweepGrid parse_sweep(Entries& e, Geometry g) {
  SweepGrid s;
  const auto variable = e.take("sweep.variable");
  const auto from = e.take("sweep.from"), to = e.take("sweep.to"), points = e.take("sweep.points"),
             scale = e.take("sweep.scale"), values = e.take("sweep.values");
  if (!variable) {
    if (from || to || points || scale || values) throw ConfigError("sweep.variable", "missing required key");
    s.values = {std::numeric_limits<double>::quiet_NaN()};
    return s;
  }
  const auto allowed = sweep_variables(g);
  if (std::find(allowed.begin(), allowed.end(), *variable) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("sweep.variable", "'" + *variable + "' cannot be swept for " + geometry_name(g) + " (" + list + ")");
  }
  s.variable = *variable;
  const Dim d = sweep_dim(s.variable);

  if (values) {
    if (from || to || points || scale) throw ConfigError("sweep.values", "give either values or from/to/points, not both");
    for (const auto& item : split_list(*values)) s.values.push_back(parse_quantity("sweep.values", item, d));
  } else {
    if (!from) throw ConfigError("sweep.from", "missing required key");
    if (!to) throw ConfigError("sweep.to", "missing required key");
    if (!points) throw ConfigError("sweep.points", "missing required key");
    const double a = parse_quantity("sweep.from", *from, d);
    const double b = parse_quantity("sweep.to", *to, d);
    const int n = parse_int("sweep.points", *points);
    if (n < 1) throw ConfigError("sweep.points", "must be >= 1");
    const std::string sc = scale ? *scale : "linear";
    if (sc != "linear" && sc != "log") throw ConfigError("sweep.scale", "must be 'linear' or 'log'");
    if (sc == "log" && !(a > 0.0 && b > 0.0)) throw ConfigError("sweep.from", "log scale needs positive end points");
    for (int i = 0; i < n; ++i) {
      if (n == 1) {
        s.values.push_back(a);
        break;
      }
      const double t = static_cast<double>(i) / (n - 1);
      if (i == n - 1) s.values.push_back(b);
      else if (sc == "log") s.values.push_back(a * std::pow(b / a, t));
      else s.values.push_back((a * (n - 1 - i) + b * i) / (n - 1));
    }
  }
  const std::string key = values ? "sweep.values" : "sweep.from";
  if (s.values.empty()) throw ConfigError(key, "grid is empty");
  for (double v : s.values) {
    if (s.variable == "T" ? !(v >= 0.0) : !(v > 0.0))
      throw ConfigError(key, s.variable == "T" ? "must be >= 0" : "must be positive");
  }
  if (s.values.size() > 1) {
    const bool up = s.values[1] > s.values[0];
    for (std::size_t i = 1; i < s.values.size(); ++i)
      if (up ? !(s.values[i] > s.values[i - 1]) : !(s.values[i] < s.values[i - 1]))
        throw ConfigError(key, "grid must be strictly monotone");
  }
  return s;
}

inline Numerics parse_numerics(Entries& e, Geometry g) {
  Numerics n;
  switch (g) {
    case Geometry::Plates: n.spec = {1e-9, 0.0, 4000}; break;
    case Geometry::Sphere: n.spec = {1e-6, 0.0, 2000}; break;
    case Geometry::Corrugation: n.spec = {1e-6, 0.0, 2000}; break;
    case Geometry::OneDim: n.spec = {1e-10, 0.0, 2000}; break;
  }
  if (const auto v = e.take("numerics.rel_tol")) {
    n.spec.rel_tol = parse_quantity("numerics.rel_tol", *v, Dim::Number);
    if (!(n.spec.rel_tol > 0.0 && n.spec.rel_tol <= 1e-2)) throw ConfigError("numerics.rel_tol", "must lie in (0, 1e-2]");
  }
  if (const auto v = e.take("numerics.max_subdivisions")) {
    n.spec.max_subdivisions = parse_int("numerics.max_subdivisions", *v);
    if (n.spec.max_subdivisions < 1) throw ConfigError("numerics.max_subdivisions", "must be >= 1");
  }
  if (const auto v = e.take("numerics.max_matsubara_terms")) {
    n.max_matsubara_terms = parse_int("numerics.max_matsubara_terms", *v);
    if (n.max_matsubara_terms < 1) throw ConfigError("numerics.max_matsubara_terms", "must be >= 1");
  }
  if (const auto v = e.take("numerics.threads")) {
    n.threads = parse_int("numerics.threads", *v);
    if (n.threads < 1) throw ConfigError("numerics.threads", "must be >= 1");
  }
  const bool sphere = g == Geometry::Sphere;
  auto sphere_only = [&](const char* key) {
    if (!sphere && e.has(std::string("numerics.") + key))
      throw ConfigError(std::string("numerics.") + key, "only used by the sphere geometry");
  };
  for (const char* k : {"ell_max", "nodes", "m_tol", "derivative", "fd_step"}) sphere_only(k);
  if (const auto v = e.take("numerics.ell_max")) {
    if (*v != "auto") {
      n.ell_max = parse_int("numerics.ell_max", *v);
      if (n.ell_max < 1) throw ConfigError("numerics.ell_max", "must be >= 1 or 'auto'");
    }
  }
  if (const auto v = e.take("numerics.nodes")) {
    n.nodes = parse_int("numerics.nodes", *v);
    if (n.nodes < 0) throw ConfigError("numerics.nodes", "must be >= 0");
  }
  if (const auto v = e.take("numerics.m_tol")) {
    n.m_tol = parse_quantity("numerics.m_tol", *v, Dim::Number);
    if (!(n.m_tol > 0.0 && n.m_tol < 1.0)) throw ConfigError("numerics.m_tol", "must lie in (0, 1)");
  }
  if (const auto v = e.take("numerics.derivative")) {
    if (*v == "analytic") n.method = DerivativeMethod::Analytic;
    else if (*v == "fd") n.method = DerivativeMethod::FiniteDifference;
    else throw ConfigError("numerics.derivative", "must be 'analytic' or 'fd'");
  }
  if (const auto v = e.take("numerics.fd_step")) {
    n.fd_step = parse_quantity("numerics.fd_step", *v, Dim::Number);
    if (!(n.fd_step > 0.0 && n.fd_step < 0.5)) throw ConfigError("numerics.fd_step", "must lie in (0, 0.5)");
  }
  return n;
}

}  // namespace detail

/// Parses and validates a run configuration for `geometry`. `overrides` are
/// "section.key=value" strings applied over the text; relative table paths
/// resolve against `base_dir`.
inline RunConfig parse_config(std::string_view text, Geometry geometry, const std::vector<std::string>& overrides = {},
                              const std::filesystem::path& base_dir = {}) {
  auto e = detail::tokenize(text, overrides);
  RunConfig c;
  c.geometry = geometry;

  c.mirror1 = detail::parse_mirror(e, "mirror1", geometry, base_dir);
  c.mirror2 = e.has_section("mirror2") ? detail::parse_mirror(e, "mirror2", geometry, base_dir) : c.mirror1;

  c.sweep = detail::parse_sweep(e, geometry);
  const std::string& var = c.sweep.variable;
  const auto keys = detail::geometry_keys(geometry);
  for (const auto& k : keys) {
    if (!e.has("geometry." + k)) continue;
    if (k == var) throw ConfigError("geometry." + k, "also the sweep variable; remove one of the two");
    if (var == "x" && k == "L") throw ConfigError("geometry.L", "set by the sweep over x = L/R; remove it");
    if (var == "kCL" && k == "lambda_C") throw ConfigError("geometry.lambda_C", "set by the sweep over kCL; remove it");
  }
  auto quantity = [&](const std::string& k, detail::Dim d) -> std::optional<double> {
    const auto v = e.take("geometry." + k);
    if (!v) return std::nullopt;
    return detail::parse_quantity("geometry." + k, *v, d);
  };
  auto required = [&](const std::string& k, detail::Dim d) {
    const auto v = quantity(k, d);
    if (!v) throw ConfigError("geometry." + k, "missing required key");
    return *v;
  };
  auto positive = [&](const std::string& k, double v) {
    if (!(v > 0.0)) throw ConfigError("geometry." + k, "must be positive");
    return v;
  };
  using detail::Dim;
  const bool has_T = e.has("geometry.T");
  if (var != "L" && var != "x") c.L = positive("L", required("L", Dim::Length));
  if (var != "T" && has_T) {
    c.T = *quantity("T", Dim::Temperature);
    if (!(c.T >= 0.0)) throw ConfigError("geometry.T", "must be >= 0");
  }
  if (geometry == Geometry::Plates || geometry == Geometry::Corrugation) {
    if (const auto a = quantity("A", Dim::Area)) c.A = positive("A", *a);
  }
  if (geometry == Geometry::Sphere && var != "R") c.R = positive("R", required("R", Dim::Length));
  if (geometry == Geometry::Corrugation) {
    if (c.T != 0.0) throw ConfigError("geometry.T", "the corrugation kernel is evaluated at T = 0 only");
    const auto a1 = quantity("a1", Dim::Length), a2 = quantity("a2", Dim::Length), b = quantity("b", Dim::Length);
    c.corrugation.a1 = a1.value_or(0.0);
    c.corrugation.a2 = a2.value_or(0.0);
    c.corrugation.b = b.value_or(0.0);
    if (!(c.corrugation.a1 >= 0.0)) throw ConfigError("geometry.a1", "must be >= 0");
    if (!(c.corrugation.a2 >= 0.0)) throw ConfigError("geometry.a2", "must be >= 0");
    if (var != "lambda_C" && var != "kCL") c.corrugation.lambda_C = positive("lambda_C", required("lambda_C", Dim::Length));
  }
  c.numerics = detail::parse_numerics(e, geometry);

  if (const auto f = e.take("output.format")) {
    if (*f == "csv") c.format = Format::Csv;
    else if (*f == "json") c.format = Format::Json;
    else throw ConfigError("output.format", "must be 'csv' or 'json'");
  }
  if (const auto p = e.take("output.path")) c.output_path = *p;

  e.reject_leftovers();
  c.entries.assign(e.used().begin(), e.used().end());
  return c;
}

/// One sweep point. Numeric fields follow `SweepResult::columns`; NaN marks "not available".
struct Record {
  std::vector<double> values;
  std::string status = "ok";  // ok | convergence_failure | error
  std::string error;
  std::string note;
};

struct SweepResult {
  Geometry geometry = Geometry::Plates;
  std::vector<std::string> columns;
  std::vector<Record> records;

  int exit_code() const {
    for (const auto& r : records)
      if (r.status != "ok") return kPointFailure;
    return kSuccess;
  }
};

inline std::vector<std::string> columns_for(Geometry g) {
  switch (g) {
    case Geometry::Plates:
      return {"L_m",        "T_K",    "A_m2", "free_energy_J", "free_energy_per_area_J_m2", "pressure_Pa", "force_N",
              "m_max", "tail_estimate_J"};
    case Geometry::Sphere:
      return {"L_m",       "R_m",          "x",      "T_K",   "energy_J", "force_N",         "gradient_N_m",
              "pfa_force_N", "pfa_gradient_N_m", "rho_F", "rho_G", "ell_max", "m_max", "matsubara_terms",
              "tail_estimate_J"};
    case Geometry::Corrugation:
      return {"L_m",   "lambda_C_m", "k_C_rad_m", "kCL", "G_C_J_m4", "G_C0_J_m4", "r_C", "lateral_energy_J",
              "lateral_force_N", "perturbative", "rel_tol"};
    case Geometry::OneDim:
      return {"L_m", "T_K", "free_energy_J", "rel_tol"};
  }
  return {};
}

namespace detail {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct PointInputs {
  double L, T, R, lambda_C;
};

inline PointInputs point_inputs(const RunConfig& c, double v) {
  PointInputs p{c.L, c.T, c.R, c.corrugation.lambda_C};
  const auto& var = c.sweep.variable;
  if (var == "L") p.L = v;
  else if (var == "T") p.T = v;
  else if (var == "R") p.R = v;
  else if (var == "x") p.L = v * c.R;
  else if (var == "lambda_C") p.lambda_C = v;
  else if (var == "kCL") p.lambda_C = 2.0 * pi * p.L / v;
  return p;
}

inline std::function<double(double)> amplitude_1d(const MirrorSpec& m) {
  if (m.constant()) {
    const double r = m.r;
    return [r](double) { return r; };
  }
  const DielectricModel model = m.model;
  return [model](double xi) { return normal_incidence_amplitude(model, xi); };
}

inline Record plates_point(const RunConfig& c, const PointInputs& p) {
  Record r;
  r.values = {p.L, p.T, c.A, nan, nan, nan, nan, nan, nan};
  PlatesOptions o{c.numerics.spec, c.numerics.max_matsubara_terms};
  const auto res = plane_plane(c.mirror1.model, c.mirror2.model, {p.L, c.A, p.T}, o);
  r.values[3] = res.free_energy;
  r.values[4] = res.free_energy / c.A;
  r.values[5] = res.pressure;
  r.values[6] = res.pressure * c.A;
  r.values[7] = res.m_max;
  r.values[8] = res.tail_estimate;
  return r;
}

inline Record sphere_point(const RunConfig& c, const PointInputs& p) {
  Record r;
  const SphereGeometry g{p.L, p.R, p.T};
  r.values = {p.L, p.R, p.L / p.R, p.T, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan};
  MultipoleTruncation t = c.numerics.ell_max > 0 ? MultipoleTruncation{} : MultipoleTruncation::for_ratio(g.x());
  if (c.numerics.ell_max > 0) t.ell_max = c.numerics.ell_max;
  t.nodes = c.numerics.nodes;
  t.rel_tol = c.numerics.m_tol;
  SphereOptions o;
  o.spec = c.numerics.spec;
  o.method = c.numerics.method;
  o.fd_step = c.numerics.fd_step;
  o.max_matsubara_terms = c.numerics.max_matsubara_terms;
  const auto res = plane_sphere(g, c.mirror1.model, c.mirror2.model, t, o);
  const auto pfa = pfa_reference(g, c.mirror1.model, c.mirror2.model);
  r.values[4] = res.energy;
  r.values[5] = res.force;
  r.values[6] = res.gradient;
  r.values[7] = pfa.force;
  r.values[8] = pfa.gradient;
  r.values[9] = std::abs(res.force) / pfa.force;
  r.values[10] = res.gradient / pfa.gradient;
  r.values[11] = res.ell_max;
  r.values[12] = res.m_max;
  r.values[13] = res.matsubara_terms;
  r.values[14] = res.tail_estimate;
  for (const auto& w : res.warnings) r.note += (r.note.empty() ? "" : "; ") + w;
  return r;
}

inline Record corrugation_point(const RunConfig& c, const PointInputs& p, const std::function<double(double)>& g0) {
  Record r;
  CorrugationSpec s = c.corrugation;
  s.lambda_C = p.lambda_C;
  const double k = s.k_C();
  r.values = {p.L, s.lambda_C, k, k * p.L, nan, nan, nan, nan, nan, nan, c.numerics.spec.rel_tol};
  const double lp = std::min(c.mirror1.lambda_p(), c.mirror2.lambda_p());
  r.values[9] = s.perturbative(p.L, lp) ? 1.0 : 0.0;
  if (r.values[9] == 0.0 && (s.a1 > 0.0 || s.a2 > 0.0))
    r.note = "amplitudes not small against min(lambda_C, lambda_P, L)/10";
  const double G = response_kernel(c.mirror1.model, c.mirror2.model, p.L, k, c.numerics.spec);
  r.values[4] = G;
  const double G0 = g0(p.L);
  r.values[5] = G0;
  r.values[6] = G / G0;
  r.values[7] = lateral_energy(s, G, c.A);
  r.values[8] = lateral_force(s, G, c.A);
  return r;
}

inline Record onedim_point(const RunConfig& c, const PointInputs& p) {
  Record r;
  r.values = {p.L, p.T, nan, c.numerics.spec.rel_tol};
  r.values[2] = free_energy_1d(amplitude_1d(c.mirror1), amplitude_1d(c.mirror2), p.L, p.T, c.numerics.spec);
  return r;
}

}  // namespace detail

/// Evaluates every grid point. Failures are recorded per point with their
/// cause; the order of `records` follows the grid.
inline SweepResult run(const RunConfig& c) {
  SweepResult out;
  out.geometry = c.geometry;
  out.columns = columns_for(c.geometry);
  const std::size_t n = c.sweep.values.size();
  out.records.resize(n);

  // G_C(0) depends on L only; computed once per distinct L, whichever worker gets there first.
  std::mutex g0_mutex;
  std::map<double, std::shared_future<double>> g0_cache;
  auto g0 = [&](double L) {
    std::promise<double> promise;
    std::shared_future<double> value;
    bool owner = false;
    {
      std::lock_guard lock(g0_mutex);
      auto [it, inserted] = g0_cache.try_emplace(L);
      if (inserted) it->second = promise.get_future().share();
      value = it->second;
      owner = inserted;
    }
    if (owner) {
      try {
        promise.set_value(response_kernel(c.mirror1.model, c.mirror2.model, L, 0.0, c.numerics.spec));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return value.get();
  };

  auto evaluate = [&](std::size_t i) {
    const auto p = detail::point_inputs(c, c.sweep.values[i]);
    const auto columns = out.columns.size();
    Record r;
    try {
      switch (c.geometry) {
        case Geometry::Plates: r = detail::plates_point(c, p); break;
        case Geometry::Sphere: r = detail::sphere_point(c, p); break;
        case Geometry::Corrugation: r = detail::corrugation_point(c, p, g0); break;
        case Geometry::OneDim: r = detail::onedim_point(c, p); break;
      }
    } catch (const ConvergenceError& e) {
      r = Record{};
      r.status = "convergence_failure";
      r.error = e.what();
    } catch (const std::exception& e) {
      r = Record{};
      r.status = "error";
      r.error = e.what();
    }
    if (r.values.size() != columns) {
      // keep the echoed inputs on failed points
      const auto echo = detail::point_inputs(c, c.sweep.values[i]);
      r.values.assign(columns, detail::nan);
      r.values[0] = echo.L;
      switch (c.geometry) {
        case Geometry::Plates: r.values[1] = echo.T, r.values[2] = c.A; break;
        case Geometry::Sphere: r.values[1] = echo.R, r.values[2] = echo.L / echo.R, r.values[3] = echo.T; break;
        case Geometry::Corrugation:
          r.values[1] = echo.lambda_C, r.values[2] = 2.0 * pi / echo.lambda_C;
          r.values[3] = r.values[2] * echo.L;
          break;
        case Geometry::OneDim: r.values[1] = echo.T; break;
      }
    }
    for (double& v : r.values) v += 0.0;  // no "-0" in the tables
    out.records[i] = std::move(r);
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(c.numerics.threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) evaluate(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) evaluate(i);
    });
  for (auto& t : pool) t.join();
  return out;
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Metadata describing a run. Volatile items (timestamps) are left to the caller.
inline Metadata describe(const RunConfig& c) {
  Metadata m = {{"tool", "casimir"}, {"version", kVersion}, {"geometry", geometry_name(c.geometry)}};
  for (const auto& [k, v] : c.entries) m.emplace_back(k, v);
  return m;
}

/// Shortest text that parses back to the same double; empty for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const SweepResult& r, const Metadata& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << ": " << detail::one_line(v) << '\n';
  for (const auto& col : r.columns) os << col << ',';
  os << "status,error,note\n";
  for (const auto& rec : r.records) {
    for (double v : rec.values) os << format_number(v) << ',';
    os << rec.status << ',' << detail::csv_field(rec.error) << ',' << detail::csv_field(rec.note) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const SweepResult& r, const Metadata& meta) {
  nlohmann::ordered_json j;
  auto& m = j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  j["columns"] = r.columns;
  auto& recs = j["records"] = nlohmann::ordered_json::array();
  for (const auto& rec : r.records) {
    nlohmann::ordered_json o;
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
      if (std::isnan(rec.values[i])) o[r.columns[i]] = nullptr;
      else o[r.columns[i]] = rec.values[i];
    }
    o["status"] = rec.status;
    o["error"] = rec.error;
    o["note"] = rec.note;
    recs.push_back(std::move(o));
  }
  return j;
}

inline void write_json(std::ostream& os, const SweepResult& r, const Metadata& meta) {
  os << to_json(r, meta).dump(2) << '\n';
}

inline void write(std::ostream& os, Format f, const SweepResult& r, const Metadata& meta) {
  if (f == Format::Json) write_json(os, r, meta);
  else write_csv(os, r, meta);
}

/// Short human-readable account of a finished sweep.
inline std::string summary(const SweepResult& r) {
  std::size_t ok = 0, conv = 0, err = 0;
  for (const auto& rec : r.records) {
    if (rec.status == "ok") ++ok;
    else if (rec.status == "convergence_failure") ++conv;
    else ++err;
  }
  std::ostringstream s;
  s << geometry_name(r.geometry) << ": " << r.records.size() << " points, " << ok << " ok";
  if (conv) s << ", " << conv << " convergence failures";
  if (err) s << ", " << err << " errors";
  s << '\n';
  for (std::size_t i = 0; i < r.records.size(); ++i)
    if (r.records[i].status != "ok") s << "  point " << i << ": " << r.records[i].error << '\n';
  return s.str();
}

}  // namespace casimir::cli

#pragma once

// Optical response of bulk mirrors at imaginary frequency xi and the
// specular (Fresnel) reflection amplitudes it induces.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "casimir/constants.hpp"
#include "casimir/error.hpp"

namespace casimir {

enum class Polarization { TE, TM };

/// Conduction-electron term omega_P^2 / (xi (xi + gamma)). gamma == 0 is the
/// lossless plasma limit.
struct DrudeTerm {
  double omega_p = 0.0;  // rad/s
  double gamma = 0.0;    // rad/s

  bool operator==(const DrudeTerm&) const = default;
};

/// Interband contribution sampled on a strictly increasing xi grid.
struct InterbandTable {
  std::vector<double> xi;   // rad/s
  std::vector<double> eps;  // >= 1

  bool operator==(const InterbandTable&) const = default;
};

class DielectricModel {
 public:
  enum class Kind { Perfect, Plasma, Drude, Tabulated };

  static DielectricModel perfect() { return DielectricModel(Kind::Perfect); }

  static DielectricModel plasma(double omega_p) {
    if (!(omega_p > 0.0) || !std::isfinite(omega_p))
      throw DomainError("plasma model: omega_P must be positive");
    DielectricModel m(Kind::Plasma);
    m.drude_ = DrudeTerm{omega_p, 0.0};
    return m;
  }

  /// Plasma model parameterized by the plasma wavelength lambda_P = 2 pi c / omega_P.
  static DielectricModel plasma_from_wavelength(double lambda_p) {
    if (!(lambda_p > 0.0)) throw DomainError("plasma model: lambda_P must be positive");
    return plasma(2.0 * pi * PhysicalConstants::c / lambda_p);
  }

  static DielectricModel drude(double omega_p, double gamma) {
    if (!(omega_p > 0.0) || !std::isfinite(omega_p))
      throw DomainError("Drude model: omega_P must be positive");
    if (!(gamma > 0.0)) throw DomainError("Drude model: gamma must be positive (use plasma for gamma = 0)");
    DielectricModel m(Kind::Drude);
    m.drude_ = DrudeTerm{omega_p, gamma};
    return m;
  }

  static DielectricModel tabulated(InterbandTable table, std::optional<DrudeTerm> conduction = {}) {
    const auto n = table.xi.size();
    if (n == 0 || n != table.eps.size())
      throw DomainError("tabulated model: table must be non-empty with matching columns");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(table.xi[i] > 0.0)) throw DomainError("tabulated model: xi samples must be positive");
      if (i > 0 && !(table.xi[i] > table.xi[i - 1]))
        throw DomainError("tabulated model: xi grid must be strictly increasing");
      if (!(table.eps[i] >= 1.0)) throw DomainError("tabulated model: epsilon_hat must be >= 1");
    }
    if (conduction) {
      if (!(conduction->omega_p > 0.0) || !(conduction->gamma >= 0.0))
        throw DomainError("tabulated model: invalid conduction term");
    }
    DielectricModel m(Kind::Tabulated);
    m.table_ = std::move(table);
    m.drude_ = conduction.value_or(DrudeTerm{});
    return m;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_perfect() const noexcept { return kind_ == Kind::Perfect; }
  bool has_conduction() const noexcept { return drude_.omega_p > 0.0; }
  const DrudeTerm& conduction() const noexcept { return drude_; }
  const InterbandTable& table() const noexcept { return table_; }

  /// Static conductivity sigma_0 = omega_P^2 / gamma (reduced units, rad/s);
  /// infinite for the plasma limit.
  double static_conductivity() const noexcept {
    if (!has_conduction()) return 0.0;
    if (drude_.gamma == 0.0) return std::numeric_limits<double>::infinity();
    return drude_.omega_p * drude_.omega_p / drude_.gamma;
  }

  /// Interband part epsilon_hat(i xi); identically 1 for the built-in metals.
  double interband(double xi) const {
    if (kind_ != Kind::Tabulated) return 1.0;
    const auto& xs = table_.xi;
    const auto& es = table_.eps;
    if (xi <= xs.front()) return es.front();
    if (xi > xs.back()) return 1.0;
    const auto hi = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), xi) - xs.begin());
    if (xs[hi] == xi) return es[hi];
    const std::size_t lo = hi - 1;
    const double t = std::log(xi / xs[lo]) / std::log(xs[hi] / xs[lo]);
    return std::exp((1.0 - t) * std::log(es[lo]) + t * std::log(es[hi]));
  }

  /// Value of epsilon_hat as xi -> 0.
  double interband_static() const { return kind_ == Kind::Tabulated ? table_.eps.front() : 1.0; }

  bool operator==(const DielectricModel&) const = default;

 private:
  explicit DielectricModel(Kind k) : kind_(k) {}

  Kind kind_;
  DrudeTerm drude_{};
  InterbandTable table_{};
};

/// epsilon(i xi) = epsilon_hat(i xi) + omega_P^2 / (xi (xi + gamma)).
/// Perfect mirrors return +infinity.
inline double permittivity(const DielectricModel& model, double xi) {
  if (!(xi >= 0.0)) throw DomainError("permittivity: xi must be >= 0");
  if (model.is_perfect()) return std::numeric_limits<double>::infinity();
  double eps = model.interband(xi);
  if (model.has_conduction()) {
    if (xi == 0.0) throw DomainError("permittivity: conduction term diverges at xi = 0");
    const auto& d = model.conduction();
    eps += d.omega_p * d.omega_p / (xi * (xi + d.gamma));
  }
  return eps;
}

/// Transverse plane-wave channel (k, p) at imaginary frequency.
struct TransverseMode {
  double k = 0.0;  // rad/m
  Polarization polarization = Polarization::TE;

  /// kappa = sqrt(k^2 + xi^2/c^2)
  double kappa(double xi) const {
    const double K = xi / PhysicalConstants::c;
    return std::hypot(k, K);
  }
};

struct FresnelPair {
  double te;
  double tm;
};

namespace detail {

/// xi = 0 limit of the bulk Fresnel amplitudes, evaluated analytically.
inline FresnelPair fresnel_static(const DielectricModel& model, double k) {
  if (model.is_perfect()) return {-1.0, 1.0};
  if (model.has_conduction()) {
    const auto& d = model.conduction();
    if (d.gamma > 0.0) return {0.0, 1.0};  // finite sigma_0: TE response vanishes
    const double kp = d.omega_p / PhysicalConstants::c;
    const double kt = std::hypot(k, kp);
    // (k - kt)/(k + kt) without cancellation
    return {-(kp * kp) / ((k + kt) * (k + kt)), 1.0};
  }
  const double e0 = model.interband_static();
  return {0.0, (e0 - 1.0) / (e0 + 1.0)};
}

}  // namespace detail

/// Specular reflection amplitudes of a bulk mirror at imaginary frequency.
///
/// r_TE = (kappa - kappa_t)/(kappa + kappa_t), r_TM = (eps kappa - kappa_t)/(eps kappa + kappa_t),
/// kappa_t = sqrt(k^2 + eps xi^2/c^2). Both numerators are rearranged so the
/// difference is never formed explicitly. xi = 0 uses the analytic limit.
inline FresnelPair fresnel(const DielectricModel& model, double xi, double k) {
  if (!(xi >= 0.0)) throw DomainError("fresnel: xi must be >= 0");
  if (!(k >= 0.0)) throw DomainError("fresnel: k must be >= 0");
  if (model.is_perfect()) return {-1.0, 1.0};
  if (xi == 0.0) return detail::fresnel_static(model, k);

  const double eps = permittivity(model, xi);
  const double K = xi / PhysicalConstants::c;
  const double kappa = std::hypot(k, K);
  const double em1 = eps - 1.0;
  const double kt = std::sqrt(kappa * kappa + em1 * K * K);
  const double te = -em1 * K * K / ((kappa + kt) * (kappa + kt));
  const double tm = em1 * ((eps + 1.0) * kappa * kappa - K * K) / ((eps * kappa + kt) * (eps * kappa + kt));
  return {te, tm};
}

inline double fresnel(const DielectricModel& model, double xi, const TransverseMode& mode) {
  const auto r = fresnel(model, xi, mode.k);
  return mode.polarization == Polarization::TE ? r.te : r.tm;
}

/// Reads a two-column `xi_rad_per_s epsilon_hat` table. `#` starts a comment.
inline InterbandTable parse_interband_table(std::istream& in) {
  InterbandTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double xi = 0.0, eps = 0.0;
    if (!(row >> xi)) {
      row.clear();
      std::string rest;
      if (row >> rest) throw ParseError("expected two numeric columns", lineno);
      continue;  // blank line
    }
    if (!(row >> eps)) throw ParseError("expected two numeric columns", lineno);
    std::string extra;
    if (row >> extra) throw ParseError("unexpected trailing field '" + extra + "'", lineno);
    if (!(xi > 0.0) || !std::isfinite(xi)) throw ParseError("xi must be positive", lineno);
    if (!t.xi.empty() && !(xi > t.xi.back())) throw ParseError("xi grid must be strictly increasing", lineno);
    if (!(eps >= 1.0) || !std::isfinite(eps)) throw ParseError("epsilon_hat must be >= 1", lineno);
    t.xi.push_back(xi);
    t.eps.push_back(eps);
  }
  if (t.xi.empty()) throw ParseError("table contains no data rows", 0);
  return t;
}

/// Tabulated interband data plus an optional conduction term.
inline DielectricModel load_tabulated(std::istream& in, std::optional<DrudeTerm> conduction = {}) {
  return DielectricModel::tabulated(parse_interband_table(in), conduction);
}

}  // namespace casimir

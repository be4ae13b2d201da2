#pragma once

// Frequency aggregation: Matsubara sums at T > 0 (m = 0 term half-weighted)
// and imaginary-frequency integrals at T = 0.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "casimir/constants.hpp"
#include "casimir/error.hpp"
#include "casimir/quadrature.hpp"

namespace casimir {

/// xi_m = 2 pi m k_B T / hbar.
inline double matsubara_frequency(double T, int m) {
  if (!(T > 0.0)) throw DomainError("matsubara_frequency: T must be > 0");
  if (m < 0) throw DomainError("matsubara_frequency: m must be >= 0");
  return 2.0 * pi * m * PhysicalConstants::k_B * T / PhysicalConstants::hbar;
}

struct MatsubaraGrid {
  double T = 0.0;
  std::vector<double> xi;  // xi[0] = 0

  int m_max() const { return static_cast<int>(xi.size()) - 1; }
};

inline MatsubaraGrid matsubara_grid(double T, int m_max) {
  if (m_max < 1) throw DomainError("matsubara_grid: m_max must be >= 1");
  MatsubaraGrid g{T, {}};
  g.xi.reserve(m_max + 1);
  for (int m = 0; m <= m_max; ++m) g.xi.push_back(matsubara_frequency(T, m));
  return g;
}

struct ThermalSumResult {
  double value = 0.0;          // k_B T sum' f(xi_m)
  int m_max = 0;               // last index included
  double tail_estimate = 0.0;  // geometric extrapolation of the omitted terms, same units as value
};

struct ThermalSumResultN {
  std::vector<double> value;
  int m_max = 0;
  std::vector<double> tail_estimate;
};

struct ThermalSumOptions {
  QuadratureSpec spec{};
  int max_terms = 100000;
  int min_terms = 2;  // terms with m >= 1 always included
};

namespace detail {

inline double geometric_tail(double last, double previous) {
  if (last == 0.0) return 0.0;
  const double q = std::abs(last / previous);
  if (!(q < 1.0)) return std::numeric_limits<double>::infinity();
  return std::abs(last) * q / (1.0 - q);
}

}  // namespace detail

/// k_B T [ f(0)/2 + sum_{m>=1} f(xi_m) ], summed in ascending m.
///
/// Truncation: stop once two consecutive terms are below rel_tol times the
/// accumulated magnitude (or below the absolute floor) and the geometric
/// extrapolation |t_M| q/(1-q) of the omitted terms, q the last term ratio,
/// is below the same threshold. The second condition matters when T is small
/// and many terms of similar size remain.
template <class F>
ThermalSumResult thermal_sum(const F& f, double T, const ThermalSumOptions& opt = {}) {
  if (!(T > 0.0)) throw DomainError("thermal_sum: T must be > 0");
  opt.spec.validate();
  const double kT = PhysicalConstants::k_B * T;
  const double step = matsubara_frequency(T, 1);

  double sum = 0.5 * f(0.0);
  double prev = sum;
  int quiet = 0;
  for (int m = 1; m <= opt.max_terms; ++m) {
    const double term = f(step * m);
    sum += term;
    const double thresh = std::max(opt.spec.rel_tol * std::abs(sum), opt.spec.abs_floor);
    const double tail = detail::geometric_tail(term, prev);
    quiet = (std::abs(term) <= thresh && tail <= thresh) ? quiet + 1 : 0;
    if (m >= opt.min_terms && quiet >= 2) return {kT * sum, m, kT * tail};
    prev = term;
  }
  throw ConvergenceError("thermal_sum: no convergence within " + std::to_string(opt.max_terms) + " terms",
                         kT * sum, kT * std::abs(prev));
}

/// Vector form of thermal_sum: all components share one truncation index,
/// which is reached once every component satisfies the scalar criterion.
template <class F>
ThermalSumResultN thermal_sum_vec(const F& f, double T, const ThermalSumOptions& opt = {}) {
  if (!(T > 0.0)) throw DomainError("thermal_sum: T must be > 0");
  opt.spec.validate();
  const double kT = PhysicalConstants::k_B * T;
  const double step = matsubara_frequency(T, 1);

  std::vector<double> sum = f(0.0);
  for (auto& v : sum) v *= 0.5;
  std::vector<double> prev = sum, tail(sum.size(), 0.0);
  int quiet = 0;
  for (int m = 1; m <= opt.max_terms; ++m) {
    const auto term = f(step * m);
    bool small = true;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += term[i];
      const double thresh = std::max(opt.spec.rel_tol * std::abs(sum[i]), opt.spec.abs_floor);
      tail[i] = detail::geometric_tail(term[i], prev[i]);
      small = small && std::abs(term[i]) <= thresh && tail[i] <= thresh;
    }
    quiet = small ? quiet + 1 : 0;
    prev = term;
    if (m >= opt.min_terms && quiet >= 2) {
      for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] *= kT;
        tail[i] *= kT;
      }
      return {sum, m, tail};
    }
  }
  throw ConvergenceError("thermal_sum: no convergence within " + std::to_string(opt.max_terms) + " terms",
                         kT * sum.front(), kT * std::abs(prev.front()));
}

/// Sums over a caller-fixed number of Matsubara terms (m = 0..m_max), used
/// when several related sums must share one truncation.
template <class F>
double thermal_sum_fixed(const F& f, double T, int m_max) {
  const double kT = PhysicalConstants::k_B * T;
  const double step = matsubara_frequency(T, 1);
  double sum = 0.5 * f(0.0);
  for (int m = 1; m <= m_max; ++m) sum += f(step * m);
  return kT * sum;
}

struct ZeroTemperatureResult {
  double value = 0.0;  // hbar/(2 pi) int f dxi
  double error = 0.0;
  int evaluations = 0;
};

/// hbar int_0^inf f(xi) dxi / (2 pi).
///
/// `xi_scale` is the frequency where the integrand lives, typically c/(2L);
/// the integration runs in the compactified variable s with xi = xi_scale s/(1-s).
template <class F>
ZeroTemperatureResult zero_t_integral(const F& f, double xi_scale, const QuadratureSpec& spec = {},
                                      std::vector<Panel>* panels = nullptr) {
  spec.validate();
  if (!(xi_scale > 0.0)) throw DomainError("zero_t_integral: xi_scale must be > 0");
  const auto r = integrate_semi_infinite(f, xi_scale, spec, panels);
  const double pref = PhysicalConstants::hbar / (2.0 * pi);
  return {pref * r.value, pref * r.error, r.evaluations};
}

}  // namespace casimir

#pragma once

// Specular plane-plane Casimir free energy and pressure (Lifshitz formula in
// its Matsubara form), the ideal-mirror law, and the 1d two-mirror cavity.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "casimir/constants.hpp"
#include "casimir/dielectric.hpp"
#include "casimir/error.hpp"
#include "casimir/matsubara.hpp"
#include "casimir/quadrature.hpp"

namespace casimir {

struct PlateGeometry {
  double L = 0.0;  // gap, m
  double A = 1.0;  // area, m^2
  double T = 0.0;  // K

  void validate() const {
    if (!(L > 0.0)) throw DomainError("plate geometry: L must be positive");
    if (!(A > 0.0)) throw DomainError("plate geometry: A must be positive");
    if (!(T >= 0.0)) throw DomainError("plate geometry: T must be >= 0");
  }
};

struct IdealCasimir {
  double force;   // N, magnitude hbar c pi^2 A / (240 L^4)
  double energy;  // J, -hbar c pi^2 A / (720 L^3)
};

inline IdealCasimir ideal_casimir(double L, double A) {
  if (!(L > 0.0) || !(A > 0.0)) throw DomainError("ideal_casimir: L and A must be positive");
  const double hc = PhysicalConstants::hbar * PhysicalConstants::c;
  return {hc * pi * pi * A / (240.0 * L * L * L * L), -hc * pi * pi * A / (720.0 * L * L * L)};
}

struct PlanePlaneResult {
  double free_energy = 0.0;  // J
  double pressure = 0.0;     // Pa, negative = attractive
  double free_energy_te = 0.0;
  double free_energy_tm = 0.0;
  int m_max = 0;  // Matsubara terms used (0 at T = 0)
  double tail_estimate = 0.0;
};

struct PlatesOptions {
  QuadratureSpec spec{1e-9, 0.0, 4000};
  int max_matsubara_terms = 100000;
};

namespace detail {

/// Dimensionless u = kappa L integrals at fixed xi:
///   energy:   int_{u0}^{u0+50} u ln(1 - r1 r2 e^{-2u}) du
///   pressure: int_{u0}^{u0+50} u * 2u r1 r2 e^{-2u} / d du
/// The cutoff leaves the integrand at e^{-100} of its value at u0.
struct PlaneIntegrand {
  const DielectricModel& m1;
  const DielectricModel& m2;
  double L;
  QuadratureSpec spec;

  static constexpr double kCutoff = 50.0;

  double u0(double xi) const { return xi * L / PhysicalConstants::c; }

  double rr(double xi, double u, Polarization p) const {
    const double K = xi / PhysicalConstants::c;
    const double kappa = u / L;
    const double k = std::sqrt(std::max(0.0, kappa * kappa - K * K));
    const auto a = fresnel(m1, xi, k);
    const auto b = fresnel(m2, xi, k);
    return p == Polarization::TE ? a.te * b.te : a.tm * b.tm;
  }

  double log_d(double xi, Polarization p) const {
    const double lo = u0(xi);
    auto g = [&](double u) { return u * std::log1p(-rr(xi, u, p) * std::exp(-2.0 * u)); };
    return integrate_adaptive(g, lo, lo + kCutoff, spec).value;
  }

  double dlog_d(double xi, Polarization p) const {
    const double lo = u0(xi);
    auto g = [&](double u) {
      const double x = rr(xi, u, p) * std::exp(-2.0 * u);
      return 2.0 * u * u * x / (1.0 - x);
    };
    return integrate_adaptive(g, lo, lo + kCutoff, spec).value;
  }
};

inline std::string xi_context(double xi) { return " (at xi = " + std::to_string(xi) + " rad/s)"; }

template <class F>
double with_context(double xi, const F& f) {
  try {
    return f();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("k-integral: ") + e.what() + xi_context(xi), e.partial(),
                           e.tail_estimate());
  }
}

}  // namespace detail

/// Free energy and pressure between two bulk mirrors.
///
/// F = A sum_p k_B T sum'_m (1/2 pi) int kappa dkappa ln(1 - r1 r2 e^{-2 kappa L}),
/// with the Matsubara sum replaced by hbar int dxi / 2 pi at T = 0. The
/// pressure uses d/dL ln d = 2 kappa r1 r2 e^{-2 kappa L} / d inside the integrand.
inline PlanePlaneResult plane_plane(const DielectricModel& m1, const DielectricModel& m2,
                                    const PlateGeometry& geom, const PlatesOptions& opt = {}) {
  geom.validate();
  opt.spec.validate();
  QuadratureSpec inner = opt.spec;
  inner.rel_tol = std::max(opt.spec.rel_tol * 1e-2, 1e-13);
  const detail::PlaneIntegrand in{m1, m2, geom.L, inner};
  const double L2 = geom.L * geom.L;
  const double per_area = 1.0 / (2.0 * pi * L2);  // (1/2pi) int kappa dkappa = (1/2pi L^2) int u du

  auto te = [&](double xi) {
    return detail::with_context(xi, [&] { return per_area * in.log_d(xi, Polarization::TE); });
  };
  auto tm = [&](double xi) {
    return detail::with_context(xi, [&] { return per_area * in.log_d(xi, Polarization::TM); });
  };
  auto dp = [&](double xi) {
    return detail::with_context(xi, [&] {
      return per_area / geom.L * (in.dlog_d(xi, Polarization::TE) + in.dlog_d(xi, Polarization::TM));
    });
  };

  PlanePlaneResult out;
  if (geom.T == 0.0) {
    const double scale = PhysicalConstants::c / (2.0 * geom.L);
    out.free_energy_te = geom.A * zero_t_integral(te, scale, opt.spec).value;
    out.free_energy_tm = geom.A * zero_t_integral(tm, scale, opt.spec).value;
    out.pressure = -zero_t_integral(dp, scale, opt.spec).value;
  } else {
    ThermalSumOptions ts{opt.spec, opt.max_matsubara_terms};
    const auto a = thermal_sum(te, geom.T, ts);
    const auto b = thermal_sum(tm, geom.T, ts);
    const auto c = thermal_sum(dp, geom.T, ts);
    out.free_energy_te = geom.A * a.value;
    out.free_energy_tm = geom.A * b.value;
    out.pressure = -c.value;
    out.m_max = std::max({a.m_max, b.m_max, c.m_max});
    out.tail_estimate = geom.A * (a.tail_estimate + b.tail_estimate);
  }
  out.free_energy = out.free_energy_te + out.free_energy_tm;
  return out;
}

inline double lifshitz_free_energy(const DielectricModel& m1, const DielectricModel& m2,
                                   const PlateGeometry& geom, const PlatesOptions& opt = {}) {
  return plane_plane(m1, m2, geom, opt).free_energy;
}

inline double casimir_pressure(const DielectricModel& m1, const DielectricModel& m2, const PlateGeometry& geom,
                               const PlatesOptions& opt = {}) {
  return plane_plane(m1, m2, geom, opt).pressure;
}

/// Product r1(i xi) r2(i xi) of two 1d mirror amplitudes.
using AmplitudeProduct = std::function<double(double xi)>;

/// Normal-incidence amplitude (sqrt(eps) - 1)/(sqrt(eps) + 1) of a bulk mirror,
/// the natural input of the 1d cavity. xi = 0 takes the limit xi -> 0.
inline double normal_incidence_amplitude(const DielectricModel& model, double xi) {
  if (!(xi >= 0.0)) throw DomainError("normal_incidence_amplitude: xi must be >= 0");
  if (model.is_perfect() || (xi == 0.0 && model.has_conduction())) return 1.0;
  const double n = std::sqrt(xi == 0.0 ? model.interband_static() : permittivity(model, xi));
  return (n - 1.0) / (n + 1.0);
}

/// 1d cavity between two scatterers: F = k_B T sum'_m ln(1 - r1 r2 e^{-2 xi_m L / c}),
/// or hbar int dxi/2pi ln d at T = 0.
inline double free_energy_1d(const std::function<double(double)>& r1, const std::function<double(double)>& r2,
                             double L, double T, const QuadratureSpec& spec = {1e-10, 0.0, 2000}) {
  if (!(L > 0.0)) throw DomainError("free_energy_1d: L must be positive");
  if (!(T >= 0.0)) throw DomainError("free_energy_1d: T must be >= 0");
  auto log_d = [&](double xi) {
    const double rr = r1(xi) * r2(xi);
    if (std::abs(rr) > 1.0) throw DomainError("free_energy_1d: |r1 r2| must not exceed 1");
    return std::log1p(-rr * std::exp(-2.0 * xi * L / PhysicalConstants::c));
  };
  if (T == 0.0) return zero_t_integral(log_d, PhysicalConstants::c / (2.0 * L), spec).value;
  return thermal_sum(log_d, T, ThermalSumOptions{spec}).value;
}

}  // namespace casimir

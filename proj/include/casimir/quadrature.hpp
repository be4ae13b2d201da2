#pragma once

// Deterministic quadrature rules used by the frequency and wavevector
// integrals: globally adaptive Gauss-Kronrod (7/15) on finite intervals and
// Gauss-Laguerre rules for integrands carrying an exp(-t) envelope.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "casimir/error.hpp"

namespace casimir {

/// Tolerances for adaptive quadrature and truncated sums.
struct QuadratureSpec {
  double rel_tol = 1e-8;
  double abs_floor = 0.0;  // absolute error floor, in the integrand's units
  int max_subdivisions = 2000;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2))
      throw DomainError("quadrature tolerance must lie in (0, 1e-2]");
    if (!(abs_floor >= 0.0)) throw DomainError("quadrature absolute floor must be >= 0");
    if (max_subdivisions < 1) throw DomainError("max_subdivisions must be >= 1");
  }
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  int panels = 0;
};

struct Panel {
  double a, b, value, error;
};

namespace detail {

// Kronrod 15-point abscissae/weights with the embedded 7-point Gauss weights.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
Panel gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    rk += kWgk[j] * s;
    if (j % 2 == 1) rg += kWg[j / 2] * s;
  }
  return {a, b, rk * h, std::abs((rk - rg) * h)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over [a, b].
///
/// The panel with the largest error estimate is bisected until the summed
/// error falls below max(rel_tol |I|, abs_floor). Ties are broken by position,
/// so the subdivision sequence depends only on the integrand values.
template <class F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, const QuadratureSpec& spec,
                                    std::vector<Panel>* panels_out = nullptr) {
  std::vector<Panel> panels{detail::gk15(f, a, b)};
  int evals = 15;
  auto total = [&] {
    double v = 0.0, e = 0.0;
    for (const auto& p : panels) {
      v += p.value;
      e += p.error;
    }
    return std::pair{v, e};
  };
  auto [value, error] = total();
  while (error > std::max(spec.rel_tol * std::abs(value), spec.abs_floor)) {
    if (static_cast<int>(panels.size()) >= spec.max_subdivisions)
      throw ConvergenceError("adaptive quadrature exceeded " + std::to_string(spec.max_subdivisions) +
                                 " panels",
                             value, error);
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& x, const Panel& y) { return x.error < y.error; });
    const double mid = 0.5 * (worst->a + worst->b);
    const Panel left = detail::gk15(f, worst->a, mid);
    const Panel right = detail::gk15(f, mid, worst->b);
    *worst = left;
    panels.insert(worst + 1, right);
    evals += 30;
    std::tie(value, error) = total();
    if (!std::isfinite(value)) throw ConvergenceError("adaptive quadrature: non-finite integrand", value, error);
  }
  if (panels_out) *panels_out = panels;
  return {value, error, evals, static_cast<int>(panels.size())};
}

/// Re-applies a fixed panel partition (from a previous adaptive run) to a new
/// integrand. Used when several nearby integrands must share identical
/// discretization, e.g. for finite differences in a geometric parameter.
template <class F>
double integrate_on_panels(const F& f, const std::vector<Panel>& panels) {
  double v = 0.0;
  for (const auto& p : panels) v += detail::gk15(f, p.a, p.b).value;
  return v;
}

/// Integral of f over [0, inf) through the map t = s/(1-s), s in [0, 1).
/// `scale` sets where the map puts s = 1/2.
template <class F>
QuadratureResult integrate_semi_infinite(const F& f, double scale, const QuadratureSpec& spec,
                                         std::vector<Panel>* panels_out = nullptr) {
  auto g = [&](double s) {
    const double om = 1.0 - s;
    const double t = scale * s / om;
    return f(t) * scale / (om * om);
  };
  return integrate_adaptive(g, 0.0, 1.0, spec, panels_out);
}

template <class F>
double integrate_semi_infinite_on_panels(const F& f, double scale, const std::vector<Panel>& panels) {
  auto g = [&](double s) {
    const double om = 1.0 - s;
    return f(scale * s / om) * scale / (om * om);
  };
  return integrate_on_panels(g, panels);
}

namespace detail {

struct PanelN {
  double a, b;
  std::vector<double> value, error;
};

template <class F>
PanelN gk15_vec(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  std::vector<double> fc = f(c);
  const std::size_t n = fc.size();
  std::vector<double> rk(n), rg(n);
  for (std::size_t i = 0; i < n; ++i) {
    rk[i] = fc[i] * kWgk[7];
    rg[i] = fc[i] * kWg[3];
  }
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const auto lo = f(c - dx);
    const auto hi = f(c + dx);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = lo[i] + hi[i];
      rk[i] += kWgk[j] * s;
      if (j % 2 == 1) rg[i] += kWg[j / 2] * s;
    }
  }
  PanelN p{a, b, std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    p.value[i] = rk[i] * h;
    p.error[i] = std::abs((rk[i] - rg[i]) * h);
  }
  return p;
}

}  // namespace detail

struct QuadratureResultN {
  std::vector<double> value;
  std::vector<double> error;
  int evaluations = 0;
};

/// Adaptive integration of a vector-valued integrand on one shared partition.
/// Every component must meet max(rel_tol |I_i|, abs_floor); the panel
/// contributing most to the worst component is bisected next.
template <class F>
QuadratureResultN integrate_adaptive_vec(const F& f, double a, double b, const QuadratureSpec& spec) {
  std::vector<detail::PanelN> panels{detail::gk15_vec(f, a, b)};
  const std::size_t n = panels.front().value.size();
  int evals = 15;
  QuadratureResultN out;
  for (;;) {
    out.value.assign(n, 0.0);
    out.error.assign(n, 0.0);
    for (const auto& p : panels)
      for (std::size_t i = 0; i < n; ++i) {
        out.value[i] += p.value[i];
        out.error[i] += p.error[i];
      }
    std::size_t worst_c = 0;
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(out.value[i]))
        throw ConvergenceError("adaptive quadrature: non-finite integrand", out.value[i], out.error[i]);
      const double thresh = std::max(spec.rel_tol * std::abs(out.value[i]), spec.abs_floor);
      const double ratio = thresh > 0.0 ? out.error[i] / thresh : (out.error[i] > 0.0 ? 1e300 : 0.0);
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst_c = i;
      }
    }
    if (worst_ratio <= 1.0) break;
    if (static_cast<int>(panels.size()) >= spec.max_subdivisions)
      throw ConvergenceError("adaptive quadrature exceeded " + std::to_string(spec.max_subdivisions) + " panels",
                             out.value[worst_c], out.error[worst_c]);
    auto worst = std::max_element(panels.begin(), panels.end(), [&](const auto& x, const auto& y) {
      return x.error[worst_c] < y.error[worst_c];
    });
    const double mid = 0.5 * (worst->a + worst->b);
    auto left = detail::gk15_vec(f, worst->a, mid);
    auto right = detail::gk15_vec(f, mid, worst->b);
    *worst = std::move(left);
    panels.insert(worst + 1, std::move(right));
    evals += 30;
  }
  out.evaluations = evals;
  return out;
}

template <class F>
QuadratureResultN integrate_semi_infinite_vec(const F& f, double scale, const QuadratureSpec& spec) {
  auto g = [&](double s) {
    const double om = 1.0 - s;
    auto v = f(scale * s / om);
    const double jac = scale / (om * om);
    for (auto& x : v) x *= jac;
    return v;
  };
  return integrate_adaptive_vec(g, 0.0, 1.0, spec);
}

/// n-point Gauss-Laguerre rule for int_0^inf exp(-t) f(t) dt.
struct LaguerreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch eigenvalues refined by Newton steps on the scaled recurrence
/// exp(-t/2) L_n(t), which keeps the iteration finite for large n.
inline LaguerreRule gauss_laguerre(int n) {
  if (n < 1) throw DomainError("gauss_laguerre: n must be >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = 2.0 * i + 1.0;
    if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = i + 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  LaguerreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);

  // returns {exp(-t/2) L_n(t), exp(-t/2) L_{n-1}(t)}
  auto eval = [n](double t) {
    double p0 = std::exp(-0.5 * t), p1 = p0 * (1.0 - t);
    if (n == 1) return std::pair{p1, p0};
    for (int k = 1; k < n; ++k) {
      const double p2 = ((2.0 * k + 1.0 - t) * p1 - k * p0) / (k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, p0};
  };
  for (int i = 0; i < n; ++i) {
    double t = es.eigenvalues()(i);
    for (int it = 0; it < 8; ++it) {
      auto [ln, lnm1] = eval(t);
      // t L_n'(t) = n (L_n - L_{n-1}); exp factor cancels in the ratio
      const double dln = n * (ln - lnm1) / t;
      const double step = ln / dln;
      t -= step;
      if (std::abs(step) <= 1e-15 * t) break;
    }
    auto [ln, lnm1] = eval(t);
    // w = t / ((n+1)^2 L_{n+1}(t)^2), L_{n+1}(t) = -n L_{n-1}(t) / (n+1) at a root of L_n
    const double lnp1 = -n * lnm1 / (n + 1.0);
    rule.nodes[i] = t;
    // lnp1 carries exp(-t/2), so exp(-t) / lnp1^2 restores the unscaled weight
    rule.weights[i] = std::exp(std::log(t) - t - 2.0 * std::log(std::abs(lnp1)) - 2.0 * std::log(n + 1.0));
  }
  return rule;
}

}  // namespace casimir

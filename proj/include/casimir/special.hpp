#pragma once

// Log-scaled special functions for the multipole basis at imaginary frequency:
// modified spherical Bessel functions i_l, k_l (with k_0(x) = exp(-x)/x),
// Mie amplitudes of a homogeneous sphere, and associated Legendre functions
// evaluated off the cut (X >= 1), without Condon-Shortley phase.

#include <cmath>
#include <limits>
#include <vector>

#include "casimir/dielectric.hpp"
#include "casimir/error.hpp"

namespace casimir {

/// Signed number stored as sign * exp(log_abs).
struct LogValue {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 0;

  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
  static LogValue from(double v) {
    if (v == 0.0) return {};
    return {std::log(std::abs(v)), v > 0.0 ? 1 : -1};
  }
};

/// Ratios and logarithms of i_l(x), k_l(x) for l = 0..lmax.
struct SphericalBessel {
  double x = 0.0;
  std::vector<double> r;      // r[l] = i_l / i_{l-1}, l >= 1
  std::vector<double> q;      // q[l] = k_l / k_{l-1}, l >= 1
  std::vector<double> log_i;  // log i_l
  std::vector<double> log_k;  // log k_l

  /// psi'/psi for psi(x) = x i_l(x)
  double dlog_psi(int l) const { return 1.0 / r[l] - l / x; }
  /// zeta'/zeta for zeta(x) = x k_l(x)
  double dlog_zeta(int l) const { return -1.0 / q[l] - l / x; }
};

namespace detail {

/// i_l / i_{l-1} from the continued fraction 1/((2l+1)/x + 1/((2l+3)/x + ...)),
/// modified Lentz evaluation.
inline double bessel_i_ratio_cf(int l, double x) {
  constexpr double tiny = 1e-300;
  double f = (2.0 * l + 1.0) / x;
  double C = f, D = 0.0;
  for (int j = 1; j < 100000; ++j) {
    const double b = (2.0 * (l + j) + 1.0) / x;
    D = b + D;
    D = D == 0.0 ? 1.0 / tiny : 1.0 / D;
    C = b + 1.0 / C;
    if (C == 0.0) C = tiny;
    const double delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) return 1.0 / f;
  }
  throw ConvergenceError("Bessel continued fraction did not converge", 1.0 / f, 0.0);
}

}  // namespace detail

/// Downward recurrence for the regular ratios (started from the continued
/// fraction), upward recurrence for the irregular ones. All magnitudes are
/// carried as logarithms, so no overflow occurs for any finite x > 0.
inline SphericalBessel spherical_bessel(double x, int lmax) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("spherical_bessel: argument must be positive");
  if (lmax < 0) throw DomainError("spherical_bessel: lmax must be >= 0");
  SphericalBessel b;
  b.x = x;
  b.r.assign(lmax + 1, 0.0);
  b.q.assign(lmax + 1, 0.0);
  b.log_i.assign(lmax + 1, 0.0);
  b.log_k.assign(lmax + 1, 0.0);
  if (lmax >= 1) {
    b.r[lmax] = detail::bessel_i_ratio_cf(lmax, x);
    for (int l = lmax - 1; l >= 1; --l) b.r[l] = 1.0 / ((2.0 * l + 1.0) / x + b.r[l + 1]);
    b.q[1] = (1.0 + x) / x;
    for (int l = 1; l < lmax; ++l) b.q[l + 1] = 1.0 / b.q[l] + (2.0 * l + 1.0) / x;
  }
  // i_0 = sinh(x)/x, k_0 = exp(-x)/x
  b.log_i[0] = x + std::log(-std::expm1(-2.0 * x) / (2.0 * x));
  b.log_k[0] = -x - std::log(x);
  for (int l = 1; l <= lmax; ++l) {
    b.log_i[l] = b.log_i[l - 1] + std::log(b.r[l]);
    b.log_k[l] = b.log_k[l - 1] + std::log(b.q[l]);
  }
  return b;
}

/// Mie amplitudes at imaginary frequency in the standing/outgoing basis
/// (x i_l, x k_l). a is the electric (TM-like) amplitude, b the magnetic one;
/// for a perfect sphere a_1 -> 2y^3/3 and b_1 -> -y^3/3 as y -> 0.
struct MieAmplitudes {
  std::vector<LogValue> a;  // index l, entry 0 unused
  std::vector<LogValue> b;
};

/// Amplitudes for l = 1..lmax of a sphere of radius R at frequency xi > 0.
inline MieAmplitudes mie_amplitudes(const DielectricModel& model, double R, double xi, int lmax) {
  if (!(xi > 0.0)) throw DomainError("mie: xi must be > 0 (the static limit is handled separately)");
  if (!(R > 0.0)) throw DomainError("mie: R must be > 0");
  if (lmax < 1) throw DomainError("mie: lmax must be >= 1");
  const double y = xi * R / PhysicalConstants::c;
  const auto out = spherical_bessel(y, lmax);
  MieAmplitudes res;
  res.a.assign(lmax + 1, {});
  res.b.assign(lmax + 1, {});
  const bool perfect = model.is_perfect();
  double n = 0.0;
  SphericalBessel in;
  if (!perfect) {
    n = std::sqrt(permittivity(model, xi));
    in = spherical_bessel(n * y, lmax);
  }
  for (int l = 1; l <= lmax; ++l) {
    // psi/zeta = i_l / k_l
    const double log_ratio = out.log_i[l] - out.log_k[l];
    const double dpsi = out.dlog_psi(l);
    const double dzeta = out.dlog_zeta(l);
    double fa, fb;
    if (perfect) {
      fa = -dpsi / dzeta;
      fb = -1.0;
    } else {
      const double dpsi_in = in.dlog_psi(l);
      fa = (dpsi_in - n * dpsi) / (n * dzeta - dpsi_in);
      fb = (dpsi - n * dpsi_in) / (n * dpsi_in - dzeta);
    }
    auto la = LogValue::from(fa);
    auto lb = LogValue::from(fb);
    la.log_abs += log_ratio;
    lb.log_abs += log_ratio;
    res.a[l] = la;
    res.b[l] = lb;
  }
  return res;
}

struct MieCoefficients {
  LogValue a;  // electric
  LogValue b;  // magnetic
};

inline MieCoefficients mie_coefficients(const DielectricModel& model, double R, double xi, int l) {
  const auto all = mie_amplitudes(model, R, xi, l);
  return {all.a[l], all.b[l]};
}

/// Static (xi -> 0) Mie prefactors t_l defined by
///   T_l ~ t_l (xi R / c)^{2l+1} / ((2l+1)!! (2l-1)!!).
struct StaticMie {
  std::vector<double> a;  // electric
  std::vector<double> b;  // magnetic
};

inline StaticMie static_mie(const DielectricModel& model, double R, int lmax) {
  StaticMie s;
  s.a.assign(lmax + 1, 0.0);
  s.b.assign(lmax + 1, 0.0);
  const bool metal = model.is_perfect() || model.has_conduction();
  const bool lossless = model.is_perfect() || (model.has_conduction() && model.conduction().gamma == 0.0);
  SphericalBessel w;
  if (lossless && !model.is_perfect()) w = spherical_bessel(model.conduction().omega_p * R / PhysicalConstants::c,
                                                            lmax + 1);
  const double e0 = model.interband_static();
  for (int l = 1; l <= lmax; ++l) {
    if (metal) {
      s.a[l] = (l + 1.0) / l;
    } else {
      s.a[l] = (l + 1.0) * (e0 - 1.0) / (l * e0 + l + 1.0);
    }
    if (model.is_perfect()) {
      s.b[l] = -1.0;
    } else if (lossless) {
      s.b[l] = -w.r[l + 1] * w.r[l];  // -i_{l+1}(w) / i_{l-1}(w)
    }
  }
  return s;
}

/// Associated Legendre functions P_l^m(X) = (X^2-1)^{m/2} d^m P_l/dX^m for
/// X >= 1 and G_l^m(X) = (X^2-1) dP_l^m/dX, l = m..lmax, log-scaled.
struct LegendreColumn {
  std::vector<LogValue> P;  // index l - m
  std::vector<LogValue> G;
};

/// `xm1` = X - 1 is passed separately so that X^2 - 1 keeps full relative
/// precision near X = 1.
inline LegendreColumn legendre_column(int m, int lmax, double X, double xm1) {
  LegendreColumn c;
  const int n = lmax - m + 1;
  if (n <= 0) return c;
  c.P.resize(n);
  c.G.resize(n);
  const double x2m1 = xm1 * (X + 1.0);
  // P_m^m = (2m-1)!! (X^2-1)^{m/2}
  double log_scale = 0.5 * m * std::log(x2m1);
  for (int k = 1; k <= m; ++k) log_scale += std::log(2.0 * k - 1.0);
  double prev = 0.0, cur = 1.0;  // P_{l-1}, P_l relative to exp(log_scale)
  for (int l = m; l <= lmax; ++l) {
    if (l > m) {
      const double next = ((2.0 * l - 1.0) * X * cur - (l - 1.0 + m) * prev) / (l - m);
      prev = cur;
      cur = next;
      if (std::abs(cur) > 1e150) {
        log_scale += std::log(std::abs(cur));
        prev /= std::abs(cur);
        cur = cur > 0 ? 1.0 : -1.0;
      }
    }
    auto p = LogValue::from(cur);
    p.log_abs += log_scale;
    auto g = LogValue::from(l * X * cur - (l + m) * prev);
    g.log_abs += log_scale;
    c.P[l - m] = p;
    c.G[l - m] = g;
  }
  return c;
}

/// log sqrt((2l+1) (l-m)! / (l+m)!)
inline double log_norm_4pi(int l, int m) {
  return 0.5 * (std::log(2.0 * l + 1.0) + std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0));
}

/// log of (2l-1)!!; (-1)!! = 1.
inline double log_double_factorial_odd(int l) {
  double s = 0.0;
  for (int k = 1; k <= l; ++k) s += std::log(2.0 * k - 1.0);
  return s;
}

}  // namespace casimir

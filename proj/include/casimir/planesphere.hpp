#pragma once

// Plane-sphere Casimir energy, force and force gradient from
// ln det(1 - M) in the spherical multipole basis, and the comparison with the
// proximity force approximation.
//
// The sphere center sits at distance Lc = L + R from the plane. At imaginary
// frequency xi (K = xi/c) the round trip for azimuthal index m reads
//   M_{l'l} = T_{l'} / (l'(l'+1)) * B_{l'l},
//   B_{l'l} = (-1)^{l+l'} N_l N_l' int_1^inf dX exp(-2 K Lc X) / (X^2 - 1) * [...],
// where X = kappa/K, N_l^2 = (2l+1)(l-m)!/(l+m)!, and [...] combines the
// plane amplitudes r_TE, r_TM with the Legendre functions P_l^m(X),
// G_l^m(X) = (X^2-1) dP_l^m/dX. The X-integral uses Gauss-Laguerre nodes in
// t = 2 K Lc (X - 1). Matrices are stored in the similar form
// sigma |T|^{1/2} B |T|^{1/2}, which keeps every entry O(1) and leaves the
// determinant unchanged.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "casimir/constants.hpp"
#include "casimir/dielectric.hpp"
#include "casimir/error.hpp"
#include "casimir/matsubara.hpp"
#include "casimir/plates.hpp"
#include "casimir/quadrature.hpp"
#include "casimir/special.hpp"

namespace casimir {

struct SphereGeometry {
  double L = 0.0;  // closest surface-to-surface distance, m
  double R = 0.0;  // sphere radius, m
  double T = 0.0;  // K

  double x() const { return L / R; }

  void validate() const {
    if (!(L > 0.0)) throw DomainError("sphere geometry: L must be positive");
    if (!(R > 0.0)) throw DomainError("sphere geometry: R must be positive");
    if (!(T >= 0.0)) throw DomainError("sphere geometry: T must be >= 0");
  }
};

struct MultipoleTruncation {
  int ell_max = 10;
  double rel_tol = 1e-10;  // truncation of the azimuthal sum
  int nodes = 0;           // Gauss-Laguerre nodes, 0 selects 3 ell_max / 2 + 20

  /// ell_max = ceil(7/x), capped at 70.
  static MultipoleTruncation for_ratio(double x) {
    if (!(x > 0.0)) throw DomainError("multipole truncation: x must be positive");
    MultipoleTruncation t;
    t.ell_max = static_cast<int>(std::min(70.0, std::max(2.0, std::ceil(7.0 / x))));
    return t;
  }

  int node_count() const { return nodes > 0 ? nodes : (3 * ell_max) / 2 + 20; }
  /// Smallest x for which ell_max is expected to converge.
  double x_min() const { return 5.0 / ell_max; }

  void validate() const {
    if (ell_max < 1) throw DomainError("multipole truncation: ell_max must be >= 1");
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) throw DomainError("multipole truncation: rel_tol out of range");
    if (nodes < 0) throw DomainError("multipole truncation: nodes must be >= 0");
  }
};

/// Round trip restricted to one azimuthal index. Rows and columns run over
/// the magnetic multipoles l = max(1,|m|)..ell_max followed by the electric ones.
struct RoundTripBlock {
  int m = 0;
  std::vector<int> ell;
  Eigen::MatrixXd M;
  Eigen::MatrixXd dM;   // d/dL, filled on request
  Eigen::MatrixXd d2M;  // d^2/dL^2, filled on request

  int size() const { return static_cast<int>(M.rows()); }

  double spectral_radius() const {
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
};

namespace detail {

// Relative sign of the magnetic->electric and electric->magnetic blocks. It
// fixes the sixth-order far-field coefficient b_6 = 3023/4096 of the perfect
// sphere-plane energy -(hbar c/pi) sum_j b_j R^j / (L+R)^{j+1}.
inline constexpr double cross_sign = -1.0;

struct QuadNodes {
  std::vector<double> X, xm1, log_w;
  Eigen::VectorXd rte, rtm, f1, f2;  // plane amplitudes and d/dL, d^2/dL^2 propagation factors
};

inline QuadNodes dynamic_nodes(const LaguerreRule& rule, double xi, double Lc, const DielectricModel& plane) {
  const double K = xi / PhysicalConstants::c;
  const double a = 2.0 * K * Lc;
  const int n = static_cast<int>(rule.nodes.size());
  QuadNodes q;
  q.X.resize(n);
  q.xm1.resize(n);
  q.log_w.resize(n);
  q.rte.resize(n);
  q.rtm.resize(n);
  q.f1.resize(n);
  q.f2.resize(n);
  for (int k = 0; k < n; ++k) {
    const double xm1 = rule.nodes[k] / a;
    const double X = 1.0 + xm1;
    const double x2m1 = xm1 * (X + 1.0);
    q.X[k] = X;
    q.xm1[k] = xm1;
    q.log_w[k] = std::log(rule.weights[k]) - a - std::log(a) - std::log(x2m1);
    const auto r = fresnel(plane, xi, K * std::sqrt(x2m1));
    q.rte[k] = r.te;
    q.rtm[k] = r.tm;
    q.f1[k] = -2.0 * K * X;
    q.f2[k] = q.f1[k] * q.f1[k];
  }
  return q;
}

/// Static limit: integrals over kappa with t = 2 kappa Lc.
inline QuadNodes static_nodes(const LaguerreRule& rule, double Lc, const DielectricModel& plane) {
  const int n = static_cast<int>(rule.nodes.size());
  QuadNodes q;
  q.X = rule.nodes;  // holds t
  q.log_w.resize(n);
  q.rte.resize(n);
  q.rtm.resize(n);
  q.f1.resize(n);
  q.f2.resize(n);
  for (int k = 0; k < n; ++k) {
    const double t = rule.nodes[k];
    q.log_w[k] = std::log(rule.weights[k]);
    const auto r = fresnel(plane, 0.0, t / (2.0 * Lc));
    q.rte[k] = r.te;
    q.rtm[k] = r.tm;
    q.f1[k] = -t / Lc;
    q.f2[k] = q.f1[k] * q.f1[k];
  }
  return q;
}

struct Sides {
  Eigen::MatrixXd gM, pM, gN, pN;
  Eigen::VectorXd sigma;
  std::vector<int> ell;
};

inline double side(int sign, double log_abs) { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

inline Sides dynamic_sides(int m, int lmax, const MieAmplitudes& mie, const QuadNodes& q) {
  const int am = std::abs(m);
  const int l0 = std::max(1, am);
  const int nl = lmax - l0 + 1;
  const int n = static_cast<int>(q.X.size());
  Sides s;
  s.gM.setZero(nl, n);
  s.pM.setZero(nl, n);
  s.gN.setZero(nl, n);
  s.pN.setZero(nl, n);
  s.sigma.resize(2 * nl);
  for (int l = l0; l <= lmax; ++l) {
    s.ell.push_back(l);
    s.sigma[l - l0] = mie.b[l].sign;
    s.sigma[nl + l - l0] = mie.a[l].sign;
  }
  for (int k = 0; k < n; ++k) {
    const auto col = legendre_column(am, lmax, q.X[k], q.xm1[k]);
    for (int l = l0; l <= lmax; ++l) {
      const int i = l - l0;
      const auto& G = col.G[l - am];
      const auto& P = col.P[l - am];
      const int parity = (l % 2) ? -1 : 1;
      const double base = log_norm_4pi(l, am) + 0.5 * q.log_w[k] - 0.5 * std::log(l * (l + 1.0));
      const auto& tb = mie.b[l];
      const auto& ta = mie.a[l];
      if (tb.sign != 0) {
        s.gM(i, k) = parity * side(G.sign, 0.5 * tb.log_abs + base + G.log_abs);
        s.pM(i, k) = parity * side(P.sign, 0.5 * tb.log_abs + base + P.log_abs);
      }
      if (ta.sign != 0) {
        s.gN(i, k) = parity * side(G.sign, 0.5 * ta.log_abs + base + G.log_abs);
        s.pN(i, k) = parity * side(P.sign, 0.5 * ta.log_abs + base + P.log_abs);
      }
    }
  }
  return s;
}

/// Leading large-X behaviour: T_l -> t_l (KR)^{2l+1}/((2l+1)!!(2l-1)!!),
/// G_l^m -> l c_lm X^{l+1}, c_lm = (2l)!/(2^l l! (l-m)!); P terms drop out.
inline Sides static_sides(int m, int lmax, const StaticMie& mie, double R, double Lc, const QuadNodes& q) {
  const int am = std::abs(m);
  const int l0 = std::max(1, am);
  const int nl = lmax - l0 + 1;
  const int n = static_cast<int>(q.X.size());
  Sides s;
  s.gM.setZero(nl, n);
  s.gN.setZero(nl, n);
  s.pM.setZero(nl, n);
  s.pN.setZero(nl, n);
  s.sigma.resize(2 * nl);
  for (int l = l0; l <= lmax; ++l) {
    const int i = l - l0;
    s.ell.push_back(l);
    s.sigma[i] = (mie.b[l] > 0) - (mie.b[l] < 0);
    s.sigma[nl + i] = (mie.a[l] > 0) - (mie.a[l] < 0);
    const double log_c = std::lgamma(2.0 * l + 1.0) - l * std::log(2.0) - std::lgamma(l + 1.0) - std::lgamma(l - am + 1.0);
    const double base = 0.5 * ((2.0 * l + 1.0) * std::log(R) - std::log(2.0 * l + 1.0) -
                               2.0 * log_double_factorial_odd(l) - std::log(l * (l + 1.0))) +
                        log_norm_4pi(l, am) + std::log(static_cast<double>(l)) + log_c -
                        (l + 0.5) * std::log(2.0 * Lc);
    const int parity = (l % 2) ? -1 : 1;
    for (int k = 0; k < n; ++k) {
      const double lk = base + l * std::log(q.X[k]) + 0.5 * q.log_w[k];
      if (mie.b[l] != 0.0) s.gM(i, k) = parity * std::exp(0.5 * std::log(std::abs(mie.b[l])) + lk);
      if (mie.a[l] != 0.0) s.gN(i, k) = parity * std::exp(0.5 * std::log(std::abs(mie.a[l])) + lk);
    }
  }
  return s;
}

inline Eigen::MatrixXd assemble(const Sides& s, int m, const Eigen::VectorXd& te, const Eigen::VectorXd& tm) {
  const Eigen::Index nl = s.gM.rows();
  Eigen::MatrixXd out(2 * nl, 2 * nl);
  Eigen::MatrixXd MM = s.gM * te.asDiagonal() * s.gM.transpose();
  Eigen::MatrixXd NN = s.gN * tm.asDiagonal() * s.gN.transpose();
  if (m != 0) {
    const double m2 = static_cast<double>(m) * m;
    MM.noalias() -= m2 * (s.pM * tm.asDiagonal() * s.pM.transpose());
    NN.noalias() -= m2 * (s.pN * te.asDiagonal() * s.pN.transpose());
    const Eigen::MatrixXd X0 =
        m * (s.gM * te.asDiagonal() * s.pN.transpose() - s.pM * tm.asDiagonal() * s.gN.transpose());
    out.topRightCorner(nl, nl) = cross_sign * X0;
    out.bottomLeftCorner(nl, nl) = X0.transpose();
  } else {
    out.topRightCorner(nl, nl).setZero();
    out.bottomLeftCorner(nl, nl).setZero();
  }
  out.topLeftCorner(nl, nl) = MM;
  out.bottomRightCorner(nl, nl) = NN;
  return s.sigma.asDiagonal() * out;
}

inline RoundTripBlock make_block(int m, const Sides& s, const QuadNodes& q, bool derivatives) {
  RoundTripBlock b;
  b.m = m;
  b.ell = s.ell;
  b.M = assemble(s, m, q.rte, q.rtm);
  if (derivatives) {
    b.dM = assemble(s, m, q.rte.cwiseProduct(q.f1), q.rtm.cwiseProduct(q.f1));
    b.d2M = assemble(s, m, q.rte.cwiseProduct(q.f2), q.rtm.cwiseProduct(q.f2));
  }
  return b;
}

struct LogDet {
  double value = 0.0, d1 = 0.0, d2 = 0.0;
};

/// ln det(1 - M) by LU; with derivatives d/dL ln det = -Tr(D^-1 dM) and
/// d^2/dL^2 ln det = -Tr(D^-1 d2M) - Tr(D^-1 dM D^-1 dM).
inline LogDet log_det_1m(const RoundTripBlock& b, bool derivatives) {
  LogDet r;
  if (b.M.size() == 0) return r;
  const Eigen::MatrixXd D = Eigen::MatrixXd::Identity(b.M.rows(), b.M.cols()) - b.M;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(D);
  const double norm = b.M.cwiseAbs().rowwise().sum().maxCoeff();
  if (norm < 0.05) {
    // forming 1 - M would discard the digits of a small M; -sum Tr(M^n)/n instead
    Eigen::MatrixXd Mn = b.M;
    double bound = norm;
    for (int n = 1; bound / n > 1e-18 * std::abs(r.value) || n == 1; ++n) {
      r.value -= Mn.trace() / n;
      Mn = Mn * b.M;
      bound *= norm;
      if (bound == 0.0) break;
    }
  } else {
    const Eigen::MatrixXd& U = lu.matrixLU();
    double sign = lu.permutationP().determinant();
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      const double u = U(i, i);
      r.value += std::log(std::abs(u));
      if (u < 0.0) sign = -sign;
    }
    if (!(sign > 0.0) || !std::isfinite(r.value))
      throw DomainError("round trip with det(1 - M) <= 0 at m = " + std::to_string(b.m) +
                        " (truncation or cavity unstable)");
  }
  if (derivatives) {
    const Eigen::MatrixXd A = lu.solve(b.dM);
    const Eigen::MatrixXd B = lu.solve(b.d2M);
    r.d1 = -A.trace();
    r.d2 = -B.trace() - A.cwiseProduct(A.transpose()).sum();
  }
  return r;
}

/// Everything that depends only on the models and the truncation.
struct SphereContext {
  const DielectricModel& plane;
  const DielectricModel& sphere;
  MultipoleTruncation trunc;
  LaguerreRule rule;

  SphereContext(const DielectricModel& p, const DielectricModel& s, const MultipoleTruncation& t)
      : plane(p), sphere(s), trunc(t), rule(gauss_laguerre(t.node_count())) {
    t.validate();
  }
};

/// Sum over m of w_m ln det(1 - M_m) at one frequency for each gap in `gaps`
/// (one shared m cutoff). With derivatives, the output is {value, d1, d2}
/// per gap; otherwise one value per gap.
inline std::vector<double> log_det_sum(const SphereContext& ctx, double xi, double R, const std::vector<double>& gaps,
                                       bool derivatives, int* m_used = nullptr) {
  const int lmax = ctx.trunc.ell_max;
  const int per = derivatives ? 3 : 1;
  std::vector<double> acc(gaps.size() * per, 0.0);
  std::vector<QuadNodes> nodes;
  MieAmplitudes mie;
  StaticMie smie;
  for (double L : gaps) {
    nodes.push_back(xi == 0.0 ? static_nodes(ctx.rule, L + R, ctx.plane)
                              : dynamic_nodes(ctx.rule, xi, L + R, ctx.plane));
  }
  if (xi == 0.0) {
    smie = static_mie(ctx.sphere, R, lmax);
  } else {
    mie = mie_amplitudes(ctx.sphere, R, xi, lmax);
  }
  int quiet = 0;
  int m = 0;
  for (; m <= lmax; ++m) {
    const double w = m == 0 ? 1.0 : 2.0;
    bool small = true;
    for (std::size_t j = 0; j < gaps.size(); ++j) {
      const Sides s = xi == 0.0 ? static_sides(m, lmax, smie, R, gaps[j] + R, nodes[j])
                                : dynamic_sides(m, lmax, mie, nodes[j]);
      const auto ld = log_det_1m(make_block(m, s, nodes[j], derivatives), derivatives);
      const double c[3] = {ld.value, ld.d1, ld.d2};
      for (int k = 0; k < per; ++k) {
        double& a = acc[j * per + k];
        a += w * c[k];
        if (std::abs(w * c[k]) > ctx.trunc.rel_tol * std::abs(a)) small = false;
      }
    }
    quiet = small ? quiet + 1 : 0;
    if (quiet >= 2) break;
  }
  if (m_used) *m_used = std::max(*m_used, std::min(m, lmax));
  return acc;
}

}  // namespace detail

/// Round-trip block at azimuthal index m (negative m allowed) and frequency
/// xi >= 0; xi = 0 gives the analytic static limit.
inline RoundTripBlock round_trip_block(int m, double xi, const SphereGeometry& geom, const DielectricModel& plane,
                                       const DielectricModel& sphere, const MultipoleTruncation& trunc,
                                       bool derivatives = false) {
  geom.validate();
  if (!(xi >= 0.0)) throw DomainError("round_trip_block: xi must be >= 0");
  if (std::abs(m) > trunc.ell_max) throw DomainError("round_trip_block: |m| exceeds ell_max");
  const detail::SphereContext ctx(plane, sphere, trunc);
  const double Lc = geom.L + geom.R;
  if (xi == 0.0) {
    const auto q = detail::static_nodes(ctx.rule, Lc, plane);
    const auto s = detail::static_sides(m, trunc.ell_max, static_mie(sphere, geom.R, trunc.ell_max), geom.R, Lc, q);
    return detail::make_block(m, s, q, derivatives);
  }
  const auto q = detail::dynamic_nodes(ctx.rule, xi, Lc, plane);
  const auto s = detail::dynamic_sides(m, trunc.ell_max, mie_amplitudes(sphere, geom.R, xi, trunc.ell_max), q);
  return detail::make_block(m, s, q, derivatives);
}

/// sum_m w_m ln det(1 - M_m), w_0 = 1, w_{m>0} = 2.
inline double log_det_D(double xi, const SphereGeometry& geom, const DielectricModel& plane,
                        const DielectricModel& sphere, const MultipoleTruncation& trunc) {
  geom.validate();
  const detail::SphereContext ctx(plane, sphere, trunc);
  return detail::log_det_sum(ctx, xi, geom.R, {geom.L}, false).front();
}

enum class DerivativeMethod { FiniteDifference, Analytic };

struct SphereOptions {
  QuadratureSpec spec{1e-6, 0.0, 2000};
  DerivativeMethod method = DerivativeMethod::FiniteDifference;
  double fd_step = 1e-3;  // relative to L
  int max_matsubara_terms = 20000;
};

struct SphereResult {
  double energy = 0.0;    // J
  double force = 0.0;     // N, -dE/dL
  double gradient = 0.0;  // N/m, dF/dL
  int ell_max = 0;
  int m_max = 0;            // largest azimuthal index reached
  int matsubara_terms = 0;  // 0 at T = 0
  double tail_estimate = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

struct Aggregate {
  std::vector<double> value, error;
  int terms = 0;
};

template <class F>
Aggregate aggregate_frequencies(const F& f, double T, double xi_scale, const SphereOptions& opt) {
  Aggregate out;
  if (T == 0.0) {
    const auto r = integrate_semi_infinite_vec(f, xi_scale, opt.spec);
    const double pref = PhysicalConstants::hbar / (2.0 * pi);
    for (double v : r.value) out.value.push_back(pref * v);
    for (double e : r.error) out.error.push_back(pref * e);
  } else {
    const auto r = thermal_sum_vec(f, T, ThermalSumOptions{opt.spec, opt.max_matsubara_terms});
    out.value = r.value;
    out.error = r.tail_estimate;
    out.terms = r.m_max;
  }
  return out;
}

template <class F>
auto with_xi_context(const F& f) {
  return [&f](double xi) {
    try {
      return f(xi);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(std::string(e.what()) + xi_context(xi), e.partial(), e.tail_estimate());
    }
  };
}

}  // namespace detail

/// Energy (and, unless `energy_only`, force and gradient) of a sphere above a plane.
inline SphereResult plane_sphere(const SphereGeometry& geom, const DielectricModel& plane,
                                 const DielectricModel& sphere, const MultipoleTruncation& trunc,
                                 const SphereOptions& opt = {}, bool energy_only = false) {
  geom.validate();
  opt.spec.validate();
  const detail::SphereContext ctx(plane, sphere, trunc);
  SphereResult res;
  res.ell_max = trunc.ell_max;
  if (geom.x() < trunc.x_min())
    res.warnings.push_back("x = " + std::to_string(geom.x()) + " below x_min = " + std::to_string(trunc.x_min()) +
                           " for ell_max = " + std::to_string(trunc.ell_max));
  const double scale = PhysicalConstants::c / (2.0 * geom.L);

  if (energy_only || opt.method == DerivativeMethod::Analytic) {
    const bool der = !energy_only;
    auto f = [&](double xi) { return detail::log_det_sum(ctx, xi, geom.R, {geom.L}, der, &res.m_max); };
    const auto a = detail::aggregate_frequencies(detail::with_xi_context(f), geom.T, scale, opt);
    res.energy = a.value[0];
    res.tail_estimate = a.error[0];
    res.matsubara_terms = a.terms;
    if (der) {
      res.force = -a.value[1];
      res.gradient = -a.value[2];
    }
    return res;
  }

  if (!(opt.fd_step > 0.0 && opt.fd_step < 0.1)) throw DomainError("fd_step must lie in (0, 0.1)");
  const double h = opt.fd_step * geom.L;
  const std::vector<double> gaps = {geom.L - 2 * h, geom.L - h, geom.L, geom.L + h, geom.L + 2 * h};
  auto f = [&](double xi) { return detail::log_det_sum(ctx, xi, geom.R, gaps, false, &res.m_max); };
  const auto a = detail::aggregate_frequencies(detail::with_xi_context(f), geom.T, scale, opt);
  const auto& E = a.value;
  const double noise = *std::max_element(a.error.begin(), a.error.end());
  if (!(std::abs(E[3] - E[1]) > 10.0 * noise))
    throw DifferentiationError("finite-difference step h = " + std::to_string(h) +
                               " m is within the quadrature noise; use a larger step or a tighter tolerance");
  res.energy = E[2];
  res.tail_estimate = a.error[2];
  res.matsubara_terms = a.terms;
  res.force = -(8.0 * (E[3] - E[1]) - (E[4] - E[0])) / (12.0 * h);
  res.gradient = -(-E[4] + 16.0 * E[3] - 30.0 * E[2] + 16.0 * E[1] - E[0]) / (12.0 * h * h);
  return res;
}

inline double casimir_energy_sphere(const SphereGeometry& geom, const DielectricModel& plane,
                                    const DielectricModel& sphere, const MultipoleTruncation& trunc,
                                    const SphereOptions& opt = {}) {
  return plane_sphere(geom, plane, sphere, trunc, opt, true).energy;
}

struct ForceGradient {
  double force;     // N
  double gradient;  // N/m
};

inline ForceGradient force_and_gradient(const SphereGeometry& geom, const DielectricModel& plane,
                                        const DielectricModel& sphere, const MultipoleTruncation& trunc,
                                        const SphereOptions& opt = {}) {
  const auto r = plane_sphere(geom, plane, sphere, trunc, opt);
  return {r.force, r.gradient};
}

/// Proximity force estimates as positive magnitudes:
/// F_PFA = 2 pi R |E_pp(L)/A|, G_PFA = 2 pi R |P_pp(L)|.
struct PfaReference {
  double force;
  double gradient;
};

inline PfaReference pfa_reference(const SphereGeometry& geom, const DielectricModel& plane,
                                  const DielectricModel& sphere, const PlatesOptions& opt = {}) {
  geom.validate();
  const auto pp = plane_plane(plane, sphere, {geom.L, 1.0, geom.T}, opt);
  return {2.0 * pi * geom.R * std::abs(pp.free_energy), 2.0 * pi * geom.R * std::abs(pp.pressure)};
}

struct ReductionSample {
  double x;
  double rho_F;
  double rho_G;
};

struct ReductionReport {
  std::vector<ReductionSample> samples;  // those inside the fit window
  double beta_G = 0.0;
  double gamma_G = 0.0;
  double beta_G_uncertainty = 0.0;  // combines the fit standard error and the half-window shift
  double residual = 0.0;            // rms of the fit residuals
  double half_window_shift = 0.0;
};

struct FitWindow {
  double lo = 0.1;
  double hi = 0.4;
};

namespace detail {

/// Least squares for rho - 1 = beta x + gamma x^2. Returns {beta, gamma, se_beta, rms}.
inline std::array<double, 4> fit_slope(const std::vector<ReductionSample>& s) {
  const int n = static_cast<int>(s.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = s[i].x;
    A(i, 1) = s[i].x * s[i].x;
    y[i] = s[i].rho_G - 1.0;
  }
  const Eigen::Matrix2d N = A.transpose() * A;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto sv = svd.singularValues();
  if (n < 2 || !(sv[1] > 1e-10 * sv[0])) throw FitError("slope fit: samples are degenerate");
  const Eigen::Vector2d c = N.ldlt().solve(A.transpose() * y);
  const double rss = (A * c - y).squaredNorm();
  double se = 0.0;
  if (n > 2) se = std::sqrt(rss / (n - 2) * N.inverse()(0, 0));
  return {c[0], c[1], se, std::sqrt(rss / n)};
}

}  // namespace detail

/// Fits rho_G(x) = 1 + beta_G x + gamma x^2 over the window. Needs at least
/// four samples inside it; the uncertainty adds in quadrature the standard
/// error of beta_G and its shift when only the lower half of the samples is used.
inline ReductionReport reduction_and_slope(std::vector<ReductionSample> samples, FitWindow window = {}) {
  std::vector<ReductionSample> in;
  for (const auto& s : samples)
    if (s.x >= window.lo - 1e-12 && s.x <= window.hi + 1e-12) in.push_back(s);
  std::sort(in.begin(), in.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  if (in.size() < 4) throw FitError("slope fit needs at least 4 samples in the window");
  for (std::size_t i = 1; i < in.size(); ++i)
    if (in[i].x == in[i - 1].x) throw FitError("slope fit: repeated x value");
  ReductionReport rep;
  rep.samples = in;
  const auto full = detail::fit_slope(in);
  rep.beta_G = full[0];
  rep.gamma_G = full[1];
  rep.residual = full[3];
  const std::vector<ReductionSample> lower(in.begin(), in.begin() + (in.size() + 1) / 2);
  rep.half_window_shift = std::abs(detail::fit_slope(lower)[0] - full[0]);
  rep.beta_G_uncertainty = std::hypot(full[2], rep.half_window_shift);
  return rep;
}

}  // namespace casimir

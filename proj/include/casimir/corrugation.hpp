#pragma once

// Lateral Casimir energy between two sinusoidally corrugated mirrors at
// second order in the corrugation amplitudes, T = 0.
//
// Profiles are heights measured from each mean plane into the cavity,
//   h1 = a1 cos(k_C x),  h2 = a2 cos(k_C (x - b)),
// and the lateral energy is dE = (A/2) G_C(k_C) a1 a2 cos(k_C b) with
//   G_C = -hbar int dxi/2pi int d^2k/(2pi)^2
//         sum_{p,p'} R1_{p p'}(k <- k') F_p'(k') R2_{p' p}(k' <- k) F_p(k),
// k' = k + k_C e_x, F_p = exp(-kappa L) / (1 - r1_p r2_p exp(-2 kappa L)).
// R_i are first-order reflection amplitudes per unit height. For k_C -> 0
// they reduce to 2 kappa r_p (a rigid translation), so G_C(0) = d^2E_pp/dL^2.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "casimir/constants.hpp"
#include "casimir/dielectric.hpp"
#include "casimir/error.hpp"
#include "casimir/quadrature.hpp"

namespace casimir {

struct CorrugationSpec {
  double a1 = 0.0;        // m
  double a2 = 0.0;        // m
  double lambda_C = 0.0;  // m
  double b = 0.0;         // lateral mismatch, m

  double k_C() const { return 2.0 * pi / lambda_C; }

  void validate() const {
    if (!(a1 >= 0.0) || !(a2 >= 0.0)) throw DomainError("corrugation: amplitudes must be >= 0");
    if (!(lambda_C > 0.0)) throw DomainError("corrugation: lambda_C must be positive");
    if (!std::isfinite(b)) throw DomainError("corrugation: b must be finite");
  }

  /// a1, a2 < min(lambda_C, lambda_P, L)/10. Pass lambda_P = inf for perfect mirrors.
  bool perturbative(double L, double lambda_P = std::numeric_limits<double>::infinity()) const {
    const double bound = std::min({lambda_C, lambda_P, L}) / 10.0;
    return a1 < bound && a2 < bound;
  }
};

/// In-plane wavevector, rad/m.
struct InPlaneVector {
  double x = 0.0;
  double y = 0.0;

  double norm() const { return std::hypot(x, y); }
};

/// amplitude[out][in]; index 0 is TE, 1 is TM.
using KernelMatrix = std::array<std::array<double, 2>, 2>;

/// First-order reflection of a mirror filling z < h(x, y) with vacuum above.
/// `amplitude` gives the outgoing (k_out, p') wave per unit incoming (k_in, p)
/// wave and per unit Fourier component of h at k_out - k_in, in 1/m.
class FirstOrderReflection {
 public:
  virtual ~FirstOrderReflection() = default;
  virtual KernelMatrix amplitude(double xi, InPlaneVector k_in, InPlaneVector k_out) const = 0;
  virtual FresnelPair specular(double xi, double k) const = 0;
};

namespace detail {

struct Directions {
  double c = 1.0;  // cos of the angle from k_in to k_out
  double s = 0.0;  // sin of that angle, e_z . (khat_in x khat_out)
};

inline std::array<double, 2> unit(InPlaneVector k) {
  const double n = k.norm();
  if (n == 0.0) return {1.0, 0.0};
  return {k.x / n, k.y / n};
}

inline Directions directions(InPlaneVector k_in, InPlaneVector k_out) {
  const auto u = unit(k_in), v = unit(k_out);
  return {u[0] * v[0] + u[1] * v[1], u[0] * v[1] - u[1] * v[0]};
}

}  // namespace detail

/// Perfect reflector:
///   TE -> TE  -2 kappa c
///   TM -> TE  -2 K s
///   TE -> TM  -2 kappa K s / kappa'
///   TM -> TM  2 (K^2 c + k k') / kappa'
/// with K = xi/c, kappa (kappa') for k_in (k_out), c and s the cosine and sine
/// of the angle from k_in to k_out.
class PerfectReflectorKernel final : public FirstOrderReflection {
 public:
  KernelMatrix amplitude(double xi, InPlaneVector k_in, InPlaneVector k_out) const override {
    const double K = xi / PhysicalConstants::c;
    const double k = k_in.norm(), kp = k_out.norm();
    const double kappa = std::hypot(k, K), kappap = std::hypot(kp, K);
    const auto d = detail::directions(k_in, k_out);
    KernelMatrix m;
    m[0][0] = -2.0 * kappa * d.c;
    m[0][1] = -2.0 * K * d.s;
    m[1][0] = -2.0 * kappa * K * d.s / kappap;
    m[1][1] = 2.0 * (K * K * d.c + k * kp) / kappap;
    return m;
  }

  FresnelPair specular(double, double) const override { return {-1.0, 1.0}; }
};

/// Checked form of the perfect kernel for a sinusoidal profile of wavenumber k_C along x.
inline KernelMatrix first_order_reflection_perfect(double xi, InPlaneVector k_in, InPlaneVector k_out, double k_C) {
  if (!(xi > 0.0)) throw DomainError("first-order reflection: xi must be > 0");
  const double dx = std::abs(k_out.x - k_in.x);
  const double scale = std::max({k_in.norm(), k_out.norm(), k_C, 1.0});
  if (std::abs(k_out.y - k_in.y) > 1e-12 * scale || std::abs(dx - k_C) > 1e-12 * scale)
    throw DomainError("first-order reflection: k_out - k_in must be +-k_C along x");
  return PerfectReflectorKernel().amplitude(xi, k_in, k_out);
}

namespace detail {

using cplx = std::complex<double>;

struct WaveFields {
  Eigen::Vector3cd e, h;  // h stands for c mu_0 H, in units of the E amplitude
};

/// Plane wave exp(i k.r + i s kz z) at omega = i xi in a medium of permittivity
/// eps, kz = i kappa_eps. Polarization vectors e_TE = z x khat and
/// e_TM = (s kz khat - k z)/K_eps.
inline WaveFields plane_wave(int pol, double k, std::array<double, 2> kh, int s, double eps, double K) {
  const double se = std::sqrt(eps);
  const cplx Keps(0.0, se * K);
  const cplx kz(0.0, std::sqrt(eps * K * K + k * k));
  const Eigen::Vector3cd te(-kh[1], kh[0], 0.0);
  const Eigen::Vector3cd tm = (static_cast<double>(s) * kz * Eigen::Vector3cd(kh[0], kh[1], 0.0) -
                               cplx(k) * Eigen::Vector3cd(0.0, 0.0, 1.0)) /
                              Keps;
  // (Q x e) / K_0 with K_0 = i K
  if (pol == 0) return {te, -se * tm};
  return {tm, se * te};
}

/// Columns: upward vacuum TE, TM and downward medium TE, TM (with a minus
/// sign); rows: tangential E and H at z = 0.
inline Eigen::Matrix4cd interface_matrix(double k, std::array<double, 2> kh, double eps, double K) {
  Eigen::Matrix4cd A;
  for (int p = 0; p < 2; ++p) {
    const auto up = plane_wave(p, k, kh, +1, 1.0, K);
    const auto dn = plane_wave(p, k, kh, -1, eps, K);
    A.col(p) << up.e[0], up.e[1], up.h[0], up.h[1];
    A.col(2 + p) << -dn.e[0], -dn.e[1], -dn.h[0], -dn.h[1];
  }
  return A;
}

}  // namespace detail

/// Homogeneous bulk mirror of arbitrary permittivity. The first-order
/// amplitudes follow from continuity of tangential E and H on z = h, expanded
/// to first order in h about z = 0:
///   d(E1 - E2)_t = -h [dz (E1 - E2)_t + grad_t(h)/h (E1 - E2)_z], same for H.
/// A perfect model is handled by the closed form.
class BulkKernel final : public FirstOrderReflection {
 public:
  explicit BulkKernel(DielectricModel model) : model_(std::move(model)) {}

  const DielectricModel& model() const { return model_; }

  KernelMatrix amplitude(double xi, InPlaneVector k_in, InPlaneVector k_out) const override {
    if (model_.is_perfect()) return PerfectReflectorKernel().amplitude(xi, k_in, k_out);
    if (!(xi > 0.0)) throw DomainError("bulk kernel: xi must be > 0");
    using detail::cplx;
    const double K = xi / PhysicalConstants::c;
    const double eps = permittivity(model_, xi);
    const double k = k_in.norm(), kp = k_out.norm();
    const auto kh = detail::unit(k_in), khp = detail::unit(k_out);
    const double kappa = std::hypot(k, K), kappa2 = std::sqrt(eps * K * K + k * k);
    const Eigen::PartialPivLU<Eigen::Matrix4cd> flat(detail::interface_matrix(k, kh, eps, K));
    const Eigen::PartialPivLU<Eigen::Matrix4cd> first(detail::interface_matrix(kp, khp, eps, K));
    const cplx iqx(0.0, k_out.x - k_in.x), iqy(0.0, k_out.y - k_in.y);
    KernelMatrix m;
    for (int p = 0; p < 2; ++p) {
      const auto in = detail::plane_wave(p, k, kh, -1, 1.0, K);
      Eigen::Vector4cd rhs;
      rhs << -in.e[0], -in.e[1], -in.h[0], -in.h[1];
      const Eigen::Vector4cd rt = flat.solve(rhs);
      // zeroth-order fields at z = 0 and their z-derivatives on both sides
      Eigen::Vector3cd e1 = in.e, h1 = in.h, de1 = kappa * in.e, dh1 = kappa * in.h;
      Eigen::Vector3cd e2 = Eigen::Vector3cd::Zero(), h2 = e2, de2 = e2, dh2 = e2;
      for (int j = 0; j < 2; ++j) {
        const auto up = detail::plane_wave(j, k, kh, +1, 1.0, K);
        const auto dn = detail::plane_wave(j, k, kh, -1, eps, K);
        e1 += rt[j] * up.e;
        h1 += rt[j] * up.h;
        de1 -= kappa * rt[j] * up.e;
        dh1 -= kappa * rt[j] * up.h;
        e2 += rt[2 + j] * dn.e;
        h2 += rt[2 + j] * dn.h;
        de2 += kappa2 * rt[2 + j] * dn.e;
        dh2 += kappa2 * rt[2 + j] * dn.h;
      }
      const Eigen::Vector3cd de = de1 - de2, dh = dh1 - dh2;
      const cplx ez = e1[2] - e2[2], hz = h1[2] - h2[2];
      Eigen::Vector4cd src;
      src << -(de[0] + iqx * ez), -(de[1] + iqy * ez), -(dh[0] + iqx * hz), -(dh[1] + iqy * hz);
      const Eigen::Vector4cd out = first.solve(src);
      m[0][p] = out[0].real();
      m[1][p] = out[1].real();
    }
    return m;
  }

  FresnelPair specular(double xi, double k) const override { return fresnel(model_, xi, k); }

 private:
  DielectricModel model_;
};

inline std::unique_ptr<FirstOrderReflection> make_kernel(const DielectricModel& model) {
  if (model.is_perfect()) return std::make_unique<PerfectReflectorKernel>();
  return std::make_unique<BulkKernel>(model);
}

namespace detail {

/// Mirror 2 faces -z. A rotation by pi about x maps it onto the mirror-1
/// setting and flips k_y.
inline InPlaneVector flip_y(InPlaneVector k) { return {k.x, -k.y}; }

/// e^{-kappa L} / (1 - rho e^{-2 kappa L})
inline double cavity_factor(double kappa, double L, double rho) {
  const double e = std::exp(-kappa * L);
  if (rho == 1.0) return e / -std::expm1(-2.0 * kappa * L);
  return e / (1.0 - rho * e * e);
}

/// Integrand of G_C over (K, k) in SI units, k = (u - k_C/2, k_y), k' = k + k_C e_x.
inline double corrugation_trace(const FirstOrderReflection& m1, const FirstOrderReflection& m2, double L,
                                double k_C, double K, double u, double ky) {
  const double xi = K * PhysicalConstants::c;
  const InPlaneVector k{u - 0.5 * k_C, ky}, kp{u + 0.5 * k_C, ky};
  const double kn = k.norm(), kpn = kp.norm();
  const double kappa = std::hypot(kn, K), kappap = std::hypot(kpn, K);
  const auto A = m1.amplitude(xi, kp, k);                // k <- k'
  const auto B = m2.amplitude(xi, flip_y(k), flip_y(kp));  // k' <- k
  const auto r1 = m1.specular(xi, kn), r2 = m2.specular(xi, kn);
  const auto r1p = m1.specular(xi, kpn), r2p = m2.specular(xi, kpn);
  const double F[2] = {cavity_factor(kappa, L, r1.te * r2.te), cavity_factor(kappa, L, r1.tm * r2.tm)};
  const double Fp[2] = {cavity_factor(kappap, L, r1p.te * r2p.te), cavity_factor(kappap, L, r1p.tm * r2p.tm)};
  double t = 0.0;
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) t += A[p][q] * Fp[q] * B[q][p] * F[p];
  return t;
}

}  // namespace detail

/// Triple integral -hbar c/(8 pi^3) int_0^inf dK int d^2k f(K, u, k_y) for an
/// integrand even in k_y and in u, k = (u - k_C/2, k_y), k' = k + k_C e_x.
/// The integrand is taken to carry exp(-(kappa + kappa') L) <= exp(-k_C L);
/// where that factor is below exp(-k_C L - 600) it is replaced by zero.
template <class F>
double corrugation_integral(const F& f, double L, double k_C, const QuadratureSpec& spec) {
  const double scale = 1.0 / L;
  const QuadratureSpec inner{std::max(spec.rel_tol * 1e-2, 1e-13), 0.0, spec.max_subdivisions};
  auto cut = [&](double K, double u, double ky) {
    const double kappa = std::hypot(u - 0.5 * k_C, ky, K), kappap = std::hypot(u + 0.5 * k_C, ky, K);
    if ((kappa + kappap - k_C) * L > 600.0) return 0.0;
    return f(K, u, ky);
  };
  auto over_ky = [&](double K, double u) {
    return integrate_semi_infinite([&](double ky) { return cut(K, u, ky); }, scale, inner).value;
  };
  auto over_u = [&](double K) {
    return integrate_semi_infinite([&](double u) { return over_ky(K, u); }, scale, inner).value;
  };
  const auto r = integrate_semi_infinite(over_u, scale, spec);
  return -PhysicalConstants::hbar * PhysicalConstants::c / (8.0 * pi * pi * pi) * 4.0 * r.value;
}

/// Spectral kernel G_C(k_C) in J/m^4.
inline double response_kernel(const FirstOrderReflection& m1, const FirstOrderReflection& m2, double L, double k_C,
                              const QuadratureSpec& spec = {1e-6, 0.0, 2000}) {
  if (!(L > 0.0)) throw DomainError("response kernel: L must be positive");
  if (!(k_C >= 0.0)) throw DomainError("response kernel: k_C must be >= 0");
  spec.validate();
  auto f = [&](double K, double u, double ky) {
    if (K == 0.0) return 0.0;
    return detail::corrugation_trace(m1, m2, L, k_C, K, u, ky);
  };
  try {
    return corrugation_integral(f, L, k_C, spec);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string(e.what()) + " (response kernel at k_C = " + std::to_string(k_C) + " rad/m)",
                           e.partial(), e.tail_estimate());
  }
}

inline double response_kernel(const DielectricModel& m1, const DielectricModel& m2, double L, double k_C,
                              const QuadratureSpec& spec = {1e-6, 0.0, 2000}) {
  return response_kernel(*make_kernel(m1), *make_kernel(m2), L, k_C, spec);
}

/// dE = (A/2) G_C a1 a2 cos(k_C b), J.
inline double lateral_energy(const CorrugationSpec& s, double G_C, double A) {
  s.validate();
  return 0.5 * A * G_C * s.a1 * s.a2 * std::cos(s.k_C() * s.b);
}

/// F_lat = -d(dE)/db = (A/2) G_C a1 a2 k_C sin(k_C b), N.
inline double lateral_force(const CorrugationSpec& s, double G_C, double A) {
  s.validate();
  return 0.5 * A * G_C * s.a1 * s.a2 * s.k_C() * std::sin(s.k_C() * s.b);
}

struct KernelSample {
  double k_C = 0.0;  // rad/m
  double G_C = 0.0;  // J/m^4
  double r_C = 0.0;  // G_C(k_C)/G_C(0)
};

/// r_C over a list of wavenumbers. G_C(0) is always evaluated at k_C = 0 and
/// the list is returned in the given order.
inline std::vector<KernelSample> pfa_ratio_curve(const FirstOrderReflection& m1, const FirstOrderReflection& m2,
                                                 double L, const std::vector<double>& k_C,
                                                 const QuadratureSpec& spec = {1e-6, 0.0, 2000}) {
  if (k_C.empty()) throw DomainError("pfa ratio curve: empty k_C list");
  const double g0 = response_kernel(m1, m2, L, 0.0, spec);
  std::vector<KernelSample> out;
  for (double k : k_C) {
    const double g = k == 0.0 ? g0 : response_kernel(m1, m2, L, k, spec);
    out.push_back({k, g, g / g0});
  }
  return out;
}

inline std::vector<KernelSample> pfa_ratio_curve(const DielectricModel& m1, const DielectricModel& m2, double L,
                                                 const std::vector<double>& k_C,
                                                 const QuadratureSpec& spec = {1e-6, 0.0, 2000}) {
  return pfa_ratio_curve(*make_kernel(m1), *make_kernel(m2), L, k_C, spec);
}

}  // namespace casimir

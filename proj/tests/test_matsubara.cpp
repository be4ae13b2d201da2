#include <cmath>

#include "casimir/matsubara.hpp"
#include "doctest.h"

using namespace casimir;

namespace {
constexpr double kB = PhysicalConstants::k_B;
constexpr double hbar = PhysicalConstants::hbar;
}  // namespace

TEST_CASE("Matsubara frequencies") {
  CHECK(matsubara_frequency(300.0, 0) == 0.0);
  CHECK(matsubara_frequency(300.0, 1) == doctest::Approx(246779025515306.06).epsilon(1e-14));
  CHECK(matsubara_frequency(600.0, 7) == 2.0 * matsubara_frequency(300.0, 7));
  CHECK_THROWS_AS(matsubara_frequency(0.0, 1), DomainError);
  CHECK_THROWS_AS(matsubara_frequency(-1.0, 1), DomainError);

  const auto g = matsubara_grid(10.0, 5);
  CHECK(g.m_max() == 5);
  CHECK(g.xi[0] == 0.0);
  for (int m = 1; m <= 5; ++m) CHECK(g.xi[m] > g.xi[m - 1]);
}

TEST_CASE("thermal sum of zero") {
  const auto r = thermal_sum([](double) { return 0.0; }, 300.0);
  CHECK(r.value == 0.0);
}

TEST_CASE("thermal sum of an exponential matches the geometric series") {
  const double T = 300.0, xi1 = 1e15;
  const double q = std::exp(-2.0 * pi * kB * T / (hbar * xi1));
  const double expect = kB * T * (0.5 + q / (1.0 - q));
  ThermalSumOptions opt;
  opt.spec.rel_tol = 1e-12;
  const auto r = thermal_sum([&](double xi) { return std::exp(-xi / xi1); }, T, opt);
  CHECK(r.value == doctest::Approx(expect).epsilon(1e-11));
}

TEST_CASE("tail estimate bounds the true remainder for geometric terms") {
  const double T = 1.0, xi1 = 3e12;
  const double h = matsubara_frequency(T, 1);
  const double q = std::exp(-h / xi1);
  for (double tol : {1e-4, 1e-6, 1e-8}) {
    ThermalSumOptions opt;
    opt.spec.rel_tol = tol;
    const auto r = thermal_sum([&](double xi) { return std::exp(-xi / xi1); }, T, opt);
    const double remainder = kB * T * std::pow(q, r.m_max + 1) / (1.0 - q);
    CHECK(r.tail_estimate >= remainder * (1.0 - 1e-9));
  }
}

TEST_CASE("thermal sum reports non-convergence with partial sum") {
  ThermalSumOptions opt;
  opt.max_terms = 50;
  try {
    thermal_sum([](double) { return 1.0; }, 1.0, opt);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.partial() == doctest::Approx(kB * 50.5));
    CHECK(e.tail_estimate() > 0.0);
  }
}

TEST_CASE("zero-temperature integral") {
  const double L = 1e-6;
  CHECK(zero_t_integral([](double) { return 0.0; }, 1e14).value == 0.0);
  const auto r = zero_t_integral([&](double xi) { return std::exp(-2.0 * xi * L / PhysicalConstants::c); },
                                 PhysicalConstants::c / (2.0 * L));
  CHECK(r.value == doctest::Approx(hbar * PhysicalConstants::c / (4.0 * pi * L)).epsilon(1e-10));
}

TEST_CASE("thermal sum tends to the zero-temperature integral") {
  const double xi1 = 1e12;
  auto f = [&](double xi) { return std::exp(-xi / xi1); };
  const double exact = zero_t_integral(f, xi1).value;
  ThermalSumOptions opt;
  opt.max_terms = 2000000;
  opt.spec.rel_tol = 1e-12;
  double prev = 1.0;
  for (double T : {10e-3, 1e-3, 0.1e-3}) {
    const double err = std::abs(thermal_sum(f, T, opt).value / exact - 1.0);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("thermal sum is deterministic") {
  auto f = [](double xi) { return std::exp(-xi / 7e13) / (1.0 + xi / 1e14); };
  const auto a = thermal_sum(f, 77.0);
  const auto b = thermal_sum(f, 77.0);
  CHECK(a.value == b.value);
  CHECK(a.m_max == b.m_max);
}

TEST_CASE("quadrature tolerance bounds") {
  CHECK_THROWS_AS((QuadratureSpec{0.0}.validate()), DomainError);
  CHECK_THROWS_AS((QuadratureSpec{0.1}.validate()), DomainError);
  CHECK_NOTHROW((QuadratureSpec{1e-2}.validate()));
}

TEST_CASE("Gauss-Laguerre rule integrates polynomials exactly") {
  for (int n : {1, 5, 20, 80}) {
    const auto rule = gauss_laguerre(n);
    // int t^k e^{-t} = k!
    for (int k = 0; k < std::min(2 * n, 30); ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], k);
      CHECK(s == doctest::Approx(std::tgamma(k + 1.0)).epsilon(1e-10));
    }
  }
}

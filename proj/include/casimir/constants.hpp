#pragma once

#include <numbers>

namespace casimir {

/// CODATA 2018 exact values, SI units.
struct PhysicalConstants {
  static constexpr double hbar = 1.054571817e-34;  // J s
  static constexpr double c = 299792458.0;         // m/s
  static constexpr double k_B = 1.380649e-23;      // J/K
  static constexpr double eV = 1.602176634e-19;    // J
};

inline constexpr double pi = std::numbers::pi;

/// Riemann zeta(3).
inline constexpr double zeta3 = 1.2020569031595942853997;

}  // namespace casimir

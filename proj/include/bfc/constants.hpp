#pragma once

#include <numbers>

namespace bfc {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, exact
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Optical frequency (Hz) of a vacuum wavelength given in nanometers.
inline constexpr double frequency_from_nm(double wavelength_nm) {
    return kSpeedOfLight / (wavelength_nm * 1e-9);
}

// Angular frequency (rad/s) of a vacuum wavelength given in nanometers.
inline constexpr double omega_from_nm(double wavelength_nm) {
    return kTwoPi * frequency_from_nm(wavelength_nm);
}

}  // namespace bfc

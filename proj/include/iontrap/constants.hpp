#pragma once

#include <numbers>

// Physical constants (CODATA 2018, exact where the SI defines them) and
// species data for 171Yb+.
namespace iontrap::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C (exact)
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double electron_mass = 9.1093837015e-31;     // kg

// 171Yb atomic mass 170.936 325 8 u, minus one electron for the ion.
inline constexpr double yb171_ion_mass = 170.9363258 * atomic_mass_unit - electron_mass;

// 2S1/2 -> 2P1/2 cooling/detection line.
inline constexpr double yb_cooling_wavelength = 369.5e-9;            // m
inline constexpr double yb_cooling_wavenumber = two_pi / yb_cooling_wavelength;
inline constexpr double yb_cooling_linewidth = two_pi * 19.6e6;      // rad/s

// Hyperfine clock splitting 12.642 812 118 GHz.
inline constexpr double yb171_hyperfine_splitting = two_pi * 12.642812118e9; // rad/s

}  // namespace iontrap::constants

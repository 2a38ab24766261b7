#pragma once

#include <string>
#include <string_view>

namespace iontrap {

/// Physical dimension a config value must carry.
enum class Dimension {
  dimensionless,      // bare number
  time,               // s, ms, us, ns
  angular_frequency,  // Hz-family (times 2 pi) or rad/s-family
  rate,               // events per unit time: /s, /ms, counts/ms, quanta/ms, Hz, kHz
  length,             // m, mm, um, nm
  voltage,            // V, mV, kV
  electric_field,     // V/m, V/mm, V/cm
  angle,              // rad, deg
};

const char* dimension_name(Dimension d) noexcept;

/// Parses "<number> <unit>" into SI (angular frequencies in rad/s). A bare
/// number is accepted only for Dimension::dimensionless. Throws
/// InvalidArgument naming the offending text.
double parse_quantity(std::string_view text, Dimension dim);

/// Canonical text for an SI value ("1.2e-05 s", "2.1 MHz"-style is not
/// attempted; angular frequencies print as rad/s).
std::string format_quantity(double si_value, Dimension dim);

}  // namespace iontrap

#include "iontrap/units.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <string>

#include <fmt/format.h>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

struct UnitEntry {
  std::string_view symbol;
  double factor;
};

constexpr double tau = constants::two_pi;

constexpr std::array time_units{UnitEntry{"s", 1.0}, UnitEntry{"ms", 1e-3}, UnitEntry{"us", 1e-6},
                                UnitEntry{"µs", 1e-6}, UnitEntry{"ns", 1e-9}};
constexpr std::array angular_units{UnitEntry{"Hz", tau},          UnitEntry{"kHz", tau * 1e3},
                                   UnitEntry{"MHz", tau * 1e6},   UnitEntry{"GHz", tau * 1e9},
                                   UnitEntry{"rad/s", 1.0},       UnitEntry{"krad/s", 1e3},
                                   UnitEntry{"Mrad/s", 1e6},      UnitEntry{"rad/ms", 1e3}};
constexpr std::array length_units{UnitEntry{"m", 1.0}, UnitEntry{"mm", 1e-3}, UnitEntry{"um", 1e-6},
                                  UnitEntry{"µm", 1e-6}, UnitEntry{"nm", 1e-9}};
constexpr std::array voltage_units{UnitEntry{"V", 1.0}, UnitEntry{"mV", 1e-3}, UnitEntry{"kV", 1e3}};
constexpr std::array field_units{UnitEntry{"V/m", 1.0}, UnitEntry{"V/cm", 1e2}, UnitEntry{"V/mm", 1e3},
                                 UnitEntry{"mV/m", 1e-3}};
constexpr std::array angle_units{UnitEntry{"rad", 1.0}, UnitEntry{"deg", constants::pi / 180.0}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <std::size_t N>
bool lookup(const std::array<UnitEntry, N>& table, std::string_view unit, double& factor) {
  for (const auto& e : table) {
    if (e.symbol == unit) {
      factor = e.factor;
      return true;
    }
  }
  return false;
}

// "<noun>/<time unit>" or "/<time unit>" or Hz-family without the 2 pi.
bool rate_factor(std::string_view unit, double& factor) {
  if (unit == "Hz") return factor = 1.0, true;
  if (unit == "kHz") return factor = 1e3, true;
  if (unit == "MHz") return factor = 1e6, true;
  const auto slash = unit.rfind('/');
  if (slash == std::string_view::npos) return false;
  const auto noun = unit.substr(0, slash);
  for (char c : noun) {
    if (!std::isalpha(static_cast<unsigned char>(c)) && c != '1') return false;
  }
  double t = 0.0;
  if (!lookup(time_units, unit.substr(slash + 1), t)) return false;
  factor = 1.0 / t;
  return true;
}

}  // namespace

const char* dimension_name(Dimension d) noexcept {
  switch (d) {
    case Dimension::dimensionless: return "dimensionless";
    case Dimension::time: return "time";
    case Dimension::angular_frequency: return "frequency";
    case Dimension::rate: return "rate";
    case Dimension::length: return "length";
    case Dimension::voltage: return "voltage";
    case Dimension::electric_field: return "electric field";
    case Dimension::angle: return "angle";
  }
  return "?";
}

double parse_quantity(std::string_view text, Dimension dim) {
  const std::string_view s = trim(text);
  double value = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  // from_chars rejects a leading '+'.
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr == begin) {
    throw InvalidArgument(fmt::format("'{}' does not start with a number", s));
  }
  const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
  if (unit.empty()) {
    if (dim == Dimension::dimensionless) return value;
    throw InvalidArgument(fmt::format("'{}' needs a {} unit", s, dimension_name(dim)));
  }
  double factor = 0.0;
  bool ok = false;
  switch (dim) {
    case Dimension::dimensionless: ok = false; break;
    case Dimension::time: ok = lookup(time_units, unit, factor); break;
    case Dimension::angular_frequency: ok = lookup(angular_units, unit, factor); break;
    case Dimension::rate: ok = rate_factor(unit, factor); break;
    case Dimension::length: ok = lookup(length_units, unit, factor); break;
    case Dimension::voltage: ok = lookup(voltage_units, unit, factor); break;
    case Dimension::electric_field: ok = lookup(field_units, unit, factor); break;
    case Dimension::angle: ok = lookup(angle_units, unit, factor); break;
  }
  if (!ok) throw InvalidArgument(fmt::format("'{}' is not a {} unit", unit, dimension_name(dim)));
  return value * factor;
}

std::string format_quantity(double si_value, Dimension dim) {
  switch (dim) {
    case Dimension::dimensionless: return fmt::format("{:.17g}", si_value);
    case Dimension::time: return fmt::format("{:.17g} s", si_value);
    case Dimension::angular_frequency: return fmt::format("{:.17g} rad/s", si_value);
    case Dimension::rate: return fmt::format("{:.17g} /s", si_value);
    case Dimension::length: return fmt::format("{:.17g} m", si_value);
    case Dimension::voltage: return fmt::format("{:.17g} V", si_value);
    case Dimension::electric_field: return fmt::format("{:.17g} V/m", si_value);
    case Dimension::angle: return fmt::format("{:.17g} rad", si_value);
  }
  return {};
}

}  // namespace iontrap

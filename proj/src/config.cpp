#include "iontrap/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "iontrap/coherence.hpp"
#include "iontrap/detection.hpp"

namespace iontrap {

namespace {

constexpr std::array experiments{
    Experiment::flop,          Experiment::cool_and_measure,     Experiment::heating_rate,
    Experiment::detection_fidelity, Experiment::ramsey,          Experiment::spin_echo,
    Experiment::micromotion_spectrum, Experiment::rf_phase_contrast, Experiment::lineshape,
    Experiment::trap_characterize, Experiment::comb_plan,
};

bool is_stochastic(Experiment e) {
  switch (e) {
    case Experiment::flop:
    case Experiment::cool_and_measure:
    case Experiment::heating_rate:
    case Experiment::detection_fidelity:
    case Experiment::ramsey:
    case Experiment::spin_echo:
      return true;
    default:
      return false;
  }
}

// ---- schema ---------------------------------------------------------------

std::string quoted(std::string_view s) { return fmt::format("\"{}\"", s); }

std::string si_literal(double v, Dimension dim) {
  if (dim == Dimension::dimensionless) return fmt::format("{:.17g}", v);
  return quoted(format_quantity(v, dim));
}

std::string si_list_literal(std::span<const double> vs, Dimension dim) {
  std::string out = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ", ";
    out += si_literal(vs[i], dim);
  }
  return out + "]";
}

ParamSpec qty(std::string key, Dimension dim, std::string def, std::string help, bool positive = false,
              std::optional<double> minimum = std::nullopt) {
  ParamSpec s;
  s.key = std::move(key);
  s.kind = ParamKind::quantity;
  s.dim = dim;
  s.default_literal = std::move(def);
  s.help = std::move(help);
  s.positive = positive;
  s.minimum = minimum;
  return s;
}

ParamSpec nonneg(std::string key, Dimension dim, std::string def, std::string help) {
  return qty(std::move(key), dim, std::move(def), std::move(help), false, 0.0);
}

ParamSpec integer(std::string key, std::string def, double minimum, std::string help) {
  ParamSpec s;
  s.key = std::move(key);
  s.kind = ParamKind::integer;
  s.default_literal = std::move(def);
  s.minimum = minimum;
  s.help = std::move(help);
  return s;
}

ParamSpec boolean(std::string key, bool def, std::string help) {
  ParamSpec s;
  s.key = std::move(key);
  s.kind = ParamKind::boolean;
  s.default_literal = def ? "true" : "false";
  s.help = std::move(help);
  return s;
}

ParamSpec choice(std::string key, std::vector<std::string> choices, std::string def, std::string help) {
  ParamSpec s;
  s.key = std::move(key);
  s.kind = ParamKind::choice;
  s.choices = std::move(choices);
  s.default_literal = quoted(def);
  s.help = std::move(help);
  return s;
}

ParamSpec text(std::string key, std::string def, std::string help) {
  ParamSpec s;
  s.key = std::move(key);
  s.kind = ParamKind::text;
  s.default_literal = quoted(def);
  s.help = std::move(help);
  return s;
}

ParamSpec qty_list(std::string key, Dimension dim, std::string def, std::string help, bool positive = false,
                   std::optional<double> minimum = std::nullopt) {
  ParamSpec s = qty(std::move(key), dim, std::move(def), std::move(help), positive, minimum);
  s.kind = ParamKind::quantity_list;
  return s;
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (auto e : experiments) out.emplace_back(experiment_name(e));
  return out;
}

void add_common(std::vector<ParamSpec>& s, Experiment e, int default_shots) {
  s.push_back(choice("experiment", experiment_names(), experiment_name(e), "experiment to run"));
  s.push_back(integer("seed", "1", 0, "64-bit seed for every random draw"));
  s.push_back(text("output", "", "output directory (empty: out/<experiment>)"));
  if (is_stochastic(e)) s.push_back(integer("shots", std::to_string(default_shots), 0, "repetitions per point"));
}

void add_sideband_scan(std::vector<ParamSpec>& s) {
  s.push_back(qty("omega0", Dimension::angular_frequency, quoted("100 kHz"), "carrier Rabi frequency", true));
  s.push_back(qty("eta", Dimension::dimensionless, "0.1", "Lamb-Dicke parameter", false, 0.0));
  s.push_back(integer("points", "100", 12, "samples per sideband curve"));
  s.push_back(qty("span", Dimension::dimensionless, "2", "scan length in units of pi / (eta omega0)", true));
  s.push_back(qty("contrast", Dimension::dimensionless, "1", "readout contrast", true));
  s.push_back(boolean("full_lamb_dicke", false, "use full Laguerre matrix elements"));
}

void add_rf_dynamics(std::vector<ParamSpec>& s) {
  s.push_back(qty("omega_rf", Dimension::angular_frequency, quoted("27.8 MHz"), "RF drive frequency", true));
  s.push_back(qty("secular_x", Dimension::angular_frequency, quoted("1.48 MHz"), "secular frequency along x", true));
  s.push_back(qty("secular_z", Dimension::angular_frequency, quoted("2.1 MHz"), "secular frequency along z", true));
  s.push_back(qty("damping", Dimension::angular_frequency, quoted("10 kHz"), "laser cooling damping rate", true));
  s.push_back(qty("beam_angle", Dimension::angle, quoted("45 deg"), "probe direction from +x toward +z"));
  s.push_back(qty("saturation", Dimension::dimensionless, "0.5", "probe saturation parameter", true));
}

void add_dephasing(std::vector<ParamSpec>& s, const DephasingModel& m) {
  s.push_back(choice("noise", {"microwave", "raman", "custom"}, "microwave", "noise preset; custom reads the sigma keys"));
  s.push_back(nonneg("sigma_static", Dimension::angular_frequency, si_literal(m.sigma_static, Dimension::angular_frequency),
                     "quasi-static detuning spread"));
  s.push_back(nonneg("sigma_dynamic", Dimension::angular_frequency,
                     si_literal(m.sigma_dynamic, Dimension::angular_frequency), "Ornstein-Uhlenbeck detuning spread"));
  s.push_back(qty("tau_c", Dimension::time, si_literal(m.tau_c, Dimension::time), "noise correlation time", true));
  s.push_back(nonneg("pulse_infidelity", Dimension::dimensionless, "0", "error per pi/2 or pi pulse"));
}

std::vector<ParamSpec> build_schema(Experiment e) {
  using D = Dimension;
  std::vector<ParamSpec> s;
  switch (e) {
    case Experiment::flop: {
      add_common(s, e, 0);
      s.push_back(choice("drive", {"raman", "microwave"}, "raman", "raman: motional sidebands; microwave: noisy carrier"));
      s.push_back(nonneg("nbar", D::dimensionless, "0", "thermal mean occupation"));
      s.push_back(choice("branch", {"carrier", "red", "blue"}, "blue", "transition driven"));
      s.push_back(qty("omega0", D::angular_frequency, quoted("100 kHz"), "carrier Rabi frequency", true));
      s.push_back(qty("eta", D::dimensionless, "0.1", "Lamb-Dicke parameter", false, 0.0));
      s.push_back(qty("detuning", D::angular_frequency, quoted("0 Hz"), "drive detuning"));
      s.push_back(qty("duration", D::time, quoted("100 us"), "longest pulse", true));
      s.push_back(integer("points", "101", 2, "pulse lengths from 0 to duration"));
      s.push_back(boolean("full_lamb_dicke", false, "use full Laguerre matrix elements"));
      s.push_back(choice("noise", {"none", "microwave", "raman"}, "microwave", "detuning noise of the microwave drive"));
      break;
    }
    case Experiment::cool_and_measure: {
      add_common(s, e, 500);
      s.push_back(nonneg("nbar_doppler", D::dimensionless, "4.5", "thermal occupation after Doppler cooling"));
      s.push_back(qty_list("mode_frequencies", D::angular_frequency, R"(["1.48 MHz", "2.1 MHz"])",
                           "radial modes cooled in turn", true));
      s.push_back(integer("measured_mode", "1", 0, "index into mode_frequencies read out by the sidebands"));
      s.push_back(integer("iterations", "50", 0, "sideband cooling steps"));
      s.push_back(boolean("iterations_per_mode", true, "iterations count per mode rather than in total"));
      s.push_back(choice("rule", {"pi_at_n1", "pi_at_nbar", "fixed"}, "pi_at_nbar", "red-sideband pulse length rule"));
      s.push_back(qty("fixed_duration", D::time, quoted("5 us"), "pulse length for rule = fixed", true));
      s.push_back(nonneg("pump_duration", D::time, quoted("20 us"), "optical pumping time per step"));
      s.push_back(nonneg("pump_infidelity", D::dimensionless, "0", "bright population left after pumping"));
      s.push_back(nonneg("cycle_heating_rate", D::rate, quoted("0.8 quanta/ms"), "heating during cooling"));
      add_sideband_scan(s);
      break;
    }
    case Experiment::heating_rate: {
      add_common(s, e, 500);
      s.push_back(nonneg("initial_nbar", D::dimensionless, "0.5", "thermal occupation before the first delay"));
      s.push_back(nonneg("rate", D::rate, quoted("0.8 quanta/ms"), "injected heating rate"));
      s.push_back(choice("heating_model", {"birth_death", "nbar_increment"}, "birth_death", "heating dynamics"));
      s.push_back(qty_list("delays", D::time, R"(["0 ms", "0.25 ms", "0.5 ms", "1 ms"])", "waits before readout", false,
                           0.0));
      s.push_back(qty("mode_frequency", D::angular_frequency, quoted("2.1 MHz"), "mode used for the field noise", true));
      s.push_back(choice("uncertainty", {"linear", "bootstrap"}, "linear", "nbar error propagation"));
      s.push_back(integer("bootstrap_samples", "200", 2, "resamples for uncertainty = bootstrap"));
      add_sideband_scan(s);
      break;
    }
    case Experiment::detection_fidelity: {
      const DetectionModel m = DetectionModel::calibrated();
      add_common(s, e, 100000);
      s.push_back(qty("bright_rate", D::rate, si_literal(m.bright_rate, D::rate), "detected photons from |1>", true));
      s.push_back(nonneg("background_rate", D::rate, si_literal(m.background_rate, D::rate), "background photons"));
      s.push_back(qty("depump_tau", D::time, si_literal(m.depump_tau, D::time), "mean |1> -> |0> leak time", true));
      s.push_back(qty("repump_tau", D::time, si_literal(m.repump_tau, D::time), "mean |0> -> |1> leak time", true));
      s.push_back(nonneg("threshold", D::dimensionless, si_literal(m.threshold, D::dimensionless),
                         "counts above are bright"));
      std::vector<double> windows;
      for (int i = 1; i <= 20; ++i) windows.push_back(i * 1e-4);
      s.push_back(qty_list("windows", D::time, si_list_literal(windows, D::time), "detection windows", true));
      s.push_back(boolean("analytic", true, "append the closed-form error model"));
      break;
    }
    case Experiment::ramsey:
    case Experiment::spin_echo: {
      add_common(s, e, 100);
      add_dephasing(s, DephasingModel::microwave());
      const auto delays = e == Experiment::ramsey ? default_ramsey_delays() : default_echo_delays();
      s.push_back(qty_list("delays", D::time, si_list_literal(delays, D::time), "free evolution times", false, 0.0));
      s.push_back(integer("phase_points", "8", 3, "analysis phases per fringe"));
      s.push_back(boolean("projective", true, "single-shot 0/1 outcomes rather than probabilities"));
      s.push_back(qty_list("fringe_delays", D::time, "[]", "delays whose full fringes go to fringes.csv", false, 0.0));
      s.push_back(integer("fringe_points", "24", 3, "phases per fringe in fringes.csv"));
      break;
    }
    case Experiment::micromotion_spectrum: {
      add_common(s, e, 0);
      add_rf_dynamics(s);
      s.push_back(qty("detuning", D::angular_frequency, quoted("-9.8 MHz"), "cooling beam detuning"));
      s.push_back(qty_list("stray_fields", D::electric_field, R"(["0 V/m", "15 V/m", "30 V/m", "45 V/m"])",
                           "stray field magnitudes", false, 0.0));
      s.push_back(qty("field_angle", D::angle, quoted("45 deg"), "stray field direction from +x"));
      s.push_back(qty_list("excitation_depths", D::dimensionless, "[0.002]", "RF modulation depth of the tone", false,
                           0.0));
      s.push_back(qty("offset_min", D::angular_frequency, quoted("1.3 MHz"), "lowest tone offset from the RF drive"));
      s.push_back(qty("offset_max", D::angular_frequency, quoted("2.3 MHz"), "highest tone offset"));
      s.push_back(integer("offset_points", "101", 2, "tone offsets"));
      s.push_back(integer("steps_per_cycle", "64", 50, "integrator steps per RF period"));
      s.push_back(boolean("compensate", false, "also run the compensation search"));
      s.push_back(qty("compensation_range", D::electric_field, quoted("30 V/m"),
                     "search half-width; larger fields turn the excitation peak into a dip", true));
      break;
    }
    case Experiment::rf_phase_contrast: {
      add_common(s, e, 0);
      add_rf_dynamics(s);
      s[s.size() - 2] = qty("beam_angle", D::angle, quoted("0 deg"), "probe direction from +x toward +z");
      s.push_back(qty("detuning", D::angular_frequency, quoted("-9.8 MHz"), "probe detuning"));
      s.push_back(qty_list("stray_fields", D::electric_field, R"(["0 V/m", "10 V/m", "20 V/m", "50 V/m", "100 V/m"])",
                           "stray field magnitudes", false, 0.0));
      s.push_back(qty_list("field_angles", D::angle, R"(["0 deg", "90 deg"])", "stray field directions from +x"));
      s.push_back(integer("bins", "32", 4, "RF phase bins"));
      s.push_back(integer("steps_per_cycle", "256", 50, "integrator steps per RF period"));
      break;
    }
    case Experiment::lineshape: {
      add_common(s, e, 0);
      add_rf_dynamics(s);
      s.back() = qty("saturation", D::dimensionless, "0.01", "probe saturation parameter", true);
      s.push_back(qty_list("stray_fields", D::electric_field, R"(["0 V/m", "100 V/m", "300 V/m"])",
                           "stray field magnitudes", false, 0.0));
      s.push_back(qty("field_angle", D::angle, quoted("45 deg"), "stray field direction from +x"));
      s.push_back(qty("detuning_span", D::angular_frequency, quoted("80 MHz"), "half-width of the probe scan", true));
      s.push_back(integer("points", "161", 3, "probe detunings"));
      s.push_back(integer("steps_per_cycle", "256", 50, "velocity samples per RF period"));
      break;
    }
    case Experiment::trap_characterize: {
      add_common(s, e, 0);
      s.push_back(qty("geometry.inner_edge", D::length, quoted("70 um"), "RF rail inner edge from the centre", true));
      s.push_back(qty("geometry.rf_width", D::length, quoted("60 um"), "RF rail width", true));
      s.push_back(nonneg("geometry.gap", D::length, quoted("5 um"), "electrode gap"));
      s.push_back(nonneg("geometry.slot_width", D::length, quoted("100 um"), "central slot width"));
      s.push_back(qty("geometry.outer_extent", D::length, quoted("500 um"), "outer DC rail edge", true));
      s.push_back(qty("geometry.inner_dc", D::voltage, quoted("0 V"), "inner DC rails"));
      s.push_back(qty("geometry.outer_dc", D::voltage, quoted("0 V"), "outer DC rails"));
      s.push_back(qty("v_rf", D::voltage, quoted("220 V"), "RF amplitude", true));
      s.push_back(qty("omega_rf", D::angular_frequency, quoted("27.8 MHz"), "RF drive frequency", true));
      s.push_back(boolean("calibrate_split", false, "solve DC voltages for the target pair"));
      s.push_back(qty("target_high", D::angular_frequency, quoted("2.1 MHz"), "upper radial target", true));
      s.push_back(qty("target_low", D::angular_frequency, quoted("1.48 MHz"), "lower radial target", true));
      s.push_back(qty("map.x_min", D::length, quoted("-150 um"), "field map extent"));
      s.push_back(qty("map.x_max", D::length, quoted("150 um"), "field map extent"));
      s.push_back(qty("map.z_min", D::length, quoted("20 um"), "field map extent", true));
      s.push_back(qty("map.z_max", D::length, quoted("250 um"), "field map extent", true));
      s.push_back(integer("map.nx", "31", 2, "field map columns"));
      s.push_back(integer("map.nz", "24", 2, "field map rows"));
      break;
    }
    case Experiment::comb_plan: {
      add_common(s, e, 0);
      s.push_back(qty("rep_rate", D::angular_frequency, quoted("76 MHz"), "comb repetition rate", true));
      s.push_back(integer("harmonic", "166", 1, "comb tooth spacing bridging the splitting"));
      s.push_back(qty("hyperfine", D::angular_frequency, quoted("12.642812118 GHz"), "qubit splitting", true));
      s.push_back(qty("optical_detuning", D::angular_frequency, quoted("-395 GHz"), "Raman detuning from the P1/2 line"));
      s.push_back(qty_list("trap_frequencies", D::angular_frequency, R"(["1.48 MHz", "2.1 MHz"])", "motional modes",
                           true));
      break;
    }
  }
  return s;
}

const std::vector<ParamSpec>& schema_for(Experiment e) {
  static const auto table = [] {
    std::map<Experiment, std::vector<ParamSpec>> m;
    for (auto x : experiments) m.emplace(x, build_schema(x));
    return m;
  }();
  return table.at(e);
}

// ---- lexer ----------------------------------------------------------------

struct RawValue {
  enum class Type { string, number, boolean, array } type = Type::number;
  std::string text;
  bool flag = false;
  std::vector<RawValue> items;
};

struct Entry {
  std::string key;
  RawValue value;
  int line = 0;
  bool override_entry = false;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops a trailing '#' comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_string) {
      if (s[i] == '\\') ++i;
      else if (s[i] == '"') in_string = false;
    } else if (s[i] == '"') {
      in_string = true;
    } else if (s[i] == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

int bracket_balance(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_string) {
      if (s[i] == '\\') ++i;
      else if (s[i] == '"') in_string = false;
    } else if (s[i] == '"') {
      in_string = true;
    } else if (s[i] == '[') {
      ++depth;
    } else if (s[i] == ']') {
      --depth;
    }
  }
  return depth;
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view s) : s_(s) {}

  RawValue parse_all() {
    RawValue v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) throw InvalidArgument(fmt::format("unexpected '{}' after value", s_.substr(pos_)));
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  RawValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) throw InvalidArgument("missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '+' || s_[pos_] == '-' || s_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view tok = s_.substr(start, pos_ - start);
    if (tok.empty()) throw InvalidArgument(fmt::format("unexpected '{}'", c));
    RawValue v;
    if (tok == "true" || tok == "false") {
      v.type = RawValue::Type::boolean;
      v.flag = tok == "true";
      return v;
    }
    v.type = RawValue::Type::number;
    v.text.assign(tok);
    std::erase(v.text, '_');
    return v;
  }

  RawValue parse_string() {
    RawValue v;
    v.type = RawValue::Type::string;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: throw InvalidArgument(fmt::format("unknown escape '\\{}'", e));
        }
      }
      v.text.push_back(c);
    }
    if (pos_ >= s_.size()) throw InvalidArgument("unterminated string");
    ++pos_;
    return v;
  }

  RawValue parse_array() {
    RawValue v;
    v.type = RawValue::Type::array;
    ++pos_;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) throw InvalidArgument("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      RawValue item = parse_value();
      if (item.type == RawValue::Type::array) throw InvalidArgument("nested arrays are not supported");
      v.items.push_back(std::move(item));
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      else if (pos_ < s_.size() && s_[pos_] != ']') throw InvalidArgument("expected ',' or ']' in array");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

// Splits "key = value" and parses the value. Returns false and records an issue on failure.
bool parse_assignment(std::string_view logical, int line, const std::string& section, bool override_entry,
                      std::vector<Entry>& entries, std::vector<ConfigIssue>& issues) {
  const auto eq = logical.find('=');
  if (eq == std::string_view::npos) {
    issues.push_back({line, "", fmt::format("expected 'key = value', got '{}'", trim(logical))});
    return false;
  }
  const std::string_view key = trim(logical.substr(0, eq));
  if (!valid_key(key)) {
    issues.push_back({line, std::string(key), "invalid key"});
    return false;
  }
  const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
  try {
    RawValue v = ValueParser(logical.substr(eq + 1)).parse_all();
    entries.push_back({full, std::move(v), line, override_entry});
  } catch (const InvalidArgument& err) {
    issues.push_back({line, full, err.what()});
    return false;
  }
  return true;
}

std::vector<Entry> parse_document(std::string_view text, std::vector<ConfigIssue>& issues) {
  std::vector<Entry> entries;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& out) {
    if (pos > text.size()) return false;
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    out = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return true;
  };
  std::string_view raw;
  while (next_line(raw)) {
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const int start_line = line_no;
    if (line.front() == '[' && line.find('=') == std::string_view::npos) {
      if (line.back() != ']' || !valid_key(trim(line.substr(1, line.size() - 2)))) {
        issues.push_back({start_line, "", fmt::format("malformed section header '{}'", line)});
        continue;
      }
      section.assign(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    std::string logical(line);
    // Arrays may continue over several lines.
    while (bracket_balance(logical) > 0) {
      std::string_view more;
      if (!next_line(more)) break;
      logical += ' ';
      logical += trim(strip_comment(more));
    }
    parse_assignment(logical, start_line, section, false, entries, issues);
  }
  return entries;
}

// ---- conversion -----------------------------------------------------------

std::string nearest_key(std::string_view key, std::span<const ParamSpec> schema) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& p : schema) {
    const auto d = edit_distance(key, p.key);
    if (d < best_d) {
      best_d = d;
      best = p.key;
    }
  }
  return best;
}

std::string nearest_name(std::string_view name, std::span<const std::string> names) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& n : names) {
    const auto d = edit_distance(name, n);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

double to_quantity(const RawValue& v, Dimension dim) {
  if (v.type == RawValue::Type::string) return parse_quantity(v.text, dim);
  if (v.type == RawValue::Type::number) {
    if (dim != Dimension::dimensionless) {
      throw InvalidArgument(fmt::format("{} needs an explicit unit, e.g. \"{} {}\"", dimension_name(dim), v.text,
                                        format_quantity(1.0, dim).substr(2)));
    }
    return parse_quantity(v.text, dim);
  }
  throw InvalidArgument(fmt::format("expected a {} quantity", dimension_name(dim)));
}

void check_bounds(double x, const ParamSpec& spec) {
  if (spec.positive && !(x > 0.0)) throw InvalidArgument(fmt::format("must be > 0 (got {})", x));
  if (spec.minimum && !(x >= *spec.minimum)) {
    throw InvalidArgument(fmt::format("must be >= {} (got {})", *spec.minimum, x));
  }
}

ParamValue convert(const RawValue& v, const ParamSpec& spec) {
  switch (spec.kind) {
    case ParamKind::quantity: {
      const double x = to_quantity(v, spec.dim);
      check_bounds(x, spec);
      return x;
    }
    case ParamKind::integer: {
      if (v.type != RawValue::Type::number) throw InvalidArgument("expected an integer");
      std::int64_t n = 0;
      const char* b = v.text.data();
      const char* e = b + v.text.size();
      if (b != e && *b == '+') ++b;
      const auto [ptr, ec] = std::from_chars(b, e, n);
      if (ec != std::errc() || ptr != e) throw InvalidArgument(fmt::format("expected an integer, got '{}'", v.text));
      check_bounds(static_cast<double>(n), spec);
      return n;
    }
    case ParamKind::boolean:
      if (v.type != RawValue::Type::boolean) throw InvalidArgument("expected true or false");
      return v.flag;
    case ParamKind::choice: {
      if (v.type != RawValue::Type::string) throw InvalidArgument("expected a quoted string");
      if (std::find(spec.choices.begin(), spec.choices.end(), v.text) == spec.choices.end()) {
        std::string all;
        for (const auto& c : spec.choices) all += (all.empty() ? "" : ", ") + c;
        throw InvalidArgument(fmt::format("'{}' is not one of: {} (did you mean '{}'?)", v.text, all,
                                          nearest_name(v.text, spec.choices)));
      }
      return v.text;
    }
    case ParamKind::text:
      if (v.type != RawValue::Type::string) throw InvalidArgument("expected a quoted string");
      return v.text;
    case ParamKind::quantity_list: {
      if (v.type != RawValue::Type::array) throw InvalidArgument("expected an array");
      std::vector<double> out;
      for (const auto& item : v.items) {
        const double x = to_quantity(item, spec.dim);
        check_bounds(x, spec);
        out.push_back(x);
      }
      return out;
    }
  }
  throw std::logic_error("unhandled parameter kind");
}

RawValue parse_literal(const std::string& literal) { return ValueParser(literal).parse_all(); }

std::string escape(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string format_value(const ParamValue& v, const ParamSpec& spec) {
  switch (spec.kind) {
    case ParamKind::quantity: return si_literal(std::get<double>(v), spec.dim);
    case ParamKind::integer: return std::to_string(std::get<std::int64_t>(v));
    case ParamKind::boolean: return std::get<bool>(v) ? "true" : "false";
    case ParamKind::choice:
    case ParamKind::text: return escape(std::get<std::string>(v));
    case ParamKind::quantity_list: return si_list_literal(std::get<std::vector<double>>(v), spec.dim);
  }
  return {};
}

std::string issue_text(const ConfigIssue& i) {
  std::string where = i.line > 0 ? fmt::format("line {}: ", i.line) : (i.line < 0 ? "override: " : "");
  if (!i.key.empty()) where += i.key + ": ";
  return where + i.message;
}

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string out = fmt::format("invalid configuration ({} problem{})", issues.size(), issues.size() == 1 ? "" : "s");
  for (const auto& i : issues) out += "\n  " + issue_text(i);
  return out;
}

}  // namespace

std::span<const Experiment> all_experiments() { return experiments; }

const char* experiment_name(Experiment e) noexcept {
  switch (e) {
    case Experiment::flop: return "flop";
    case Experiment::cool_and_measure: return "cool_and_measure";
    case Experiment::heating_rate: return "heating_rate";
    case Experiment::detection_fidelity: return "detection_fidelity";
    case Experiment::ramsey: return "ramsey";
    case Experiment::spin_echo: return "spin_echo";
    case Experiment::micromotion_spectrum: return "micromotion_spectrum";
    case Experiment::rf_phase_contrast: return "rf_phase_contrast";
    case Experiment::lineshape: return "lineshape";
    case Experiment::trap_characterize: return "trap_characterize";
    case Experiment::comb_plan: return "comb_plan";
  }
  return "?";
}

std::optional<Experiment> experiment_from_name(std::string_view name) {
  for (auto e : experiments) {
    if (name == experiment_name(e)) return e;
  }
  return std::nullopt;
}

std::span<const ParamSpec> experiment_schema(Experiment e) { return schema_for(e); }

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const ParamValue& ExperimentConfig::lookup(std::string_view key) const {
  for (const auto& [k, v] : values_) {
    if (k == key) {
      accessed_.emplace(k);
      return v;
    }
  }
  // A module asked for something the schema does not define.
  throw std::logic_error(fmt::format("config key '{}' is not in the {} schema", key, experiment_name(experiment)));
}

double ExperimentConfig::quantity(std::string_view key) const { return std::get<double>(lookup(key)); }
std::int64_t ExperimentConfig::integer(std::string_view key) const { return std::get<std::int64_t>(lookup(key)); }
bool ExperimentConfig::flag(std::string_view key) const { return std::get<bool>(lookup(key)); }
const std::string& ExperimentConfig::text(std::string_view key) const { return std::get<std::string>(lookup(key)); }
const std::vector<double>& ExperimentConfig::list(std::string_view key) const {
  return std::get<std::vector<double>>(lookup(key));
}
bool ExperimentConfig::has(std::string_view key) const {
  return std::any_of(values_.begin(), values_.end(), [&](const auto& kv) { return kv.first == key; });
}

std::string ExperimentConfig::to_text() const {
  const auto& schema = schema_for(experiment);
  std::string top;
  std::map<std::string, std::string> sections;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto& spec = schema[i];
    const auto dot = spec.key.find('.');
    if (dot == std::string::npos) {
      top += fmt::format("{} = {}\n", spec.key, format_value(values_[i].second, spec));
    } else {
      sections[spec.key.substr(0, dot)] +=
          fmt::format("{} = {}\n", spec.key.substr(dot + 1), format_value(values_[i].second, spec));
    }
  }
  for (const auto& [name, body] : sections) top += fmt::format("\n[{}]\n{}", name, body);
  return top;
}

ExperimentConfig validate_config(std::string_view text, std::span<const std::string> overrides) {
  std::vector<ConfigIssue> issues;
  std::vector<Entry> entries = parse_document(text, issues);
  for (const auto& o : overrides) {
    std::vector<Entry> extra;
    if (parse_assignment(trim(strip_comment(o)), -1, "", true, extra, issues)) {
      auto& e = extra.front();
      std::erase_if(entries, [&](const Entry& x) { return x.key == e.key; });
      entries.push_back(std::move(e));
    }
  }

  // Duplicate keys in the file itself.
  std::map<std::string, int> first_line;
  for (const auto& e : entries) {
    if (e.override_entry) continue;
    auto [it, inserted] = first_line.emplace(e.key, e.line);
    if (!inserted) issues.push_back({e.line, e.key, fmt::format("duplicate key (first set on line {})", it->second)});
  }

  const auto exp_entry = std::find_if(entries.begin(), entries.end(), [](const Entry& e) { return e.key == "experiment"; });
  if (exp_entry == entries.end()) {
    issues.push_back({0, "experiment", "missing required key"});
    throw ConfigError(std::move(issues));
  }
  std::optional<Experiment> exp;
  if (exp_entry->value.type == RawValue::Type::string) exp = experiment_from_name(exp_entry->value.text);
  if (!exp) {
    const auto names = experiment_names();
    issues.push_back({exp_entry->line, "experiment",
                      fmt::format("unknown experiment '{}' (did you mean '{}'?)", exp_entry->value.text,
                                  nearest_name(exp_entry->value.text, names))});
    throw ConfigError(std::move(issues));
  }

  const auto& schema = schema_for(*exp);
  std::map<std::string, const Entry*> given;
  for (const auto& e : entries) {
    const bool known = std::any_of(schema.begin(), schema.end(), [&](const ParamSpec& p) { return p.key == e.key; });
    if (!known) {
      std::string msg = fmt::format("unknown key for experiment '{}' (nearest valid key: '{}')", experiment_name(*exp),
                                    nearest_key(e.key, schema));
      if (e.key == "shots") msg = fmt::format("experiment '{}' is deterministic and takes no shots", experiment_name(*exp));
      issues.push_back({e.line, e.key, std::move(msg)});
      continue;
    }
    given[e.key] = &e;
  }

  ExperimentConfig cfg;
  cfg.experiment = *exp;
  for (const auto& spec : schema) {
    const auto it = given.find(spec.key);
    if (it == given.end()) {
      cfg.values_.emplace_back(spec.key, convert(parse_literal(spec.default_literal), spec));
      continue;
    }
    try {
      cfg.values_.emplace_back(spec.key, convert(it->second->value, spec));
    } catch (const InvalidArgument& err) {
      issues.push_back({it->second->line, spec.key, err.what()});
      cfg.values_.emplace_back(spec.key, convert(parse_literal(spec.default_literal), spec));
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  cfg.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(cfg.values_[1].second));
  cfg.output_path = std::get<std::string>(cfg.values_[2].second);
  if (cfg.output_path.empty()) cfg.output_path = std::string("out/") + experiment_name(*exp);
  if (schema.size() > 3 && schema[3].key == "shots") {
    const auto shots = std::get<std::int64_t>(cfg.values_[3].second);
    if (shots > 100'000'000) {
      throw ConfigError({{given.count("shots") ? given["shots"]->line : 0, "shots", "must be <= 100000000"}});
    }
    cfg.shots = static_cast<int>(shots);
  }
  return cfg;
}

}  // namespace iontrap

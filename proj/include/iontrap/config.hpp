#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "iontrap/errors.hpp"
#include "iontrap/units.hpp"

namespace iontrap {

enum class Experiment {
  flop,
  cool_and_measure,
  heating_rate,
  detection_fidelity,
  ramsey,
  spin_echo,
  micromotion_spectrum,
  rf_phase_contrast,
  lineshape,
  trap_characterize,
  comb_plan,
};

std::span<const Experiment> all_experiments();
const char* experiment_name(Experiment e) noexcept;
std::optional<Experiment> experiment_from_name(std::string_view name);

enum class ParamKind {
  quantity,       // number with a unit (bare number when dimensionless)
  integer,
  boolean,
  choice,         // one string out of ParamSpec::choices
  text,
  quantity_list,  // array of quantities
};

/// One key of an experiment's schema. `default_literal` is written in file
/// syntax and parsed like user input.
struct ParamSpec {
  std::string key;
  ParamKind kind = ParamKind::quantity;
  Dimension dim = Dimension::dimensionless;
  std::string default_literal;
  std::vector<std::string> choices;
  std::optional<double> minimum;  // inclusive, in SI units
  bool positive = false;          // strictly > 0 (every element for lists)
  std::string help;
};

/// Schema of one experiment, including the common keys (experiment, seed,
/// output and, for stochastic experiments, shots).
std::span<const ParamSpec> experiment_schema(Experiment e);

using ParamValue = std::variant<double, std::int64_t, bool, std::string, std::vector<double>>;

struct ConfigIssue {
  int line = 0;  // 0: not tied to a line (missing key, command-line override)
  std::string key;
  std::string message;
};

/// Validation failure carrying every problem found in one pass.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  [[nodiscard]] const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Resolved configuration: every schema key has a value (given or default),
/// physical quantities are in SI units.
class ExperimentConfig {
 public:
  Experiment experiment = Experiment::flop;
  std::uint64_t seed = 1;
  int shots = 0;  // 0 for deterministic experiments
  std::string output_path;

  [[nodiscard]] double quantity(std::string_view key) const;
  [[nodiscard]] std::int64_t integer(std::string_view key) const;
  [[nodiscard]] bool flag(std::string_view key) const;
  [[nodiscard]] const std::string& text(std::string_view key) const;
  [[nodiscard]] const std::vector<double>& list(std::string_view key) const;
  [[nodiscard]] bool has(std::string_view key) const;

  /// (key, value) in schema order.
  [[nodiscard]] const std::vector<std::pair<std::string, ParamValue>>& values() const noexcept { return values_; }

  /// Keys read through the typed getters since construction.
  [[nodiscard]] const std::set<std::string>& accessed() const noexcept { return accessed_; }

  /// Config file text that parses back to an identical ExperimentConfig.
  [[nodiscard]] std::string to_text() const;

 private:
  friend ExperimentConfig validate_config(std::string_view, std::span<const std::string>);
  const ParamValue& lookup(std::string_view key) const;

  std::vector<std::pair<std::string, ParamValue>> values_;
  mutable std::set<std::string> accessed_;
};

/// Parses and validates config text. `overrides` are "key = value" lines in
/// file syntax applied after the file (dotted keys address sections).
/// Throws ConfigError listing every problem with its line.
ExperimentConfig validate_config(std::string_view text, std::span<const std::string> overrides = {});

/// Levenshtein distance, for "did you mean" suggestions.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace iontrap

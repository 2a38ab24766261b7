#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "iontrap/config.hpp"

namespace iontrap {

const char* artifact_version() noexcept;

using Cell = std::variant<double, std::int64_t, std::string>;

/// One CSV file of a run.
struct Table {
  std::string file;  // "results.csv", "fringes.csv", ...
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// Doubles print in shortest round-trip form, so equal data gives equal bytes.
std::string to_csv(const Table& table);

struct RunResult {
  std::vector<Table> tables;  // tables.front() is results.csv
  nlohmann::json summary;
};

/// Runs the experiment without touching the filesystem. `workers` only
/// changes speed, never the numbers.
RunResult execute(const ExperimentConfig& config, unsigned workers = 0);

struct RunRecord {
  std::string config_text;  // resolved config, parses back to the same run
  std::uint64_t seed = 0;
  std::string version;
  std::string started_utc;
  double wall_clock_s = 0.0;
  std::filesystem::path directory;
  std::vector<std::string> result_files;
  nlohmann::json summary;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct RunOptions {
  std::filesystem::path directory;  // empty: config.output_path
  unsigned workers = 0;
};

/// execute() plus results.csv (and any extra tables) and run.json in the
/// output directory. Module errors are rethrown with the experiment name.
RunRecord run(const ExperimentConfig& config, const RunOptions& options = {});

/// Re-runs the config stored in a run.json.
RunRecord replay(const std::filesystem::path& run_json, const RunOptions& options = {});

struct Recipe {
  std::string name;
  std::string description;
  std::string config_text;
};

/// One canned config per reproduced figure panel.
std::span<const Recipe> figure_recipes();

/// Throws InvalidArgument naming the closest recipe when `name` is unknown.
const Recipe& find_recipe(std::string_view name);

}  // namespace iontrap

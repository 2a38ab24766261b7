// Command-line front end: one subcommand per experiment plus recipe,
// replay and schema helpers.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "iontrap/config.hpp"
#include "iontrap/runner.hpp"

namespace {

using namespace iontrap;

enum Exit { ok = 0, failure = 1, config_error = 2, instability = 3 };

struct RunFlags {
  std::string config_file;
  std::string recipe;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> shots;
  std::string out;
  std::vector<std::string> sets;
  unsigned threads = 0;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--config", f.config_file, "config file")->check(CLI::ExistingFile);
  app->add_option("--recipe", f.recipe, "start from a canned figure recipe");
  app->add_option("--seed", f.seed, "override the seed");
  app->add_option("--shots", f.shots, "override shots per point");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--set", f.sets, "override a key: --set 'nbar = 0.5'");
  app->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_with(const RunFlags& f, std::optional<Experiment> forced) {
  if (!f.recipe.empty() && !f.config_file.empty()) {
    throw ConfigError({{0, "", "give either --config or --recipe; use --set to adjust a recipe"}});
  }
  const std::string text = f.recipe.empty() ? read_file(f.config_file) : find_recipe(f.recipe).config_text;
  std::vector<std::string> overrides = f.sets;
  if (f.seed) overrides.push_back(fmt::format("seed = {}", *f.seed));
  if (f.shots) overrides.push_back(fmt::format("shots = {}", *f.shots));
  if (forced) {
    if (text.find("experiment") == std::string::npos) {
      overrides.push_back(fmt::format("experiment = \"{}\"", experiment_name(*forced)));
    }
  }
  const ExperimentConfig cfg = validate_config(text, overrides);
  if (forced && cfg.experiment != *forced) {
    throw ConfigError({{0, "experiment",
                        fmt::format("config selects '{}' but the subcommand is '{}'", experiment_name(cfg.experiment),
                                    experiment_name(*forced))}});
  }
  RunOptions opt;
  opt.directory = f.out;
  opt.workers = f.threads;
  const RunRecord rec = run(cfg, opt);
  fmt::print("{} -> {} ({:.2f} s)\n", experiment_name(cfg.experiment), rec.directory.string(), rec.wall_clock_s);
  std::cout << rec.summary.dump(2) << '\n';
  return ok;
}

int print_schema(const std::string& name) {
  const auto e = experiment_from_name(name);
  if (!e) throw ConfigError({{0, "experiment", fmt::format("unknown experiment '{}'", name)}});
  for (const auto& p : experiment_schema(*e)) {
    fmt::print("{:<22} {:<26} {}\n", p.key, p.default_literal, p.help);
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trapped-ion qubit and surface-trap simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(iontrap::artifact_version()));

  std::vector<RunFlags> per_experiment(iontrap::all_experiments().size());
  std::vector<CLI::App*> experiment_commands;
  for (std::size_t i = 0; i < per_experiment.size(); ++i) {
    const auto e = iontrap::all_experiments()[i];
    auto* sub = app.add_subcommand(iontrap::experiment_name(e), fmt::format("run the {} experiment", iontrap::experiment_name(e)));
    add_run_flags(sub, per_experiment[i]);
    experiment_commands.push_back(sub);
  }

  RunFlags generic;
  auto* run_cmd = app.add_subcommand("run", "run a config file or recipe");
  add_run_flags(run_cmd, generic);

  auto* recipes_cmd = app.add_subcommand("recipes", "list the figure recipes");
  bool show_text = false;
  recipes_cmd->add_flag("--show", show_text, "print each recipe's config");

  std::string run_json;
  std::string replay_out;
  unsigned replay_threads = 0;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the config stored in a run.json");
  replay_cmd->add_option("run_json", run_json, "run.json of an earlier run")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "output directory")->required();
  replay_cmd->add_option("--threads", replay_threads, "worker threads");

  std::string schema_name;
  auto* schema_cmd = app.add_subcommand("schema", "list the keys an experiment accepts");
  schema_cmd->add_option("experiment", schema_name, "experiment name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < experiment_commands.size(); ++i) {
      if (*experiment_commands[i]) return run_with(per_experiment[i], iontrap::all_experiments()[i]);
    }
    if (*run_cmd) {
      if (generic.config_file.empty() && generic.recipe.empty()) {
        std::cerr << "run: give --config or --recipe\n";
        return config_error;
      }
      return run_with(generic, std::nullopt);
    }
    if (*recipes_cmd) {
      for (const auto& r : iontrap::figure_recipes()) {
        fmt::print("{:<14} {}\n", r.name, r.description);
        if (show_text) fmt::print("{}\n", r.config_text);
      }
      return ok;
    }
    if (*replay_cmd) {
      iontrap::RunOptions opt;
      opt.directory = replay_out;
      opt.workers = replay_threads;
      const auto rec = iontrap::replay(run_json, opt);
      fmt::print("replayed -> {}\n", rec.directory.string());
      return ok;
    }
    if (*schema_cmd) return print_schema(schema_name);
  } catch (const iontrap::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return config_error;
  } catch (const iontrap::InstabilityError& e) {
    std::cerr << "unstable: " << e.what() << '\n';
    return instability;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failure;
  }
  return failure;
}

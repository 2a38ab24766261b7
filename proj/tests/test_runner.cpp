#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "iontrap/config.hpp"
#include "iontrap/runner.hpp"
#include "support.hpp"

using namespace iontrap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string all_csv(const RunResult& r) {
  std::string out;
  for (const auto& t : r.tables) out += t.file + "\n" + to_csv(t);
  return out;
}

std::size_t column(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i] == name) return i;
  }
  FAIL("no column " << name);
  return 0;
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("ground-state red sideband stays dark") {
    const auto cfg = validate_config("experiment = \"flop\"\ndrive = \"raman\"\nbranch = \"red\"\nnbar = 0\npoints = 21\nshots = 50\n");
    const auto r = execute(cfg, 1);
    const auto& t = r.tables.front();
    CHECK(t.file == "results.csv");
    CHECK(t.rows.size() == 21);
    const auto p = column(t, "p_bright");
    for (const auto& row : t.rows) CHECK(std::get<double>(row[p]) == 0.0);
  }

  TEST_CASE("heating defaults recover the injected rate") {
    const auto r = execute(validate_config("experiment = \"heating_rate\"\n"), 0);
    const double rate = r.summary["rate_per_s"];
    const double sigma = r.summary["rate_uncertainty_per_s"];
    MESSAGE("rate " << rate << " +- " << sigma);
    CHECK(r.summary["rate_injected_per_s"].get<double>() == testing::approx(800.0));
    CHECK(std::abs(rate - 800.0) < 4.0 * sigma + 50.0);
  }

  TEST_CASE("csv doubles round-trip") {
    Table t{"x.csv", {"a", "b", "c"}, {{0.1, std::int64_t(3), std::string("red")}, {1.0 / 3.0, std::int64_t(-1), std::string("a,b")}}};
    const auto csv = to_csv(t);
    CHECK(csv.rfind("a,b,c\n0.1,3,red\n", 0) == 0);
    CHECK(csv.find("0.3333333333333333,") != std::string::npos);
    CHECK(csv.find("\"a,b\"") != std::string::npos);
  }

  TEST_CASE("results do not depend on reruns or worker count") {
    const auto cfg = validate_config("experiment = \"ramsey\"\nshots = 40\nfringe_delays = [\"100 ms\"]\n");
    const auto a = all_csv(execute(cfg, 1));
    CHECK(a == all_csv(execute(cfg, 1)));
    CHECK(a == all_csv(execute(cfg, 4)));
    const auto other = validate_config("experiment = \"ramsey\"\nshots = 40\nfringe_delays = [\"100 ms\"]\nseed = 2\n");
    CHECK(a != all_csv(execute(other, 1)));
  }

  TEST_CASE("run writes files and replay reproduces them") {
    const fs::path base = fs::temp_directory_path() / "iontrap_runner_test";
    fs::remove_all(base);
    const auto cfg = validate_config("experiment = \"detection_fidelity\"\nshots = 2000\nseed = 5\n");
    RunOptions opt;
    opt.directory = base / "first";
    const auto rec = run(cfg, opt);
    CHECK(fs::exists(base / "first" / "results.csv"));
    CHECK(fs::exists(base / "first" / "run.json"));
    CHECK(rec.seed == 5);
    CHECK(rec.version == artifact_version());
    CHECK(validate_config(rec.config_text).values() == cfg.values());

    opt.directory = base / "second";
    opt.workers = 3;
    const auto again = replay(base / "first" / "run.json", opt);
    CHECK(slurp(base / "first" / "results.csv") == slurp(base / "second" / "results.csv"));
    CHECK(again.summary == rec.summary);
    fs::remove_all(base);
  }

  TEST_CASE("every schema key is used by some run") {
    // Recipes plus configs that reach the optional branches.
    std::vector<std::string> texts;
    for (const auto& r : figure_recipes()) texts.push_back(r.config_text);
    texts.push_back("experiment = \"flop\"\ndrive = \"raman\"\nfull_lamb_dicke = true\ndetuning = \"1 kHz\"\npoints = 5\n");
    texts.push_back("experiment = \"cool_and_measure\"\nrule = \"fixed\"\npump_infidelity = 0.01\nmeasured_mode = 0\n");
    texts.push_back("experiment = \"heating_rate\"\nuncertainty = \"bootstrap\"\nbootstrap_samples = 20\nheating_model = \"nbar_increment\"\n");
    texts.push_back("experiment = \"ramsey\"\nnoise = \"custom\"\npulse_infidelity = 0.01\nprojective = false\nfringe_delays = [\"10 ms\"]\nshots = 20\n");
    texts.push_back("experiment = \"spin_echo\"\nnoise = \"custom\"\nshots = 20\n");
    texts.push_back("experiment = \"detection_fidelity\"\nshots = 100\n");
    texts.push_back("experiment = \"micromotion_spectrum\"\ncompensate = true\nstray_fields = [\"10 V/m\"]\noffset_points = 5\n");
    texts.push_back("experiment = \"rf_phase_contrast\"\nstray_fields = [\"10 V/m\"]\n");
    texts.push_back("experiment = \"lineshape\"\npoints = 11\n");
    texts.push_back("experiment = \"trap_characterize\"\nmap.nx = 3\nmap.nz = 3\n");

    std::map<Experiment, std::set<std::string>> used;
    for (const auto& text : texts) {
      std::vector<std::string> small;
      auto cfg = validate_config(text);
      if (cfg.shots > 500) small.push_back("shots = 100");
      if (cfg.experiment == Experiment::micromotion_spectrum) small.push_back("offset_points = 5");
      if (!small.empty()) cfg = validate_config(text, small);
      execute(cfg, 0);
      used[cfg.experiment].insert(cfg.accessed().begin(), cfg.accessed().end());
    }
    const std::set<std::string> common{"experiment", "seed", "output", "shots"};
    for (Experiment e : all_experiments()) {
      for (const auto& p : experiment_schema(e)) {
        if (common.count(p.key)) continue;
        INFO(experiment_name(e) << "." << p.key);
        CHECK(used[e].count(p.key) == 1);
      }
    }
  }

  TEST_CASE("recipes validate and unknown names get a suggestion") {
    CHECK(figure_recipes().size() == 16);
    for (const auto& r : figure_recipes()) CHECK_NOTHROW(validate_config(r.config_text));
    CHECK(find_recipe("fig6").name == "fig6");
    try {
      find_recipe("fig7");
      FAIL("expected an error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("did you mean") != std::string::npos);
    }
  }
}

#include <numbers>
#include <string>
#include <vector>

#include <doctest.h>

#include "iontrap/config.hpp"
#include "support.hpp"

using namespace iontrap;

namespace {

ConfigError config_error(std::string_view text, std::vector<std::string> overrides = {}) {
  try {
    validate_config(text, overrides);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  return ConfigError({});
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults fill a minimal file") {
    const auto cfg = validate_config("experiment = \"flop\"\n");
    CHECK(cfg.experiment == Experiment::flop);
    CHECK(cfg.seed == 1);
    CHECK(cfg.shots == 0);  // noiseless by default
    CHECK(cfg.output_path == "out/flop");
    CHECK(cfg.quantity("duration") == testing::approx(100e-6).epsilon(1e-15));
    CHECK(cfg.integer("points") == 101);
    CHECK(cfg.text("branch") == "blue");
    CHECK_FALSE(cfg.flag("full_lamb_dicke"));
    CHECK(cfg.values().size() == experiment_schema(Experiment::flop).size());
  }

  TEST_CASE("values, sections, comments and overrides") {
    const auto cfg = validate_config(R"(# trap with a DC tilt
experiment = "trap_characterize"
v_rf = "180 V"   # lower drive
[geometry]
inner_dc = "-2 V"
[map]
nx = 5
)",
                                     std::vector<std::string>{"map.nz = 4", "seed = 99"});
    CHECK(cfg.quantity("v_rf") == 180.0);
    CHECK(cfg.quantity("geometry.inner_dc") == -2.0);
    CHECK(cfg.integer("map.nx") == 5);
    CHECK(cfg.integer("map.nz") == 4);
    CHECK(cfg.seed == 99);
    CHECK(cfg.shots == 0);
    CHECK(cfg.accessed().count("v_rf") == 1);
    CHECK(cfg.accessed().count("map.x_min") == 0);
  }

  TEST_CASE("lists convert every element") {
    const auto cfg = validate_config("experiment = \"heating_rate\"\ndelays = [\"0 ms\", \"500 us\",\n  \"1 ms\"]\n");
    const auto& d = cfg.list("delays");
    REQUIRE(d.size() == 3);
    CHECK(d[1] == testing::approx(5e-4).epsilon(1e-15));
  }

  TEST_CASE("negative shots name the key and line") {
    const auto e = config_error("experiment = \"ramsey\"\nshots = -5\n");
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].key == "shots");
    CHECK(e.issues()[0].line == 2);
    CHECK(std::string(e.what()).find("shots") != std::string::npos);
  }

  TEST_CASE("unknown keys suggest the nearest valid key") {
    const auto e = config_error("experiment = \"ramsey\"\n\ndelay = [\"1 s\"]\n");
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].line == 3);
    CHECK(e.issues()[0].message.find("'delays'") != std::string::npos);
    const auto d = config_error("experiment = \"comb_plan\"\nshots = 10\n");
    CHECK(d.issues()[0].message.find("deterministic") != std::string::npos);
  }

  TEST_CASE("unit problems are reported") {
    auto e = config_error("experiment = \"flop\"\nduration = 100\n");
    CHECK(e.issues()[0].message.find("unit") != std::string::npos);
    e = config_error("experiment = \"flop\"\nduration = \"100 V\"\n");
    CHECK(e.issues()[0].key == "duration");
    e = config_error("experiment = \"flop\"\nduration = \"0 us\"\n");
    CHECK(e.issues()[0].message.find("> 0") != std::string::npos);
  }

  TEST_CASE("all problems come back in one pass") {
    const auto e = config_error("experiment = \"flop\"\nbranch = \"redd\"\npoints = 1.5\nnbar = -1\nbogus = 3\n");
    CHECK(e.issues().size() == 4);
    bool suggested = false;
    for (const auto& i : e.issues()) suggested = suggested || (i.key == "branch" && i.message.find("did you mean 'red'") != std::string::npos);
    CHECK(suggested);
  }

  TEST_CASE("missing or unknown experiment") {
    auto e = config_error("seed = 3\n");
    CHECK(e.issues()[0].key == "experiment");
    e = config_error("experiment = \"ramsy\"\n");
    CHECK(e.issues()[0].message.find("ramsey") != std::string::npos);
    e = config_error("experiment = \"flop\"\nthis is not an assignment\n");
    CHECK(e.issues()[0].line == 2);
  }

  TEST_CASE("resolved text parses back to the same config") {
    for (Experiment ex : all_experiments()) {
      const auto a = validate_config(std::string("experiment = \"") + experiment_name(ex) + "\"\nseed = 12345\n");
      const auto b = validate_config(a.to_text());
      CHECK(a.values() == b.values());
      CHECK(a.seed == b.seed);
      CHECK(a.shots == b.shots);
      CHECK(experiment_from_name(experiment_name(ex)) == ex);
    }
    const auto odd = validate_config("experiment = \"flop\"\nduration = \"0.1234567890123 ms\"\noutput = \"a \\\"b\\\" c\"\n");
    CHECK(validate_config(odd.to_text()).values() == odd.values());
  }

  TEST_CASE("edit distance") {
    CHECK(edit_distance("", "abc") == 3);
    CHECK(edit_distance("kitten", "sitting") == 3);
    CHECK(edit_distance("delays", "delays") == 0);
  }
}

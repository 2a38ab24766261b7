#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "iontrap/runner.hpp"

namespace iontrap {

namespace {

const std::array<Recipe, 16> recipes{{
    {"fig4a", "brightness vs excitation offset for several stray fields", R"(experiment = "micromotion_spectrum"
stray_fields = ["0 V/m", "15 V/m", "30 V/m", "45 V/m"]
excitation_depths = [0.002]
)"},
    {"fig4b", "smaller stray fields need a stronger excitation for the same brightness change",
     R"(experiment = "micromotion_spectrum"
stray_fields = ["10 V/m", "20 V/m"]
excitation_depths = [0.002, 0.004]
)"},
    {"fig5a", "red and blue sideband flops after Doppler cooling only", R"(experiment = "cool_and_measure"
nbar_doppler = 4.5
iterations = 0
)"},
    {"fig5b", "red and blue sideband flops after 50 sideband cooling iterations on both radial modes",
     R"(experiment = "cool_and_measure"
nbar_doppler = 4.5
iterations = 50
iterations_per_mode = true
rule = "pi_at_nbar"
pump_duration = "20 us"
cycle_heating_rate = "0.8 quanta/ms"
)"},
    {"fig5c", "mean occupation vs wait time after cooling, with a linear fit", R"(experiment = "heating_rate"
initial_nbar = 0.5
rate = "0.8 quanta/ms"
delays = ["0 ms", "0.125 ms", "0.25 ms", "0.375 ms", "0.5 ms", "0.625 ms", "0.75 ms", "0.875 ms", "1 ms"]
)"},
    {"fig6", "detection error vs window at threshold 1.5", R"(experiment = "detection_fidelity"
shots = 100000
threshold = 1.5
)"},
    {"fig7a", "microwave Rabi flop with a 0.1 ms pi time", R"(experiment = "flop"
drive = "microwave"
noise = "microwave"
omega0 = "5 kHz"
duration = "0.6 ms"
points = 61
shots = 100
)"},
    {"fig7b", "Ramsey fringes at 100, 1000 and 2400 ms", R"(experiment = "ramsey"
shots = 100
fringe_delays = ["100 ms", "1000 ms", "2400 ms"]
)"},
    {"fig7c_ramsey", "microwave Ramsey visibility vs delay", R"(experiment = "ramsey"
noise = "microwave"
shots = 100
)"},
    {"fig7c_echo", "microwave spin-echo visibility vs delay", R"(experiment = "spin_echo"
noise = "microwave"
shots = 100
)"},
    {"raman_echo", "Raman spin-echo visibility vs delay", R"(experiment = "spin_echo"
noise = "raman"
shots = 100
)"},
    {"trap", "pseudopotential field map and secular frequencies of the six-rail trap", R"(experiment = "trap_characterize"
v_rf = "220 V"
omega_rf = "27.8 MHz"
)"},
    {"trap_split", "DC voltages that split the radial pair to 2.10 / 1.48 MHz", R"(experiment = "trap_characterize"
calibrate_split = true
target_high = "2.1 MHz"
target_low = "1.48 MHz"
map.nx = 11
map.nz = 11
)"},
    {"comb", "AOM offsets for carrier and sidebands of both radial modes", R"(experiment = "comb_plan"
rep_rate = "76 MHz"
harmonic = 166
)"},
    {"lineshape", "Doppler-broadened cooling line vs stray field", R"(experiment = "lineshape"
stray_fields = ["0 V/m", "100 V/m", "300 V/m"]
)"},
    {"rf_contrast", "RF-phase fluorescence contrast for x and z stray fields seen by an x beam",
     R"(experiment = "rf_phase_contrast"
beam_angle = "0 deg"
field_angles = ["0 deg", "90 deg"]
)"},
}};

}  // namespace

std::span<const Recipe> figure_recipes() { return recipes; }

const Recipe& find_recipe(std::string_view name) {
  for (const auto& r : recipes) {
    if (r.name == name) return r;
  }
  const auto best = std::min_element(recipes.begin(), recipes.end(), [&](const Recipe& a, const Recipe& b) {
    return edit_distance(name, a.name) < edit_distance(name, b.name);
  });
  throw InvalidArgument(fmt::format("unknown recipe '{}' (did you mean '{}'?)", name, best->name));
}

}  // namespace iontrap

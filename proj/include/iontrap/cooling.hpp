#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iontrap/spin_motion.hpp"

namespace iontrap {

/// One motional mode addressed by the Raman beams.
struct ModeDescriptor {
  std::string name;
  double trap_frequency = 0.0;  // rad/s
  double eta = 0.1;
  double omega0 = 0.0;          // carrier Rabi frequency, rad/s
};

enum class DurationRule {
  pi_at_n1,    // exact pi on (1, dark) <-> (0, bright)
  pi_at_nbar,  // pi for the current mean occupation, clamped to nbar >= 1
  fixed,       // CoolingSchedule::fixed_duration
};

enum class HeatingModel {
  birth_death,     // rates n_dot (n+1) up and n_dot n down
  nbar_increment,  // replace by the thermal state with nbar + n_dot t
};

struct HeatingProcess {
  double rate = 0.0;  // quanta per second
  HeatingModel model = HeatingModel::birth_death;
};

struct CoolingSchedule {
  int iterations = 50;
  std::vector<ModeDescriptor> modes;
  DurationRule rule = DurationRule::pi_at_n1;
  double fixed_duration = 0.0;         // s, used by DurationRule::fixed
  double pump_reset_infidelity = 0.0;  // bright population left bright per pump
  /// false: `iterations` steps in total, alternating between modes.
  /// true: `iterations` steps on every mode (still interleaved).
  bool iterations_per_mode = false;
  double pump_duration = 0.0;  // s per optical pumping stage
  /// Heating that acts on every mode for the duration of each step (pulse + pump).
  std::optional<HeatingProcess> cycle_heating;

  void validate() const;
};

/// Thermal state after Doppler cooling (spin in |0>).
MotionalDistribution doppler_cool(double nbar_doppler);

/// Duration of the red-sideband pulse the schedule applies to `mode` when its
/// motional distribution has mean `nbar`.
double cooling_pulse_duration(const ModeDescriptor& mode, const CoolingSchedule& schedule, double nbar);

/// One red-sideband pulse followed by optical pumping to |0>.
SpinMotionState sideband_cool_step(const SpinMotionState& state, const ModeDescriptor& mode,
                                   const CoolingSchedule& schedule);

/// Runs the schedule on one distribution per mode (same order as
/// schedule.modes) and returns the final distribution of every mode.
std::vector<MotionalDistribution> sideband_cool(std::vector<MotionalDistribution> dists,
                                                const CoolingSchedule& schedule);

/// Single-mode convenience: the schedule must name exactly one mode.
MotionalDistribution sideband_cool(const MotionalDistribution& dist, const CoolingSchedule& schedule);

struct HeatingResult {
  MotionalDistribution dist;
  double leakage = 0.0;  // probability flux that reached n_max
};

/// Evolves the motional distribution under the heating process. The birth-death
/// generator is integrated exactly by uniformization; n_max grows as needed so
/// that the truncation leakage stays below 1e-9.
HeatingResult heat_with_leakage(const MotionalDistribution& dist, double duration,
                                const HeatingProcess& process);

MotionalDistribution heat(const MotionalDistribution& dist, double duration, const HeatingProcess& process);

}  // namespace iontrap

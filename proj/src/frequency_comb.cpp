#include "iontrap/frequency_comb.hpp"

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

CombConfig CombConfig::reference() {
  CombConfig c;
  c.omega_rep = constants::two_pi * 76e6;
  c.harmonic_n = 166;
  c.delta_hf = constants::yb171_hyperfine_splitting;
  c.optical_detuning = -constants::two_pi * 395e9;
  c.delta_aom = c.delta_hf - c.harmonic_n * c.omega_rep;
  return c;
}

void CombConfig::validate() const {
  if (!(omega_rep > 0.0)) throw InvalidArgument("comb config: omega_rep must be > 0");
  if (harmonic_n < 1) throw InvalidArgument("comb config: harmonic_n must be >= 1");
}

double raman_resonance(const CombConfig& config) {
  config.validate();
  return config.delta_aom + config.harmonic_n * config.omega_rep - config.delta_hf;
}

double sideband_target(const CombConfig& config, double trap_freq, Branch branch) {
  config.validate();
  const double carrier = config.delta_hf - config.harmonic_n * config.omega_rep;
  switch (branch) {
    case Branch::carrier: return carrier;
    case Branch::red_sideband: return carrier - trap_freq;
    case Branch::blue_sideband: return carrier + trap_freq;
  }
  return carrier;
}

}  // namespace iontrap

#pragma once

#include "iontrap/spin_motion.hpp"

namespace iontrap {

/// Raman beat-note bookkeeping: the qubit is driven when
/// delta_aom + n omega_rep matches the hyperfine splitting.
struct CombConfig {
  double omega_rep = 0.0;          // rad/s
  double delta_aom = 0.0;          // rad/s
  int harmonic_n = 1;
  double delta_hf = 0.0;           // rad/s
  double optical_detuning = 0.0;   // rad/s, from the 369.5 nm resonance

  /// 76 MHz repetition rate, n = 166, 171Yb+ splitting, 395 GHz red detuning;
  /// delta_aom set for the carrier.
  static CombConfig reference();
  void validate() const;
};

/// delta_aom + n omega_rep - delta_hf; zero on the carrier.
double raman_resonance(const CombConfig& config);

/// delta_aom that puts raman_resonance at 0 (carrier), -trap_freq (red) or
/// +trap_freq (blue).
double sideband_target(const CombConfig& config, double trap_freq, Branch branch);

}  // namespace iontrap

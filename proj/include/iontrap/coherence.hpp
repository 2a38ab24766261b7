#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iontrap/fitting.hpp"

namespace iontrap {

/// Detuning noise between qubit and oscillator.
///
/// delta(t) = delta_s + x(t): delta_s ~ N(0, sigma_static^2) is redrawn once per
/// shot; x(t) is a stationary Ornstein-Uhlenbeck process with standard deviation
/// sigma_dynamic and correlation time tau_c.
struct DephasingModel {
  double sigma_static = 0.0;   // rad/s
  double sigma_dynamic = 0.0;  // rad/s
  double tau_c = 1.0;          // s
  double pulse_infidelity = 0.0;

  /// Calibrated to a 0.78 s Gaussian Ramsey T2 and a 1.883 s echo T2.
  static DephasingModel microwave();
  /// Microwave model with the dynamic part raised to give a 1.433 s echo T2.
  static DephasingModel raman();

  void validate() const;
};

enum class Sequence { ramsey, spin_echo };

struct FringeOptions {
  int shots = 100;         // experiments per phase
  bool projective = true;  // true: each experiment yields 0 or 1
  unsigned workers = 0;
};

struct Fringe {
  std::vector<double> phases;
  std::vector<double> p1;
  std::vector<double> se;
};

/// Phase accumulated over one sequence by a single noise realization.
/// Ramsey integrates delta over the delay; the echo takes the second half
/// minus the first.
double accumulated_phase(Sequence seq, double delay, const DephasingModel& model, std::uint64_t seed,
                         std::uint64_t stream, std::uint64_t shot);

/// P(|1>) after pi/2 - delay - pi/2(phase). With phase 0 and no noise the
/// qubit is fully transferred. Shot j at phase i draws its own noise.
Fringe ramsey_fringe(double delay, std::span<const double> phases, const DephasingModel& model,
                     const FringeOptions& options, std::uint64_t seed);

/// P(|1>) after pi/2 - delay/2 - pi - delay/2 - pi/2(phase).
Fringe spin_echo_fringe(double delay, std::span<const double> phases, const DephasingModel& model,
                        const FringeOptions& options, std::uint64_t seed);

Fringe run_fringe(Sequence seq, double delay, std::span<const double> phases, const DephasingModel& model,
                  const FringeOptions& options, std::uint64_t seed);

/// Fringe visibility from a linear fit of p = a + c cos(phase) + s sin(phase):
/// V = 2 sqrt(c^2 + s^2), uncertainty by propagation of the fit covariance.
Estimate fringe_visibility(const Fringe& fringe);

/// Noiseless-limit visibilities of the model (characteristic function of the
/// Gaussian accumulated phase).
double ramsey_visibility(const DephasingModel& model, double delay);
double echo_visibility(const DephasingModel& model, double delay);

struct CoherenceResult {
  std::vector<double> delays;
  std::vector<double> visibilities;
  std::vector<double> visibility_se;
  double v0 = 0.0;
  double t2 = 0.0;
  double t2_uncertainty = 0.0;
};

/// Weighted fit of V(t) = V0 exp(-(t/T2)^2). Empty or non-positive errors fall
/// back to unit weights. Covariance is scaled by the reduced chi-square.
/// Throws FitError if the visibilities never decrease.
CoherenceResult fit_coherence_time(std::span<const double> delays, std::span<const double> visibilities,
                                   std::span<const double> errors);

struct CoherenceScan {
  Sequence sequence = Sequence::ramsey;
  std::vector<double> delays;  // s
  int phase_points = 8;        // evenly spaced over one period
  FringeOptions fringe;
};

/// Fringe per delay, visibility per fringe, Gaussian fit.
CoherenceResult run_coherence_scan(const CoherenceScan& scan, const DephasingModel& model, std::uint64_t seed);

std::vector<double> evenly_spaced_phases(int n);

/// Resonant Rabi drive of duration t with the model's detuning noise.
/// shots = 0 returns the noiseless curve sin^2(omega0 t / 2).
std::vector<double> rabi_drive(std::span<const double> durations, double omega0, int shots,
                               const DephasingModel& model, std::uint64_t seed);

/// Gaussian T2 fitted to the model's noiseless visibilities on a delay grid.
double model_t2(Sequence seq, const DephasingModel& model, std::span<const double> delays);

/// sigma_dynamic then sigma_static (at fixed tau_c) so the noiseless Gaussian
/// fits on the two grids give the requested T2 values.
DephasingModel calibrate_dephasing(double ramsey_t2, double echo_t2, double tau_c,
                                   std::span<const double> ramsey_delays, std::span<const double> echo_delays);

/// Adjusts only sigma_dynamic to reach the echo T2.
DephasingModel calibrate_echo(DephasingModel model, double echo_t2, std::span<const double> echo_delays);

std::vector<double> default_ramsey_delays();  // 12 points, 0.05 .. 1.6 s
std::vector<double> default_echo_delays();    // 12 points, 0.1 .. 3.6 s

}  // namespace iontrap

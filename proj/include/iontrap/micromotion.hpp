#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace iontrap {

/// Local model of the radial plane (x along the surface, z normal to it).
///
/// Each axis obeys the damped Mathieu equation
///   x'' = -(Omega^2/4) (a - 2 q cos(Omega t) - 2 q eps cos(w_e t)) x - gamma x' + e E / m,
/// where the eps term is the excitation tone added on the RF voltage (as a
/// fractional modulation depth). q_x = -q_z follows from the pure RF
/// quadrupole; a_x, a_z are solved so the exact Floquet frequency equals the
/// requested secular frequency.
struct RfTrapDynamics {
  double omega_rf = 0.0;                  // rad/s
  std::array<double, 2> secular{};        // rad/s (x, z)
  std::array<double, 2> stray_field{};    // V/m (x, z)
  double excitation_depth = 0.0;          // fractional RF modulation
  double excitation_frequency = 0.0;      // rad/s
  double damping = 0.0;                   // 1/s
  double mass = 0.0;                      // kg
  double charge = 0.0;                    // C

  /// 27.8 MHz drive, 1.48 / 2.10 MHz radial pair, 171Yb+, 10 kHz damping.
  static RfTrapDynamics reference();
  /// Throws InvalidArgument unless omega_rf > 2 max(secular) and the rest is positive.
  void validate() const;
};

/// Mathieu parameters of one axis.
struct AxisParameters {
  double a = 0.0;
  double q = 0.0;
};

/// Characteristic exponent beta in (0, 1) of x'' + (Omega^2/4)(a - 2q cos Omega t) x = 0,
/// from the trace of the one-period monodromy (RK4, `steps` per period).
/// Throws InstabilityError outside the first stability region.
double mathieu_beta(double a, double q, int steps = 4000);

/// (a, q) per axis for the dynamics.
std::array<AxisParameters, 2> axis_parameters(const RfTrapDynamics& dyn);

/// Monodromy of one undamped, unforced RF period of the kick-drift-kick map.
Eigen::Matrix2d integrator_monodromy(const AxisParameters& p, double omega_rf, int steps_per_cycle);

struct PhaseState {
  std::array<double, 2> x{};  // m
  std::array<double, 2> v{};  // m/s
};

struct Trajectory {
  std::vector<double> t;
  std::vector<PhaseState> states;
};

struct TrajectoryOptions {
  PhaseState initial;
  /// Start on the periodic orbit of the unexcited, damped motion (ignores `initial`).
  bool start_on_periodic_orbit = false;
  int sample_every = 1;
};

/// Kick-drift-kick integration with half-step exponential damping. dt is
/// reduced so that an RF period holds an integer number of steps.
/// Throws InvalidArgument if dt > 2 pi / (50 Omega), InstabilityError on divergence.
Trajectory integrate_trajectory(const RfTrapDynamics& dyn, double duration, double dt,
                                const TrajectoryOptions& options = {});

/// Scattering rate (Gamma/2) s / (1 + s + 4 (delta - k v)^2 / Gamma^2).
double scatter_rate(double velocity, double detuning, double linewidth, double saturation,
                    double wavenumber);

/// Cooling / probe beam in the x-z plane.
struct ProbeBeam {
  double angle = 0.7853981633974483;  // rad from +x toward +z
  double detuning = 0.0;              // rad/s
  double linewidth = 0.0;             // rad/s
  double saturation = 0.5;
  double wavenumber = 0.0;            // rad/m

  /// 369.5 nm, 19.6 MHz linewidth, at 45 degrees, given detuning.
  static ProbeBeam ytterbium(double detuning);
};

struct SteadyStateOptions {
  int steps_per_cycle = 64;
  double settle_time = 0.0;   // s; 0 = 8 / damping
  double average_time = 0.0;  // s; 0 = 4 / damping
};

/// Time-averaged scatter rate once transients have decayed, normalized to the
/// beam's peak rate (Gamma/2) s / (1 + s).
double steady_state_brightness(const RfTrapDynamics& dyn, const ProbeBeam& beam,
                               const SteadyStateOptions& options = {});

struct SpectrumPoint {
  double excitation_offset = 0.0;  // rad/s, w_e - Omega
  double brightness = 0.0;         // normalized
};

struct ExcitationSpectrum {
  std::vector<SpectrumPoint> points;
  double baseline = 0.0;  // normalized brightness with the excitation off
  double peak_height = 0.0;  // max(brightness) - baseline
};

/// Brightness vs excitation frequency Omega + offset. Grid points run in
/// parallel; each is a deterministic trajectory. Requires a red-detuned beam.
ExcitationSpectrum excitation_spectrum(const RfTrapDynamics& dyn, std::span<const double> offsets,
                                       const ProbeBeam& beam, const SteadyStateOptions& options = {},
                                       unsigned workers = 0);

/// Excess brightness summed over the two resonances Omega + w_x and Omega + w_z.
double excitation_peak_metric(const RfTrapDynamics& dyn, const ProbeBeam& beam,
                              const SteadyStateOptions& options = {});

/// Contrast (max - min)/(max + min) of the scatter rate binned by RF phase
/// on the steady-state periodic orbit (excitation off).
double rf_correlation_contrast(const RfTrapDynamics& dyn, const ProbeBeam& beam, int bins = 32,
                               int steps_per_cycle = 256);

struct Lineshape {
  std::vector<double> detunings;      // rad/s
  std::vector<double> scatter_rates;  // photons/s
};

/// Scatter rate averaged over one RF period of the periodic orbit, per detuning.
Lineshape broadened_lineshape(const RfTrapDynamics& dyn, std::span<const double> detunings,
                              const ProbeBeam& beam, int steps_per_cycle = 256);

/// Velocity samples along the beam over one RF period of the periodic orbit.
std::vector<double> beam_velocity_samples(const RfTrapDynamics& dyn, const ProbeBeam& beam,
                                          int steps_per_cycle = 256);

/// Lineshape of a probe averaged over the given velocity samples.
double averaged_rate(std::span<const double> velocities, double detuning, const ProbeBeam& beam);

/// Full width at half maximum of a lineshape function (outermost half-max
/// crossings), searched within [-span, span].
double lineshape_fwhm(const std::function<double(double)>& rate, double span);

enum class CompensationObjective { excitation_peak, rf_phase_contrast };

struct CompensationSearch {
  CompensationObjective objective = CompensationObjective::excitation_peak;
  ProbeBeam beam;
  double range = 0.0;  // V/m; the search stays within +-range on each axis
  int max_rounds = 20;
  double tolerance = 1e-4;  // relative to range
  SteadyStateOptions steady;
};

struct CompensationResult {
  std::array<double, 2> compensation{};    // applied field, V/m
  std::array<double, 2> estimated_stray{};  // -compensation
  std::array<bool, 2> observable{true, true};
  int evaluations = 0;
  double objective = 0.0;
};

/// Minimizes the chosen micromotion signal over the compensation field by
/// downhill line searches per axis, starting from zero compensation. The
/// search is local: the excitation peak turns over (and becomes a dip) once
/// the residual field is large, so the starting residual must sit on the
/// rising side. An axis along which the objective does not change is
/// reported unobservable and left at zero. Throws ConvergenceError if the
/// search has not settled after max_rounds.
CompensationResult compensate(const RfTrapDynamics& dyn, const CompensationSearch& search);

}  // namespace iontrap

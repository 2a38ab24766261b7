#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iontrap/cooling.hpp"
#include "iontrap/fitting.hpp"
#include "iontrap/spin_motion.hpp"

namespace iontrap {

/// Peak bright probability of the first Rabi cycle on each sideband.
struct SidebandAmplitudes {
  Estimate red;
  Estimate blue;
};

/// Height of the first local maximum of a sampled flop curve.
///
/// The curve is smoothed with a centred moving average of `window` samples to
/// locate the first sample that dominates its +-window neighbourhood; a
/// weighted quadratic through the `window` raw samples around it gives the
/// peak. An empty `shot_noise` means noiseless data (zero uncertainty).
/// Throws NoMaximumError when the maximum sits on either end of the record.
Estimate extract_first_maximum(std::span<const double> times, std::span<const double> values,
                               std::span<const double> shot_noise, int window = 5);

/// Mean occupation a_r / (a_b - a_r) with linear error propagation.
/// Throws DegenerateEstimateError unless a_blue > a_red.
Estimate nbar_from_sidebands(const SidebandAmplitudes& amps);

struct HeatingPoint {
  double delay = 0.0;  // s
  double nbar = 0.0;
  double sigma = 0.0;
};

struct HeatingFit {
  double rate = 0.0;  // quanta/s
  double rate_uncertainty = 0.0;
  double intercept = 0.0;
  double intercept_uncertainty = 0.0;
  std::vector<HeatingPoint> points;
};

/// Weighted straight line through (delay, nbar). Points with sigma <= 0 are
/// fitted unweighted. Covariances follow `scaling`; the default rescales by
/// the reduced chi-square so exact data reports zero uncertainty.
HeatingFit fit_heating_rate(std::vector<HeatingPoint> points,
                            CovarianceScaling scaling = CovarianceScaling::reduced_chi2);

struct IonConstants {
  double mass = 0.0;            // kg
  double charge = 0.0;          // C
  double mode_frequency = 0.0;  // rad/s

  /// Singly charged 171Yb+ at the given mode frequency.
  static IonConstants yb171(double mode_frequency);
};

struct FieldNoise {
  double s_e = 0.0;        // V^2 m^-2 Hz^-1
  double omega_s_e = 0.0;  // V^2 m^-2
};

/// S_E = 4 m hbar omega ndot / q^2.
FieldNoise electric_field_psd(double rate, const IonConstants& ion);

enum class NbarUncertainty { linear, bootstrap };

/// Simulated red/blue sideband flop measurement.
struct SidebandScan {
  double omega0 = 0.0;  // carrier Rabi frequency, rad/s
  double eta = 0.1;
  bool full_lamb_dicke = false;
  std::vector<double> times;  // s, shared by both sidebands
  int shots = 500;            // per point; 0 = noiseless
  double contrast = 1.0;      // scale applied to the ideal bright probability
  NbarUncertainty uncertainty = NbarUncertainty::linear;
  int bootstrap_samples = 200;

  void validate() const;
};

struct SidebandMeasurement {
  std::vector<double> red;  // measured bright fraction per time
  std::vector<double> blue;
  std::vector<double> red_se;
  std::vector<double> blue_se;
  SidebandAmplitudes amplitudes;
  Estimate nbar;
};

/// Default time grid: `points` samples over [0, span * pi / (eta omega0)].
std::vector<double> sideband_time_grid(double omega0, double eta, int points = 100, double span = 2.0);

/// Samples binomial shot noise on both sideband curves and runs the
/// sideband-ratio estimator. Draws are keyed by (seed, stream, point).
/// The peak window is about 15% of the grid (odd, at least 5): a few
/// samples do not pin the curvature, and picking the noisiest top biases
/// the amplitude upward.
SidebandMeasurement measure_sidebands(const MotionalDistribution& dist, const SidebandScan& scan,
                                      std::uint64_t seed, std::uint64_t stream);

struct HeatingExperiment {
  MotionalDistribution initial = MotionalDistribution::ground(256);
  HeatingProcess heating{800.0, HeatingModel::birth_death};
  std::vector<double> delays{0.0, 0.25e-3, 0.5e-3, 1.0e-3};  // s
  SidebandScan scan;
};

struct HeatingExperimentResult {
  std::vector<SidebandMeasurement> measurements;  // one per delay
  std::vector<double> true_nbar;
  HeatingFit fit;
};

HeatingExperimentResult simulate_heating_experiment(const HeatingExperiment& exp, std::uint64_t seed);

}  // namespace iontrap

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iontrap/rng.hpp"

namespace iontrap {

/// |0> scatters no light (dark), |1> fluoresces (bright).
enum class QubitState { dark, bright };

/// Photon statistics of state-dependent fluorescence.
///
/// A prepared |1> leaks to |0> after an exponential time with mean depump_tau
/// and stops fluorescing; a prepared |0> leaks to |1> with mean repump_tau and
/// starts. Infinite taus disable the leaks.
struct DetectionModel {
  double bright_rate = 0.0;      // detected photons/s from |1>
  double background_rate = 0.0;  // photons/s regardless of state
  double depump_tau = 0.0;       // s
  double repump_tau = 0.0;       // s
  double threshold = 1.5;        // photons

  /// Rates and leak times calibrated so a 1 ms window reaches 98.8 % average
  /// fidelity at threshold 1.5 with the bright-state leak dominating.
  static DetectionModel calibrated();
  /// No background and no leaks.
  static DetectionModel ideal(double bright_rate);

  void validate() const;
};

/// One photon count. Deterministic given the generator state.
int sample_photon_count(QubitState prepared, const DetectionModel& model, double window, CounterRng& rng);

/// Same, with the generator keyed by (seed, stream, shot).
int sample_photon_count(QubitState prepared, const DetectionModel& model, double window,
                        std::uint64_t seed, std::uint64_t stream, std::uint64_t shot);

/// count < threshold -> dark, count > threshold -> bright. Throws TieError when
/// the count equals an integer threshold.
QubitState classify(int count, double threshold);

struct FidelityPoint {
  double window = 0.0;  // s
  double err_bright = 0.0;  // P(dark | prepared |1>)
  double err_bright_se = 0.0;
  double err_dark = 0.0;  // P(bright | prepared |0>)
  double err_dark_se = 0.0;
  double avg_fidelity = 0.0;
};

struct FidelityCurve {
  std::vector<FidelityPoint> points;
};

/// Monte-Carlo error rates per window. Shot i of window j uses its own counter
/// generator, so the result does not depend on `workers`.
FidelityCurve fidelity_curve(const DetectionModel& model, std::span<const double> windows, int shots,
                             std::uint64_t seed, unsigned workers = 0);

struct DetectionErrors {
  double err_bright = 0.0;
  double err_dark = 0.0;
  [[nodiscard]] double average_fidelity() const { return 1.0 - 0.5 * (err_bright + err_dark); }
};

/// Error probabilities with the Poisson counting statistics evaluated in
/// closed form and the leak time integrated by Gauss-Kronrod quadrature.
DetectionErrors analytic_error_model(const DetectionModel& model, double window);

/// P(N <= k) for N ~ Poisson(mean).
double poisson_cdf(int k, double mean);

/// depump_tau that makes the analytic average fidelity at `window` equal
/// `target`, other parameters fixed. Throws ConvergenceError if unreachable.
double calibrate_depump_tau(DetectionModel model, double window, double target);

/// Window in [lo, hi] minimizing the analytic average error.
double optimal_window(const DetectionModel& model, double lo, double hi);

struct ThresholdScore {
  double threshold = 0.0;
  double average_error = 0.0;
};

/// Analytic average error at each threshold, same order as given.
std::vector<ThresholdScore> threshold_scan(const DetectionModel& model, double window,
                                           std::span<const double> thresholds);

}  // namespace iontrap

#include "iontrap/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "iontrap/errors.hpp"
#include "iontrap/parallel.hpp"

namespace iontrap {

DetectionModel DetectionModel::calibrated() {
  DetectionModel m;
  m.bright_rate = 10.0e3;
  m.background_rate = 50.0;
  m.depump_tau = 9.24355e-3;  // output of calibrate_depump_tau at 1 ms, 98.8 %
  m.repump_tau = 0.5;
  m.threshold = 1.5;
  return m;
}

DetectionModel DetectionModel::ideal(double bright_rate) {
  DetectionModel m;
  m.bright_rate = bright_rate;
  m.background_rate = 0.0;
  m.depump_tau = std::numeric_limits<double>::infinity();
  m.repump_tau = std::numeric_limits<double>::infinity();
  m.threshold = 1.5;
  return m;
}

void DetectionModel::validate() const {
  if (!(bright_rate >= 0.0) || !(background_rate >= 0.0)) {
    throw InvalidArgument("detection model: rates must be >= 0");
  }
  if (!(depump_tau > 0.0) || !(repump_tau > 0.0)) throw InvalidArgument("detection model: taus must be > 0");
  if (!(threshold > 0.0)) throw InvalidArgument("detection model: threshold must be > 0");
}

namespace {

double leak_time(double tau, CounterRng& rng) {
  if (std::isinf(tau)) return std::numeric_limits<double>::infinity();
  std::exponential_distribution<double> d(1.0 / tau);
  return d(rng);
}

int poisson_draw(double mean, CounterRng& rng) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> d(mean);
  return d(rng);
}

bool is_integer(double x) { return std::floor(x) == x; }

}  // namespace

int sample_photon_count(QubitState prepared, const DetectionModel& model, double window, CounterRng& rng) {
  if (!(window > 0.0)) throw InvalidArgument("sample_photon_count: window must be > 0");
  double mean = model.background_rate * window;
  if (prepared == QubitState::bright) {
    const double t = leak_time(model.depump_tau, rng);
    mean += model.bright_rate * std::min(t, window);
  } else {
    const double t = leak_time(model.repump_tau, rng);
    mean += model.bright_rate * std::max(0.0, window - t);
  }
  return poisson_draw(mean, rng);
}

int sample_photon_count(QubitState prepared, const DetectionModel& model, double window,
                        std::uint64_t seed, std::uint64_t stream, std::uint64_t shot) {
  CounterRng rng(seed, stream, shot);
  return sample_photon_count(prepared, model, window, rng);
}

QubitState classify(int count, double threshold) {
  if (count < 0) throw InvalidArgument("classify: count must be >= 0");
  const double c = static_cast<double>(count);
  if (c == threshold) throw TieError("classify: count equals the integer threshold");
  return c < threshold ? QubitState::dark : QubitState::bright;
}

FidelityCurve fidelity_curve(const DetectionModel& model, std::span<const double> windows, int shots,
                             std::uint64_t seed, unsigned workers) {
  model.validate();
  if (shots < 1) throw InvalidArgument("fidelity_curve: shots must be >= 1");
  if (is_integer(model.threshold)) {
    throw InvalidArgument("fidelity_curve: threshold must not be an integer (ties are undefined)");
  }
  const auto n_shots = static_cast<std::size_t>(shots);
  FidelityCurve out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const double window = windows[w];
    if (!(window > 0.0)) throw InvalidArgument("fidelity_curve: windows must be > 0");
    const std::uint64_t bright_stream = mix64(stream_id("detection.bright") + w);
    const std::uint64_t dark_stream = mix64(stream_id("detection.dark") + w);

    // One flag per shot keeps the reduction independent of the worker split.
    std::vector<unsigned char> bright_err(n_shots), dark_err(n_shots);
    parallel_for(n_shots, workers, [&](std::size_t i) {
      const int cb = sample_photon_count(QubitState::bright, model, window, seed, bright_stream, i);
      const int cd = sample_photon_count(QubitState::dark, model, window, seed, dark_stream, i);
      bright_err[i] = classify(cb, model.threshold) == QubitState::dark;
      dark_err[i] = classify(cd, model.threshold) == QubitState::bright;
    });
    const auto nb = std::count(bright_err.begin(), bright_err.end(), 1);
    const auto nd = std::count(dark_err.begin(), dark_err.end(), 1);

    FidelityPoint p;
    p.window = window;
    p.err_bright = static_cast<double>(nb) / shots;
    p.err_dark = static_cast<double>(nd) / shots;
    p.err_bright_se = std::sqrt(p.err_bright * (1.0 - p.err_bright) / shots);
    p.err_dark_se = std::sqrt(p.err_dark * (1.0 - p.err_dark) / shots);
    p.avg_fidelity = 1.0 - 0.5 * (p.err_bright + p.err_dark);
    out.points.push_back(p);
  }
  return out;
}

double poisson_cdf(int k, double mean) {
  if (k < 0) return 0.0;
  if (mean <= 0.0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(k) + 1.0, mean);
}

DetectionErrors analytic_error_model(const DetectionModel& model, double window) {
  model.validate();
  if (!(window > 0.0)) throw InvalidArgument("analytic_error_model: window must be > 0");
  using boost::math::quadrature::gauss_kronrod;

  // Largest count classified dark, and largest count not classified bright.
  const int k_dark = static_cast<int>(std::ceil(model.threshold)) - 1;
  const int k_not_bright = static_cast<int>(std::floor(model.threshold));
  const double r = model.bright_rate;
  const double bg = model.background_rate * window;

  DetectionErrors e;
  {
    const double tau = model.depump_tau;
    const double survive = std::isinf(tau) ? 1.0 : std::exp(-window / tau);
    double err = survive * poisson_cdf(k_dark, r * window + bg);
    if (!std::isinf(tau)) {
      auto f = [&](double t) { return std::exp(-t / tau) / tau * poisson_cdf(k_dark, r * t + bg); };
      err += gauss_kronrod<double, 61>::integrate(f, 0.0, window, 8, 1e-11);
    }
    e.err_bright = std::clamp(err, 0.0, 1.0);
  }
  {
    const double tau = model.repump_tau;
    const double survive = std::isinf(tau) ? 1.0 : std::exp(-window / tau);
    double ok = survive * poisson_cdf(k_not_bright, bg);
    if (!std::isinf(tau)) {
      auto f = [&](double t) {
        return std::exp(-t / tau) / tau * poisson_cdf(k_not_bright, r * (window - t) + bg);
      };
      ok += gauss_kronrod<double, 61>::integrate(f, 0.0, window, 8, 1e-11);
    }
    e.err_dark = std::clamp(1.0 - ok, 0.0, 1.0);
  }
  return e;
}

double calibrate_depump_tau(DetectionModel model, double window, double target) {
  if (!(target > 0.0 && target < 1.0)) throw InvalidArgument("calibrate_depump_tau: target must lie in (0, 1)");
  // Work in log(tau); fidelity grows monotonically with tau.
  auto g = [&](double log_tau) {
    model.depump_tau = std::exp(log_tau);
    return analytic_error_model(model, window).average_fidelity() - target;
  };
  double lo = std::log(1e-7);
  double hi = std::log(1e4);
  if (g(lo) > 0.0 || g(hi) < 0.0) throw ConvergenceError("calibrate_depump_tau: target fidelity is out of reach");
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      g, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return std::exp(0.5 * (a + b));
}

double optimal_window(const DetectionModel& model, double lo, double hi) {
  if (!(lo > 0.0 && hi > lo)) throw InvalidArgument("optimal_window: need 0 < lo < hi");
  auto f = [&](double log_w) {
    const auto e = analytic_error_model(model, std::exp(log_w));
    return 0.5 * (e.err_bright + e.err_dark);
  };
  // Coarse scan picks the basin, Brent refines it.
  constexpr int grid = 200;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double x = std::log(lo) + (std::log(hi) - std::log(lo)) * i / grid;
    const double v = f(x);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double step = (std::log(hi) - std::log(lo)) / grid;
  const double a = std::log(lo) + std::max(0, best - 1) * step;
  const double b = std::log(lo) + std::min(grid, best + 1) * step;
  const auto r = boost::math::tools::brent_find_minima(f, a, b, 40);
  return std::exp(r.first);
}

std::vector<ThresholdScore> threshold_scan(const DetectionModel& model, double window,
                                           std::span<const double> thresholds) {
  std::vector<ThresholdScore> out;
  for (double th : thresholds) {
    DetectionModel m = model;
    m.threshold = th;
    const auto e = analytic_error_model(m, window);
    out.push_back({th, 0.5 * (e.err_bright + e.err_dark)});
  }
  return out;
}

}  // namespace iontrap

#include "iontrap/heating_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/rng.hpp"

namespace iontrap {

Estimate extract_first_maximum(std::span<const double> times, std::span<const double> values,
                               std::span<const double> shot_noise, int window) {
  const auto n = static_cast<int>(values.size());
  if (times.size() != values.size()) throw InvalidArgument("extract_first_maximum: size mismatch");
  if (!shot_noise.empty() && shot_noise.size() != values.size()) {
    throw InvalidArgument("extract_first_maximum: shot_noise size mismatch");
  }
  if (window < 3) throw InvalidArgument("extract_first_maximum: window must be >= 3");
  if (n < window + 2) throw NoMaximumError("extract_first_maximum: too few samples");

  const int half = window / 2;
  std::vector<double> smooth(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) s += values[static_cast<std::size_t>(j)];
    smooth[static_cast<std::size_t>(i)] = s / (hi - lo + 1);
  }

  // Points that have not risen above the start are not maxima; a run of
  // zero counts at short times would otherwise tie with its neighbours.
  int peak = -1;
  for (int i = 1; i < n; ++i) {
    if (smooth[static_cast<std::size_t>(i)] <= smooth[0]) continue;
    const int lo = std::max(0, i - window);
    const int hi = std::min(n - 1, i + window);
    bool dominates = true;
    for (int j = lo; j <= hi && dominates; ++j) {
      dominates = smooth[static_cast<std::size_t>(i)] >= smooth[static_cast<std::size_t>(j)];
    }
    if (dominates) {
      peak = i;
      break;
    }
  }
  if (peak <= 0 || peak >= n - 1) {
    throw NoMaximumError("extract_first_maximum: curve is monotone over the sampled window");
  }

  const int start = std::clamp(peak - half, 0, n - window);
  const auto ts = times.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(window));
  const auto ys = values.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(window));
  std::vector<double> sig;
  if (!shot_noise.empty()) {
    sig.assign(shot_noise.begin() + start, shot_noise.begin() + start + window);
    // A zero standard error (p-hat of exactly 0 or 1) would dominate the fit.
    const double floor = *std::max_element(sig.begin(), sig.end()) * 1e-3 + 1e-12;
    for (auto& s : sig) s = std::max(s, floor);
  }

  const double t0 = times[static_cast<std::size_t>(peak)];
  const auto fit = fit_polynomial(ts, ys, sig, 2, t0, CovarianceScaling::absolute);
  const double c1 = fit.params(1);
  const double c2 = fit.params(2);
  const double lo = ts.front() - t0;
  const double hi = ts.back() - t0;
  double x = 0.0;
  if (c2 < 0.0) {
    x = std::clamp(-c1 / (2.0 * c2), lo, hi);
  } else {
    // Not concave here: take the best of the fitted samples.
    double best = -std::numeric_limits<double>::infinity();
    for (double t : ts) {
      const double u = t - t0;
      const double v = fit.params(0) + c1 * u + c2 * u * u;
      if (v > best) {
        best = v;
        x = u;
      }
    }
  }
  const Eigen::Vector3d g(1.0, x, x * x);
  Estimate out;
  out.value = g.dot(fit.params);
  out.uncertainty = shot_noise.empty() ? 0.0 : std::sqrt(std::max(0.0, g.dot(fit.covariance * g)));
  return out;
}

Estimate nbar_from_sidebands(const SidebandAmplitudes& amps) {
  const double r = amps.red.value;
  const double b = amps.blue.value;
  if (!(b > r)) throw DegenerateEstimateError("nbar_from_sidebands: a_blue must exceed a_red");
  const double d = b - r;
  const double dr = b / (d * d);
  const double db = -r / (d * d);
  Estimate out;
  out.value = r / d;
  out.uncertainty = std::hypot(dr * amps.red.uncertainty, db * amps.blue.uncertainty);
  return out;
}

HeatingFit fit_heating_rate(std::vector<HeatingPoint> points, CovarianceScaling scaling) {
  if (points.size() < 2) throw FitError("fit_heating_rate: need at least two points");
  std::vector<double> xs, ys, sig;
  bool weighted = true;
  for (const auto& p : points) {
    xs.push_back(p.delay);
    ys.push_back(p.nbar);
    sig.push_back(p.sigma);
    if (!(p.sigma > 0.0)) weighted = false;
  }
  if (!weighted) sig.clear();
  const auto line = fit_line(xs, ys, sig, scaling);
  HeatingFit out;
  out.rate = line.slope;
  out.rate_uncertainty = line.slope_uncertainty;
  out.intercept = line.intercept;
  out.intercept_uncertainty = line.intercept_uncertainty;
  out.points = std::move(points);
  return out;
}

IonConstants IonConstants::yb171(double mode_frequency) {
  return {constants::yb171_ion_mass, constants::elementary_charge, mode_frequency};
}

FieldNoise electric_field_psd(double rate, const IonConstants& ion) {
  if (!(ion.mass > 0.0 && ion.charge > 0.0 && ion.mode_frequency > 0.0)) {
    throw InvalidArgument("electric_field_psd: ion constants must be positive");
  }
  if (!(rate >= 0.0)) throw InvalidArgument("electric_field_psd: rate must be >= 0");
  FieldNoise out;
  out.s_e = 4.0 * ion.mass * constants::hbar * ion.mode_frequency * rate / (ion.charge * ion.charge);
  out.omega_s_e = ion.mode_frequency * out.s_e;
  return out;
}

void SidebandScan::validate() const {
  if (!(omega0 > 0.0)) throw InvalidArgument("sideband scan: omega0 must be > 0");
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("sideband scan: eta must lie in (0, 1)");
  if (shots < 0) throw InvalidArgument("sideband scan: shots must be >= 0");
  if (!(contrast > 0.0 && contrast <= 1.0)) throw InvalidArgument("sideband scan: contrast must lie in (0, 1]");
  if (times.size() < 8) throw InvalidArgument("sideband scan: need at least 8 time points");
  if (uncertainty == NbarUncertainty::bootstrap && bootstrap_samples < 2) {
    throw InvalidArgument("sideband scan: bootstrap needs at least 2 samples");
  }
}

std::vector<double> sideband_time_grid(double omega0, double eta, int points, double span) {
  if (points < 2) throw InvalidArgument("sideband_time_grid: need at least 2 points");
  const double t_end = span * constants::pi / (eta * omega0);
  std::vector<double> t(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = t_end * i / (points - 1);
  return t;
}

namespace {

struct Sampled {
  std::vector<double> frac;
  std::vector<double> se;
};

Sampled sample_curve(std::span<const double> ideal, int shots, CounterRng::result_type seed,
                     std::uint64_t stream) {
  Sampled s;
  s.frac.resize(ideal.size());
  s.se.resize(ideal.size());
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    const double p = std::clamp(ideal[i], 0.0, 1.0);
    CounterRng rng(seed, stream, i);
    std::binomial_distribution<int> draw(shots, p);
    const int k = draw(rng);
    s.frac[i] = static_cast<double>(k) / shots;
    // Shrunk estimate keeps the standard error finite at k = 0 or k = shots.
    const double q = (k + 0.5) / (shots + 1.0);
    s.se[i] = std::sqrt(q * (1.0 - q) / shots);
  }
  return s;
}

int peak_window(std::size_t samples) {
  return std::max(5, static_cast<int>(samples * 3 / 20) | 1);
}

PulseSpec sideband_pulse(const SidebandScan& scan, Branch b) {
  PulseSpec p;
  p.branch = b;
  p.omega0 = scan.omega0;
  p.eta = scan.eta;
  p.full_lamb_dicke = scan.full_lamb_dicke;
  return p;
}

}  // namespace

SidebandMeasurement measure_sidebands(const MotionalDistribution& dist, const SidebandScan& scan,
                                      std::uint64_t seed, std::uint64_t stream) {
  scan.validate();
  auto red = flop_curve(dist, sideband_pulse(scan, Branch::red_sideband), scan.times);
  auto blue = flop_curve(dist, sideband_pulse(scan, Branch::blue_sideband), scan.times);
  for (auto& v : red) v *= scan.contrast;
  for (auto& v : blue) v *= scan.contrast;

  const int w = peak_window(scan.times.size());
  SidebandMeasurement m;
  if (scan.shots == 0) {
    m.red = red;
    m.blue = blue;
    m.red_se.assign(red.size(), 0.0);
    m.blue_se.assign(blue.size(), 0.0);
    m.amplitudes.red = extract_first_maximum(scan.times, m.red, {}, w);
    m.amplitudes.blue = extract_first_maximum(scan.times, m.blue, {}, w);
    m.nbar = nbar_from_sidebands(m.amplitudes);
    return m;
  }

  const std::uint64_t red_stream = mix64(stream ^ stream_id("sideband.red"));
  const std::uint64_t blue_stream = mix64(stream ^ stream_id("sideband.blue"));
  auto rs = sample_curve(red, scan.shots, seed, red_stream);
  auto bs = sample_curve(blue, scan.shots, seed, blue_stream);
  m.red = std::move(rs.frac);
  m.red_se = std::move(rs.se);
  m.blue = std::move(bs.frac);
  m.blue_se = std::move(bs.se);
  m.amplitudes.red = extract_first_maximum(scan.times, m.red, m.red_se, w);
  m.amplitudes.blue = extract_first_maximum(scan.times, m.blue, m.blue_se, w);
  m.nbar = nbar_from_sidebands(m.amplitudes);

  if (scan.uncertainty == NbarUncertainty::bootstrap) {
    // Parametric bootstrap: redraw both curves around the measured fractions.
    std::vector<double> estimates;
    for (int b = 0; b < scan.bootstrap_samples; ++b) {
      const auto key = static_cast<std::uint64_t>(b);
      auto r2 = sample_curve(m.red, scan.shots, seed, mix64(red_stream + key + 1));
      auto b2 = sample_curve(m.blue, scan.shots, seed, mix64(blue_stream + key + 1));
      try {
        SidebandAmplitudes a{extract_first_maximum(scan.times, r2.frac, r2.se, w),
                             extract_first_maximum(scan.times, b2.frac, b2.se, w)};
        estimates.push_back(nbar_from_sidebands(a).value);
      } catch (const Error&) {
        // Resamples without a usable maximum are dropped.
      }
    }
    if (estimates.size() < 2) throw FitError("bootstrap: too few usable resamples");
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    m.nbar.uncertainty = std::sqrt(var / static_cast<double>(estimates.size() - 1));
  }
  return m;
}

HeatingExperimentResult simulate_heating_experiment(const HeatingExperiment& exp, std::uint64_t seed) {
  if (exp.delays.size() < 2) throw InvalidArgument("heating experiment: need at least two delays");
  HeatingExperimentResult out;
  std::vector<HeatingPoint> points;
  for (std::size_t i = 0; i < exp.delays.size(); ++i) {
    const auto dist = heat(exp.initial, exp.delays[i], exp.heating);
    out.true_nbar.push_back(dist.mean());
    auto m = measure_sidebands(dist, exp.scan, seed, mix64(stream_id("heating.delay") + i));
    points.push_back({exp.delays[i], m.nbar.value, m.nbar.uncertainty});
    out.measurements.push_back(std::move(m));
  }
  out.fit = fit_heating_rate(std::move(points));
  return out;
}

}  // namespace iontrap

#include "iontrap/micromotion.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/parallel.hpp"

namespace iontrap {

RfTrapDynamics RfTrapDynamics::reference() {
  RfTrapDynamics d;
  d.omega_rf = constants::two_pi * 27.8e6;
  d.secular = {constants::two_pi * 1.48e6, constants::two_pi * 2.10e6};
  d.damping = constants::two_pi * 10e3;
  d.mass = constants::yb171_ion_mass;
  d.charge = constants::elementary_charge;
  return d;
}

void RfTrapDynamics::validate() const {
  if (!(omega_rf > 0.0)) throw InvalidArgument("rf dynamics: omega_rf must be > 0");
  for (double w : secular) {
    if (!(w > 0.0)) throw InvalidArgument("rf dynamics: secular frequencies must be > 0");
    if (!(omega_rf > 2.0 * w)) throw InvalidArgument("rf dynamics: need omega_rf > 2 max(secular)");
  }
  if (!(mass > 0.0 && charge > 0.0)) throw InvalidArgument("rf dynamics: mass and charge must be > 0");
  if (!(damping >= 0.0)) throw InvalidArgument("rf dynamics: damping must be >= 0");
  if (!(excitation_depth >= 0.0)) throw InvalidArgument("rf dynamics: excitation depth must be >= 0");
  if (excitation_depth > 0.0 && !(excitation_frequency > 0.0)) {
    throw InvalidArgument("rf dynamics: excitation frequency must be > 0");
  }
}

double mathieu_beta(double a, double q, int steps) {
  // Time in units of the RF phase tau = Omega t: x'' = -(1/4)(a - 2q cos tau) x.
  const double h = constants::two_pi / steps;
  auto accel = [&](double x, double tau) { return -0.25 * (a - 2.0 * q * std::cos(tau)) * x; };
  auto evolve = [&](double x, double v) {
    for (int k = 0; k < steps; ++k) {
      const double tau = k * h;
      const double k1x = v;
      const double k1v = accel(x, tau);
      const double k2x = v + 0.5 * h * k1v;
      const double k2v = accel(x + 0.5 * h * k1x, tau + 0.5 * h);
      const double k3x = v + 0.5 * h * k2v;
      const double k3v = accel(x + 0.5 * h * k2x, tau + 0.5 * h);
      const double k4x = v + h * k3v;
      const double k4v = accel(x + h * k3x, tau + h);
      x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    return std::pair{x, v};
  };
  const auto [x1, v1] = evolve(1.0, 0.0);
  const auto [x2, v2] = evolve(0.0, 1.0);
  (void)v1;
  (void)x2;
  const double half_trace = 0.5 * (x1 + v2);
  if (!(std::abs(half_trace) < 1.0)) throw InstabilityError("mathieu_beta: (a, q) outside the stable region");
  return std::acos(half_trace) / constants::pi;
}

std::array<AxisParameters, 2> axis_parameters(const RfTrapDynamics& dyn) {
  dyn.validate();
  const double w_rf_only = std::sqrt(0.5 * (dyn.secular[0] * dyn.secular[0] + dyn.secular[1] * dyn.secular[1]));
  const double q = 2.0 * std::sqrt(2.0) * w_rf_only / dyn.omega_rf;
  std::array<AxisParameters, 2> out;
  for (int i = 0; i < 2; ++i) {
    const double qi = i == 0 ? q : -q;
    const double beta = 2.0 * dyn.secular[static_cast<std::size_t>(i)] / dyn.omega_rf;
    const double a0 = beta * beta - 0.5 * q * q;
    auto f = [&](double a) { return mathieu_beta(a, qi) - beta; };
    double lo = a0 - 0.05;
    double hi = a0 + 0.05;
    // Keep the bracket inside the stable band.
    auto safe = [&](double a) {
      try {
        return f(a);
      } catch (const InstabilityError&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    };
    double flo = safe(lo);
    double fhi = safe(hi);
    for (int k = 0; k < 60 && !(std::isfinite(flo) && flo < 0.0); ++k) {
      lo = 0.5 * (lo + a0);
      flo = safe(lo);
    }
    for (int k = 0; k < 60 && !(std::isfinite(fhi) && fhi > 0.0); ++k) {
      hi = 0.5 * (hi + a0);
      fhi = safe(hi);
    }
    if (!(flo < 0.0 && fhi > 0.0)) throw InstabilityError("axis_parameters: cannot bracket the Mathieu a");
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(50), iters);
    out[static_cast<std::size_t>(i)] = {0.5 * (r.first + r.second), qi};
  }
  return out;
}

namespace {

// Shared stepping engine. Calls visit(step_index_after, state) after each step.
class Stepper {
 public:
  Stepper(const RfTrapDynamics& dyn, int steps_per_cycle, bool with_excitation)
      : steps_(steps_per_cycle), params_(axis_parameters(dyn)) {
    const double period = constants::two_pi / dyn.omega_rf;
    dt_ = period / steps_per_cycle;
    omega2_4_ = 0.25 * dyn.omega_rf * dyn.omega_rf;
    damp_half_ = std::exp(-0.5 * dyn.damping * dt_);
    for (int i = 0; i < 2; ++i) {
      force_[static_cast<std::size_t>(i)] = dyn.charge * dyn.stray_field[static_cast<std::size_t>(i)] / dyn.mass;
    }
    eps_ = with_excitation ? dyn.excitation_depth : 0.0;
    w_e_ = dyn.excitation_frequency;
    cos_rf_.resize(static_cast<std::size_t>(steps_));
    for (int k = 0; k < steps_; ++k) cos_rf_[static_cast<std::size_t>(k)] = std::cos(constants::two_pi * k / steps_);
  }

  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] int steps_per_cycle() const { return steps_; }
  [[nodiscard]] const std::array<AxisParameters, 2>& params() const { return params_; }

  template <class Visit>
  void run(PhaseState& s, long long first_step, long long n_steps, Visit&& visit) const {
    std::complex<double> phasor = std::polar(1.0, w_e_ * dt_ * static_cast<double>(first_step));
    const std::complex<double> rot = std::polar(1.0, w_e_ * dt_);
    double exc_now = phasor.real();
    for (long long n = 0; n < n_steps; ++n) {
      const long long k = first_step + n;
      const double c0 = cos_rf_[static_cast<std::size_t>(k % steps_)];
      const double c1 = cos_rf_[static_cast<std::size_t>((k + 1) % steps_)];
      if (((k + 1) % steps_) == 0) {
        // Re-anchor the excitation phasor once per RF period.
        phasor = std::polar(1.0, w_e_ * dt_ * static_cast<double>(k + 1));
      } else {
        phasor *= rot;
      }
      const double exc_next = phasor.real();
      for (std::size_t i = 0; i < 2; ++i) {
        const double a = params_[i].a;
        const double q = params_[i].q;
        double x = s.x[i];
        double v = s.v[i] * damp_half_;
        v += 0.5 * dt_ * (-omega2_4_ * (a - 2.0 * q * c0 - 2.0 * q * eps_ * exc_now) * x + force_[i]);
        x += dt_ * v;
        v += 0.5 * dt_ * (-omega2_4_ * (a - 2.0 * q * c1 - 2.0 * q * eps_ * exc_next) * x + force_[i]);
        v *= damp_half_;
        s.x[i] = x;
        s.v[i] = v;
      }
      exc_now = exc_next;
      if (!(std::abs(s.x[0]) < 1e-3 && std::abs(s.x[1]) < 1e-3)) {
        throw InstabilityError("integrate_trajectory: trajectory diverged");
      }
      visit(k + 1, s);
    }
  }

  // Fixed point of the unexcited one-period map (affine because of the stray force).
  [[nodiscard]] PhaseState periodic_orbit() const {
    Stepper base = *this;
    base.eps_ = 0.0;
    PhaseState p;
    base.run(p, 0, steps_, [](long long, const PhaseState&) {});
    PhaseState ex;
    ex.x = {1e-9, 1e-9};
    PhaseState ev;
    ev.v = {1e-3, 1e-3};
    // The map is linear in the state once the forced response p is removed.
    Stepper unforced = base;
    unforced.force_ = {0.0, 0.0};
    unforced.run(ex, 0, steps_, [](long long, const PhaseState&) {});
    unforced.run(ev, 0, steps_, [](long long, const PhaseState&) {});
    PhaseState out;
    for (std::size_t i = 0; i < 2; ++i) {
      Eigen::Matrix2d m;
      m << ex.x[i] / 1e-9, ev.x[i] / 1e-3, ex.v[i] / 1e-9, ev.v[i] / 1e-3;
      const Eigen::Vector2d b(p.x[i], p.v[i]);
      const Eigen::Vector2d s = (Eigen::Matrix2d::Identity() - m).fullPivLu().solve(b);
      out.x[i] = s(0);
      out.v[i] = s(1);
    }
    return out;
  }

 private:
  int steps_;
  std::array<AxisParameters, 2> params_;
  double dt_ = 0.0;
  double omega2_4_ = 0.0;
  double damp_half_ = 1.0;
  std::array<double, 2> force_{};
  double eps_ = 0.0;
  double w_e_ = 0.0;
  std::vector<double> cos_rf_;
};

double beam_velocity(const PhaseState& s, const ProbeBeam& beam) {
  return std::cos(beam.angle) * s.v[0] + std::sin(beam.angle) * s.v[1];
}

double peak_rate(const ProbeBeam& beam) {
  return 0.5 * beam.linewidth * beam.saturation / (1.0 + beam.saturation);
}

void check_beam(const ProbeBeam& beam) {
  if (!(beam.linewidth > 0.0)) throw InvalidArgument("probe beam: linewidth must be > 0");
  if (!(beam.saturation > 0.0)) throw InvalidArgument("probe beam: saturation must be > 0");
  if (!(beam.wavenumber > 0.0)) throw InvalidArgument("probe beam: wavenumber must be > 0");
}

}  // namespace

Eigen::Matrix2d integrator_monodromy(const AxisParameters& p, double omega_rf, int steps_per_cycle) {
  const double period = constants::two_pi / omega_rf;
  const double dt = period / steps_per_cycle;
  const double w2 = 0.25 * omega_rf * omega_rf;
  auto step_all = [&](double x, double v) {
    for (int k = 0; k < steps_per_cycle; ++k) {
      const double c0 = std::cos(constants::two_pi * k / steps_per_cycle);
      const double c1 = std::cos(constants::two_pi * (k + 1) / steps_per_cycle);
      v += 0.5 * dt * (-w2 * (p.a - 2.0 * p.q * c0) * x);
      x += dt * v;
      v += 0.5 * dt * (-w2 * (p.a - 2.0 * p.q * c1) * x);
    }
    return std::pair{x, v};
  };
  const auto [x1, v1] = step_all(1.0, 0.0);
  const auto [x2, v2] = step_all(0.0, 1.0);
  Eigen::Matrix2d m;
  m << x1, x2, v1, v2;
  return m;
}

Trajectory integrate_trajectory(const RfTrapDynamics& dyn, double duration, double dt,
                                const TrajectoryOptions& options) {
  dyn.validate();
  if (!(duration >= 0.0)) throw InvalidArgument("integrate_trajectory: duration must be >= 0");
  const double period = constants::two_pi / dyn.omega_rf;
  if (!(dt > 0.0) || dt > period / 50.0 * (1.0 + 1e-12)) {
    throw InvalidArgument("integrate_trajectory: dt must be in (0, 2 pi / (50 omega_rf)]");
  }
  if (options.sample_every < 1) throw InvalidArgument("integrate_trajectory: sample_every must be >= 1");
  const int steps_per_cycle = static_cast<int>(std::ceil(period / dt - 1e-9));
  const Stepper stepper(dyn, steps_per_cycle, true);
  PhaseState s = options.start_on_periodic_orbit ? stepper.periodic_orbit() : options.initial;
  const auto n_steps = static_cast<long long>(std::llround(duration / stepper.dt()));

  Trajectory tr;
  tr.t.push_back(0.0);
  tr.states.push_back(s);
  stepper.run(s, 0, n_steps, [&](long long k, const PhaseState& st) {
    if (k % options.sample_every == 0) {
      tr.t.push_back(static_cast<double>(k) * stepper.dt());
      tr.states.push_back(st);
    }
  });
  return tr;
}

double scatter_rate(double velocity, double detuning, double linewidth, double saturation, double wavenumber) {
  if (!(linewidth > 0.0)) throw InvalidArgument("scatter_rate: linewidth must be > 0");
  const double d = detuning - wavenumber * velocity;
  return 0.5 * linewidth * saturation / (1.0 + saturation + 4.0 * d * d / (linewidth * linewidth));
}

ProbeBeam ProbeBeam::ytterbium(double detuning) {
  ProbeBeam b;
  b.detuning = detuning;
  b.linewidth = constants::yb_cooling_linewidth;
  b.wavenumber = constants::yb_cooling_wavenumber;
  return b;
}

double steady_state_brightness(const RfTrapDynamics& dyn, const ProbeBeam& beam, const SteadyStateOptions& options) {
  dyn.validate();
  check_beam(beam);
  if (options.steps_per_cycle < 50) throw InvalidArgument("steady state: need >= 50 steps per RF cycle");
  const double settle = options.settle_time > 0.0 ? options.settle_time : 8.0 / dyn.damping;
  const double average = options.average_time > 0.0 ? options.average_time : 4.0 / dyn.damping;
  if (!std::isfinite(settle) || !std::isfinite(average)) {
    throw InvalidArgument("steady state: set explicit times when damping is zero");
  }
  const Stepper stepper(dyn, options.steps_per_cycle, true);
  PhaseState s = stepper.periodic_orbit();
  const double period = constants::two_pi / dyn.omega_rf;
  // Whole RF periods for both stages.
  const long long settle_steps = static_cast<long long>(std::ceil(settle / period)) * options.steps_per_cycle;
  const long long avg_steps = static_cast<long long>(std::ceil(average / period)) * options.steps_per_cycle;
  stepper.run(s, 0, settle_steps, [](long long, const PhaseState&) {});
  // Hann-weighted mean: a flat window leaves a partial cycle of the driven
  // motion, i.e. a mean velocity linear in the field.
  double sum = 0.0;
  double weights = 0.0;
  const double n_avg = static_cast<double>(avg_steps);
  stepper.run(s, settle_steps, avg_steps, [&](long long k, const PhaseState& st) {
    const double w = std::pow(std::sin(constants::pi * (static_cast<double>(k - settle_steps) - 0.5) / n_avg), 2);
    sum += w * scatter_rate(beam_velocity(st, beam), beam.detuning, beam.linewidth, beam.saturation, beam.wavenumber);
    weights += w;
  });
  return sum / weights / peak_rate(beam);
}

ExcitationSpectrum excitation_spectrum(const RfTrapDynamics& dyn, std::span<const double> offsets,
                                       const ProbeBeam& beam, const SteadyStateOptions& options, unsigned workers) {
  if (!(beam.detuning < 0.0)) throw InvalidArgument("excitation_spectrum: the probe must be red-detuned");
  ExcitationSpectrum out;
  RfTrapDynamics off = dyn;
  off.excitation_depth = 0.0;
  out.baseline = steady_state_brightness(off, beam, options);
  out.points.resize(offsets.size());
  parallel_for(offsets.size(), workers, [&](std::size_t i) {
    RfTrapDynamics d = dyn;
    d.excitation_frequency = dyn.omega_rf + offsets[i];
    out.points[i] = {offsets[i], steady_state_brightness(d, beam, options)};
  });
  double peak = out.baseline;
  for (const auto& p : out.points) peak = std::max(peak, p.brightness);
  out.peak_height = peak - out.baseline;
  return out;
}

double excitation_peak_metric(const RfTrapDynamics& dyn, const ProbeBeam& beam, const SteadyStateOptions& options) {
  if (!(dyn.excitation_depth > 0.0)) throw InvalidArgument("excitation_peak_metric: excitation depth must be > 0");
  RfTrapDynamics off = dyn;
  off.excitation_depth = 0.0;
  const double base = steady_state_brightness(off, beam, options);
  double total = 0.0;
  for (double w : dyn.secular) {
    RfTrapDynamics d = dyn;
    d.excitation_frequency = dyn.omega_rf + w;
    total += steady_state_brightness(d, beam, options) - base;
  }
  return total;
}

std::vector<double> beam_velocity_samples(const RfTrapDynamics& dyn, const ProbeBeam& beam, int steps_per_cycle) {
  RfTrapDynamics d = dyn;
  d.excitation_depth = 0.0;
  const Stepper stepper(d, steps_per_cycle, false);
  PhaseState s = stepper.periodic_orbit();
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(steps_per_cycle));
  stepper.run(s, 0, steps_per_cycle, [&](long long, const PhaseState& st) { v.push_back(beam_velocity(st, beam)); });
  return v;
}

double rf_correlation_contrast(const RfTrapDynamics& dyn, const ProbeBeam& beam, int bins, int steps_per_cycle) {
  check_beam(beam);
  if (bins < 2 || steps_per_cycle % bins != 0) {
    throw InvalidArgument("rf_correlation_contrast: steps_per_cycle must be a multiple of bins >= 2");
  }
  const auto v = beam_velocity_samples(dyn, beam, steps_per_cycle);
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  const int per_bin = steps_per_cycle / bins;
  for (int k = 0; k < steps_per_cycle; ++k) {
    hist[static_cast<std::size_t>(k / per_bin)] +=
        scatter_rate(v[static_cast<std::size_t>(k)], beam.detuning, beam.linewidth, beam.saturation, beam.wavenumber);
  }
  const auto [mn, mx] = std::minmax_element(hist.begin(), hist.end());
  if (*mx + *mn <= 0.0) return 0.0;
  return (*mx - *mn) / (*mx + *mn);
}

double averaged_rate(std::span<const double> velocities, double detuning, const ProbeBeam& beam) {
  double sum = 0.0;
  for (double v : velocities) sum += scatter_rate(v, detuning, beam.linewidth, beam.saturation, beam.wavenumber);
  return sum / static_cast<double>(velocities.size());
}

Lineshape broadened_lineshape(const RfTrapDynamics& dyn, std::span<const double> detunings, const ProbeBeam& beam,
                              int steps_per_cycle) {
  check_beam(beam);
  const auto v = beam_velocity_samples(dyn, beam, steps_per_cycle);
  Lineshape out;
  out.detunings.assign(detunings.begin(), detunings.end());
  for (double d : detunings) out.scatter_rates.push_back(averaged_rate(v, d, beam));
  return out;
}

double lineshape_fwhm(const std::function<double(double)>& rate, double span) {
  constexpr int n = 4000;
  std::vector<double> xs(n + 1), ys(n + 1);
  for (int i = 0; i <= n; ++i) {
    xs[static_cast<std::size_t>(i)] = -span + 2.0 * span * i / n;
    ys[static_cast<std::size_t>(i)] = rate(xs[static_cast<std::size_t>(i)]);
  }
  const double half = 0.5 * *std::max_element(ys.begin(), ys.end());
  int first = -1;
  int last = -1;
  for (int i = 0; i <= n; ++i) {
    if (ys[static_cast<std::size_t>(i)] >= half) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first <= 0 || last >= n) throw InvalidArgument("lineshape_fwhm: span does not contain the half maximum");
  auto g = [&](double x) { return rate(x) - half; };
  std::uintmax_t it1 = 200;
  std::uintmax_t it2 = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(50);
  const auto l = boost::math::tools::toms748_solve(g, xs[static_cast<std::size_t>(first - 1)],
                                                   xs[static_cast<std::size_t>(first)], tol, it1);
  const auto r = boost::math::tools::toms748_solve(g, xs[static_cast<std::size_t>(last)],
                                                   xs[static_cast<std::size_t>(last + 1)], tol, it2);
  return 0.5 * (r.first + r.second) - 0.5 * (l.first + l.second);
}

CompensationResult compensate(const RfTrapDynamics& dyn, const CompensationSearch& search) {
  if (!(search.range > 0.0)) throw InvalidArgument("compensate: range must be > 0");
  if (search.max_rounds < 1) throw InvalidArgument("compensate: need at least one round");
  check_beam(search.beam);

  CompensationResult res;
  std::array<double, 2> c{0.0, 0.0};
  auto objective = [&](double cx, double cz) {
    ++res.evaluations;
    RfTrapDynamics d = dyn;
    d.stray_field = {dyn.stray_field[0] + cx, dyn.stray_field[1] + cz};
    if (search.objective == CompensationObjective::excitation_peak) {
      return excitation_peak_metric(d, search.beam, search.steady);
    }
    return rf_correlation_contrast(d, search.beam);
  };
  auto along = [&](int axis, double u) { return axis == 0 ? objective(u, c[1]) : objective(c[0], u); };

  const double probe = 0.25 * search.range;
  const double f0 = objective(0.0, 0.0);
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = along(axis, -probe);
    const double hi = along(axis, probe);
    const double scale = std::max({std::abs(f0), std::abs(lo), std::abs(hi)});
    res.observable[static_cast<std::size_t>(axis)] =
        std::max({f0, lo, hi}) - std::min({f0, lo, hi}) > 1e-12 * scale;
  }

  // Downhill bracket from the current point, expanding by the golden ratio,
  // then Brent inside it.
  auto line_minimum = [&](int axis, double step) {
    const double x0 = c[static_cast<std::size_t>(axis)];
    const double fx0 = along(axis, x0);
    double dir = 1.0;
    double x1 = std::clamp(x0 + step, -search.range, search.range);
    double f1 = along(axis, x1);
    if (f1 > fx0) {
      dir = -1.0;
      x1 = std::clamp(x0 - step, -search.range, search.range);
      f1 = along(axis, x1);
      if (f1 > fx0) {
        // Minimum lies within one step of x0.
        return boost::math::tools::brent_find_minima([&](double u) { return along(axis, u); },
                                                     std::max(x0 - step, -search.range),
                                                     std::min(x0 + step, search.range), 40)
            .first;
      }
    }
    double prev = x0;
    double h = step;
    while (std::abs(x1) < search.range) {
      h *= 1.618033988749895;
      const double x2 = std::clamp(x1 + dir * h, -search.range, search.range);
      const double f2 = along(axis, x2);
      if (f2 > f1) {
        return boost::math::tools::brent_find_minima([&](double u) { return along(axis, u); }, std::min(prev, x2),
                                                     std::max(prev, x2), 40)
            .first;
      }
      prev = x1;
      x1 = x2;
      f1 = f2;
    }
    return x1;  // still descending at the edge of the range
  };

  // Small first steps so the line search cannot jump over the turnover.
  const double tol = search.tolerance * search.range;
  double step = 0.05 * search.range;
  bool settled = false;
  for (int round = 0; round < search.max_rounds && !settled; ++round) {
    settled = true;
    double largest = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      if (!res.observable[static_cast<std::size_t>(axis)]) continue;
      const double next = line_minimum(axis, step);
      const double move = std::abs(next - c[static_cast<std::size_t>(axis)]);
      largest = std::max(largest, move);
      if (move > tol) settled = false;
      c[static_cast<std::size_t>(axis)] = next;
    }
    step = std::max(2.0 * largest, 4.0 * tol);
  }
  if (!settled) throw ConvergenceError("compensate: search did not settle within max_rounds");
  if (std::abs(c[0]) >= search.range || std::abs(c[1]) >= search.range) {
    throw ConvergenceError("compensate: minimum not inside the search range");
  }
  res.compensation = c;
  res.estimated_stray = {-c[0], -c[1]};
  res.objective = objective(c[0], c[1]);
  return res;
}

}  // namespace iontrap

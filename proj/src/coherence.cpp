#include "iontrap/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/parallel.hpp"
#include "iontrap/rng.hpp"

namespace iontrap {

DephasingModel DephasingModel::microwave() {
  DephasingModel m;
  m.sigma_static = 1.2318;
  m.sigma_dynamic = 1.7330;
  m.tau_c = 0.5;
  return m;
}

DephasingModel DephasingModel::raman() {
  DephasingModel m = microwave();
  m.sigma_dynamic = 2.2790;
  return m;
}

void DephasingModel::validate() const {
  if (!(sigma_static >= 0.0) || !(sigma_dynamic >= 0.0)) {
    throw InvalidArgument("dephasing model: sigmas must be >= 0");
  }
  if (!(tau_c > 0.0)) throw InvalidArgument("dephasing model: tau_c must be > 0");
  if (!(pulse_infidelity >= 0.0 && pulse_infidelity <= 0.5)) {
    throw InvalidArgument("dephasing model: pulse_infidelity must lie in [0, 0.5]");
  }
}

namespace {

// Exact joint update of the OU value x and its integral over a step h.
class OuIntegrator {
 public:
  OuIntegrator(double sigma, double tau, double h) : tau_(tau) {
    const double u = h / tau;
    a_ = std::exp(-u);
    const double one_minus_a = -std::expm1(-u);
    const double s2 = sigma * sigma;
    const double var_x = s2 * one_minus_a * (1.0 + a_);
    const double var_i = s2 * tau * tau * (2.0 * u - 3.0 + 4.0 * a_ - a_ * a_);
    const double cov = s2 * tau * one_minus_a * one_minus_a;
    l11_ = std::sqrt(var_x);
    l21_ = l11_ > 0.0 ? cov / l11_ : 0.0;
    l22_ = std::sqrt(std::max(0.0, var_i - l21_ * l21_));
    drift_ = tau * one_minus_a;
  }

  // Advances x by one step and returns the integral of x over it.
  template <class Rng>
  double step(double& x, Rng& rng, std::normal_distribution<double>& normal) const {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double integral = drift_ * x + l21_ * z1 + l22_ * z2;
    x = a_ * x + l11_ * z1;
    return integral;
  }

 private:
  double tau_;
  double a_ = 0.0;
  double l11_ = 0.0;
  double l21_ = 0.0;
  double l22_ = 0.0;
  double drift_ = 0.0;
};

// Integral of the OU process over consecutive segments of equal length.
template <class Rng>
std::vector<double> ou_segment_integrals(const DephasingModel& model, double segment, int segments, Rng& rng,
                                         std::normal_distribution<double>& normal) {
  std::vector<double> out(static_cast<std::size_t>(segments), 0.0);
  if (model.sigma_dynamic == 0.0 || segment == 0.0) return out;
  const double max_step = model.tau_c / 50.0;
  const int steps = std::max(1, static_cast<int>(std::ceil(segment / max_step)));
  const OuIntegrator ou(model.sigma_dynamic, model.tau_c, segment / steps);
  double x = model.sigma_dynamic * normal(rng);
  for (int s = 0; s < segments; ++s) {
    double acc = 0.0;
    for (int k = 0; k < steps; ++k) acc += ou.step(x, rng, normal);
    out[static_cast<std::size_t>(s)] = acc;
  }
  return out;
}

template <class Rng>
double draw_phase(Sequence seq, double delay, const DephasingModel& model, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  if (seq == Sequence::ramsey) {
    const double static_detuning = model.sigma_static * normal(rng);
    const auto seg = ou_segment_integrals(model, delay, 1, rng, normal);
    return static_detuning * delay + seg[0];
  }
  // The static part cancels exactly between the two halves.
  const auto seg = ou_segment_integrals(model, 0.5 * delay, 2, rng, normal);
  return seg[1] - seg[0];
}

double contrast(Sequence seq, const DephasingModel& model) {
  const int pulses = seq == Sequence::ramsey ? 2 : 3;
  return std::pow(1.0 - 2.0 * model.pulse_infidelity, pulses);
}

double fringe_probability(Sequence seq, double c, double total_phase) {
  const double sign = seq == Sequence::ramsey ? 1.0 : -1.0;
  return 0.5 * (1.0 + sign * c * std::cos(total_phase));
}

std::uint64_t sequence_stream(Sequence seq) {
  return stream_id(seq == Sequence::ramsey ? "coherence.ramsey" : "coherence.echo");
}

// g(T) = Var of the OU integral over a window of length T.
double ou_integral_variance(const DephasingModel& m, double t) {
  const double tau = m.tau_c;
  const double u = t / tau;
  return 2.0 * m.sigma_dynamic * m.sigma_dynamic * tau * tau * (u + std::expm1(-u));
}

}  // namespace

double accumulated_phase(Sequence seq, double delay, const DephasingModel& model, std::uint64_t seed,
                         std::uint64_t stream, std::uint64_t shot) {
  CounterRng rng(seed, stream, shot);
  return draw_phase(seq, delay, model, rng);
}

Fringe run_fringe(Sequence seq, double delay, std::span<const double> phases, const DephasingModel& model,
                  const FringeOptions& options, std::uint64_t seed) {
  model.validate();
  if (!(delay >= 0.0)) throw InvalidArgument("fringe: delay must be >= 0");
  if (options.shots < 1) throw InvalidArgument("fringe: shots must be >= 1");
  const auto shots = static_cast<std::size_t>(options.shots);
  const std::uint64_t stream = sequence_stream(seq);
  const double c = contrast(seq, model);

  std::vector<double> values(phases.size() * shots);
  parallel_for(values.size(), options.workers, [&](std::size_t k) {
    const double theta = phases[k / shots];
    CounterRng rng(seed, stream, k);
    const double phi = draw_phase(seq, delay, model, rng);
    const double p = fringe_probability(seq, c, theta + phi);
    values[k] = options.projective ? (rng.uniform() < p ? 1.0 : 0.0) : p;
  });

  Fringe f;
  f.phases.assign(phases.begin(), phases.end());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::size_t j = 0; j < shots; ++j) {
      const double v = values[i * shots + j];
      sum += v;
      sum2 += v * v;
    }
    const double n = static_cast<double>(shots);
    const double mean = sum / n;
    double se = 0.0;
    if (options.projective) {
      se = std::sqrt(mean * (1.0 - mean) / n);
    } else if (shots > 1) {
      se = std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)) / n);
    }
    f.p1.push_back(mean);
    f.se.push_back(se);
  }
  return f;
}

Fringe ramsey_fringe(double delay, std::span<const double> phases, const DephasingModel& model,
                     const FringeOptions& options, std::uint64_t seed) {
  return run_fringe(Sequence::ramsey, delay, phases, model, options, seed);
}

Fringe spin_echo_fringe(double delay, std::span<const double> phases, const DephasingModel& model,
                        const FringeOptions& options, std::uint64_t seed) {
  return run_fringe(Sequence::spin_echo, delay, phases, model, options, seed);
}

Estimate fringe_visibility(const Fringe& fringe) {
  const auto n = static_cast<Eigen::Index>(fringe.phases.size());
  if (n < 3) throw FitError("fringe_visibility: need at least 3 phases");
  Eigen::MatrixXd a(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double th = fringe.phases[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(th);
    a(i, 2) = std::sin(th);
  }
  const auto ls = solve_weighted_least_squares(a, fringe.p1, {}, CovarianceScaling::reduced_chi2);
  const double c = ls.params(1);
  const double s = ls.params(2);
  const double r = std::hypot(c, s);
  Estimate out;
  out.value = 2.0 * r;
  if (r > 0.0) {
    const Eigen::Vector2d g(c / r, s / r);
    const Eigen::Matrix2d cov = ls.covariance.block<2, 2>(1, 1);
    out.uncertainty = 2.0 * std::sqrt(std::max(0.0, g.dot(cov * g)));
  } else {
    out.uncertainty = 2.0 * std::sqrt(std::max(0.0, 0.5 * (ls.covariance(1, 1) + ls.covariance(2, 2))));
  }
  return out;
}

double ramsey_visibility(const DephasingModel& model, double delay) {
  const double var = model.sigma_static * model.sigma_static * delay * delay + ou_integral_variance(model, delay);
  return contrast(Sequence::ramsey, model) * std::exp(-0.5 * var);
}

double echo_visibility(const DephasingModel& model, double delay) {
  const double var = 4.0 * ou_integral_variance(model, 0.5 * delay) - ou_integral_variance(model, delay);
  return contrast(Sequence::spin_echo, model) * std::exp(-0.5 * std::max(0.0, var));
}

CoherenceResult fit_coherence_time(std::span<const double> delays, std::span<const double> visibilities,
                                   std::span<const double> errors) {
  const std::size_t n = delays.size();
  if (n < 3) throw FitError("fit_coherence_time: need at least 3 delays");
  if (visibilities.size() != n) throw InvalidArgument("fit_coherence_time: size mismatch");
  bool decreases = false;
  for (std::size_t i = 1; i < n; ++i) decreases = decreases || visibilities[i] < visibilities[i - 1];
  if (!decreases) throw FitError("fit_coherence_time: visibilities never decrease");

  std::vector<double> sig(n, 1.0);
  if (errors.size() == n && std::all_of(errors.begin(), errors.end(), [](double e) { return e > 0.0; })) {
    sig.assign(errors.begin(), errors.end());
  }

  // Start from a log-linear fit over the positive points.
  double v0 = *std::max_element(visibilities.begin(), visibilities.end());
  double t2 = 0.0;
  {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      if (visibilities[i] > 0.02 * v0) {
        xs.push_back(delays[i] * delays[i]);
        ys.push_back(std::log(visibilities[i]));
      }
    }
    bool distinct = xs.size() >= 2 && std::any_of(xs.begin(), xs.end(), [&](double x) { return x != xs.front(); });
    if (distinct) {
      const auto line = fit_line(xs, ys, {}, CovarianceScaling::absolute);
      if (line.slope < 0.0) {
        t2 = std::sqrt(-1.0 / line.slope);
        v0 = std::exp(line.intercept);
      }
    }
    if (!(t2 > 0.0)) t2 = *std::max_element(delays.begin(), delays.end());
  }

  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = delays[i] / p(1);
      r(static_cast<Eigen::Index>(i)) = (p(0) * std::exp(-x * x) - visibilities[i]) / sig[i];
    }
    return r;
  };
  LevenbergMarquardtOptions opt;
  opt.scale = Eigen::Vector2d(1.0, t2);
  const auto fit = levenberg_marquardt(residuals, Eigen::Vector2d(v0, t2), opt);
  if (!fit.params.allFinite() || !(fit.params(1) != 0.0)) throw FitError("fit_coherence_time: fit diverged");

  CoherenceResult out;
  out.delays.assign(delays.begin(), delays.end());
  out.visibilities.assign(visibilities.begin(), visibilities.end());
  if (errors.size() == n) out.visibility_se.assign(errors.begin(), errors.end());
  out.v0 = fit.params(0);
  out.t2 = std::abs(fit.params(1));
  const double dof = static_cast<double>(n) - 2.0;
  const double scale = fit.cost / dof;
  out.t2_uncertainty = std::sqrt(std::max(0.0, fit.covariance(1, 1) * scale));
  return out;
}

std::vector<double> evenly_spaced_phases(int n) {
  if (n < 3) throw InvalidArgument("evenly_spaced_phases: need at least 3 phases");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = constants::two_pi * i / n;
  return out;
}

CoherenceResult run_coherence_scan(const CoherenceScan& scan, const DephasingModel& model, std::uint64_t seed) {
  const auto phases = evenly_spaced_phases(scan.phase_points);
  std::vector<double> vis, se;
  for (std::size_t k = 0; k < scan.delays.size(); ++k) {
    const std::uint64_t delay_seed = mix64(seed ^ mix64(k + 1));
    const auto fringe = run_fringe(scan.sequence, scan.delays[k], phases, model, scan.fringe, delay_seed);
    const auto v = fringe_visibility(fringe);
    vis.push_back(v.value);
    se.push_back(v.uncertainty);
  }
  auto result = fit_coherence_time(scan.delays, vis, se);
  for (auto& v : result.visibilities) v = std::clamp(v, 0.0, 1.0);
  return result;
}

std::vector<double> rabi_drive(std::span<const double> durations, double omega0, int shots,
                               const DephasingModel& model, std::uint64_t seed) {
  model.validate();
  if (!(omega0 > 0.0)) throw InvalidArgument("rabi_drive: omega0 must be > 0");
  if (shots < 0) throw InvalidArgument("rabi_drive: shots must be >= 0");
  const double eps = model.pulse_infidelity;
  std::vector<double> out;
  out.reserve(durations.size());
  if (shots == 0) {
    for (double t : durations) {
      const double s = std::sin(0.5 * omega0 * t);
      out.push_back(eps + (1.0 - 2.0 * eps) * s * s);
    }
    return out;
  }
  const double sigma = std::hypot(model.sigma_static, model.sigma_dynamic);
  const std::uint64_t stream = stream_id("coherence.rabi");
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const double t = durations[i];
    int ones = 0;
    for (int j = 0; j < shots; ++j) {
      CounterRng rng(seed, stream, i * static_cast<std::size_t>(shots) + static_cast<std::size_t>(j));
      std::normal_distribution<double> normal(0.0, 1.0);
      const double delta = sigma * normal(rng);
      const double w = std::hypot(omega0, delta);
      const double s = std::sin(0.5 * w * t);
      const double p = eps + (1.0 - 2.0 * eps) * (omega0 * omega0) / (w * w) * s * s;
      ones += rng.uniform() < p ? 1 : 0;
    }
    out.push_back(static_cast<double>(ones) / shots);
  }
  return out;
}

double model_t2(Sequence seq, const DephasingModel& model, std::span<const double> delays) {
  std::vector<double> v;
  for (double t : delays) {
    v.push_back(seq == Sequence::ramsey ? ramsey_visibility(model, t) : echo_visibility(model, t));
  }
  return fit_coherence_time(delays, v, {}).t2;
}

namespace {

// Root of f(log sigma) on [log lo, log hi]; f must change sign.
template <class F>
double solve_log_sigma(F f, double lo, double hi, const char* what) {
  auto g = [&](double ls) { return f(std::exp(ls)); };
  double a = std::log(lo);
  double b = std::log(hi);
  if (g(a) * g(b) > 0.0) throw ConvergenceError(std::string("calibration: target out of reach for ") + what);
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, a, b, boost::math::tools::eps_tolerance<double>(40), iters);
  return std::exp(0.5 * (r.first + r.second));
}

}  // namespace

DephasingModel calibrate_echo(DephasingModel model, double echo_t2, std::span<const double> echo_delays) {
  model.sigma_dynamic = solve_log_sigma(
      [&](double s) {
        DephasingModel m = model;
        m.sigma_dynamic = s;
        return model_t2(Sequence::spin_echo, m, echo_delays) - echo_t2;
      },
      1e-3, 1e2, "sigma_dynamic");
  return model;
}

DephasingModel calibrate_dephasing(double ramsey_t2, double echo_t2, double tau_c,
                                   std::span<const double> ramsey_delays, std::span<const double> echo_delays) {
  DephasingModel model;
  model.tau_c = tau_c;
  model = calibrate_echo(model, echo_t2, echo_delays);
  {
    DephasingModel m = model;
    m.sigma_static = 0.0;
    if (model_t2(Sequence::ramsey, m, ramsey_delays) < ramsey_t2) {
      throw ConvergenceError("calibration: dynamic noise alone already shortens Ramsey T2 below the target");
    }
  }
  model.sigma_static = solve_log_sigma(
      [&](double s) {
        DephasingModel m = model;
        m.sigma_static = s;
        return model_t2(Sequence::ramsey, m, ramsey_delays) - ramsey_t2;
      },
      1e-4, 1e2, "sigma_static");
  return model;
}

namespace {

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

}  // namespace

std::vector<double> default_ramsey_delays() { return linear_grid(0.05, 1.6, 12); }
std::vector<double> default_echo_delays() { return linear_grid(0.1, 3.6, 12); }

}  // namespace iontrap

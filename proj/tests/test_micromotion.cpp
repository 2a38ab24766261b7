#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <doctest.h>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/micromotion.hpp"
#include "support.hpp"

using namespace iontrap;
using std::numbers::pi;

namespace {

const double kGamma = constants::yb_cooling_linewidth;
const double kK = constants::yb_cooling_wavenumber;

// Monodromy trace of the Mathieu equation with an adaptive Dormand-Prince integrator.
double odeint_beta(double a, double q) {
  using State = std::array<double, 2>;
  auto rhs = [&](const State& s, State& d, double tau) {
    d[0] = s[1];
    d[1] = -0.25 * (a - 2.0 * q * std::cos(tau)) * s[0];
  };
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
  State s1{1.0, 0.0};
  State s2{0.0, 1.0};
  ode::integrate_adaptive(stepper, rhs, s1, 0.0, 2.0 * pi, 1e-3);
  ode::integrate_adaptive(stepper, rhs, s2, 0.0, 2.0 * pi, 1e-3);
  return std::acos(0.5 * (s1[0] + s2[1])) / pi;
}

RfTrapDynamics with_field(double ex, double ez) {
  auto d = RfTrapDynamics::reference();
  d.stray_field = {ex, ez};
  return d;
}

ProbeBeam beam(double angle, double saturation = 0.5) {
  auto b = ProbeBeam::ytterbium(-0.5 * kGamma);
  b.angle = angle;
  b.saturation = saturation;
  return b;
}

SteadyStateOptions quick() {
  SteadyStateOptions o;
  o.steps_per_cycle = 64;
  return o;
}

// Lorentzian averaged over an arcsine velocity distribution by Gauss-Chebyshev quadrature.
double arcsine_rate(double detuning, double kv0, double s) {
  const int n = 400;
  double sum = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double u = std::cos((2.0 * j - 1.0) * pi / (2.0 * n));
    const double d = detuning - kv0 * u;
    sum += 0.5 * kGamma * s / (1.0 + s + 4.0 * d * d / (kGamma * kGamma));
  }
  return sum / n;
}

double bisect_half(double lo, double hi, double half, double kv0, double s) {
  // rate(lo) < half < rate(hi) or reversed
  double flo = arcsine_rate(lo, kv0, s) - half;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = arcsine_rate(mid, kv0, s) - half;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("micromotion") {
  TEST_CASE("characteristic exponent matches an adaptive integrator") {
    for (auto [a, q] : {std::pair{0.0, 0.1}, {0.01, 0.2}, {-0.005, 0.3}, {0.02, -0.185}}) {
      CHECK(mathieu_beta(a, q) == testing::approx(odeint_beta(a, q)).epsilon(1e-8));
    }
    // Lowest-order approximation beta^2 = a + q^2 / 2 at small q.
    CHECK(mathieu_beta(0.0, 0.05) == testing::approx(0.05 / std::sqrt(2.0)).epsilon(1e-3));
    CHECK_THROWS_AS(mathieu_beta(0.0, 1.0), InstabilityError);
  }

  TEST_CASE("axis parameters reproduce the requested secular frequencies") {
    const auto d = RfTrapDynamics::reference();
    const auto p = axis_parameters(d);
    CHECK(p[0].q == testing::approx(-p[1].q));
    for (int i = 0; i < 2; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      CHECK(odeint_beta(p[ui].a, p[ui].q) * d.omega_rf / 2.0 == testing::approx(d.secular[ui]).epsilon(1e-7));
    }
  }

  TEST_CASE("integrator is symplectic and conserves the Courant-Snyder invariant") {
    const auto d = RfTrapDynamics::reference();
    const auto p = axis_parameters(d)[0];
    const auto m = integrator_monodromy(p, d.omega_rf, 200);
    CHECK(m.determinant() == testing::approx(1.0).epsilon(1e-12));
    CHECK(std::acos(0.5 * m.trace()) / pi == testing::approx(mathieu_beta(p.a, p.q)).epsilon(1e-4));

    // Undamped, unforced: J = g x^2 + 2 al x v + be v^2 from the one-period map.
    auto free = d;
    free.damping = 0.0;
    const auto m64 = integrator_monodromy(p, d.omega_rf, 64);
    const double mu = std::acos(0.5 * m64.trace());
    const double al = (m64(0, 0) - m64(1, 1)) / (2.0 * std::sin(mu));
    const double be = m64(0, 1) / std::sin(mu);
    const double ga = -m64(1, 0) / std::sin(mu);
    TrajectoryOptions o;
    o.initial.x = {1e-7, 0.0};
    o.sample_every = 64;
    const double period = 2.0 * pi / d.omega_rf;
    const auto tr = integrate_trajectory(free, 1000 * period, period / 64, o);
    auto invariant = [&](const PhaseState& s) { return ga * s.x[0] * s.x[0] + 2 * al * s.x[0] * s.v[0] + be * s.v[0] * s.v[0]; };
    const double j0 = invariant(tr.states.front());
    for (const auto& s : tr.states) CHECK(std::abs(invariant(s) / j0 - 1.0) < 1e-3);
    CHECK(tr.states.size() == 1001);
  }

  TEST_CASE("ion at the null stays at the null") {
    const auto d = RfTrapDynamics::reference();
    const double period = 2.0 * pi / d.omega_rf;
    const auto tr = integrate_trajectory(d, 200 * period, period / 64);
    double mean = 0.0;
    for (const auto& s : tr.states) {
      CHECK(std::abs(s.x[0]) < 1e-12);
      CHECK(std::abs(s.x[1]) < 1e-12);
      mean += s.x[0];
    }
    CHECK(std::abs(mean / tr.states.size()) < 1e-12);
  }

  TEST_CASE("stray field displaces the ion and drives micromotion") {
    const auto base = RfTrapDynamics::reference();
    const auto q = axis_parameters(base);
    const double period = 2.0 * pi / base.omega_rf;
    TrajectoryOptions o;
    o.start_on_periodic_orbit = true;
    std::array<double, 2> ratio{};
    for (int k = 0; k < 2; ++k) {
      const double e = 10.0 * (k + 1);
      const auto d = with_field(e, 0.0);
      const auto tr = integrate_trajectory(d, period, period / 256, o);
      double lo = 1.0;
      double hi = -1.0;
      double mean = 0.0;
      for (std::size_t i = 1; i < tr.states.size(); ++i) {
        lo = std::min(lo, tr.states[i].x[0]);
        hi = std::max(hi, tr.states[i].x[0]);
        mean += tr.states[i].x[0];
      }
      mean /= static_cast<double>(tr.states.size() - 1);
      const double expected = d.charge * e / (d.mass * d.secular[0] * d.secular[0]);
      CHECK(mean == testing::approx(expected).epsilon(0.05));
      const double amplitude = 0.5 * (hi - lo);
      CHECK(amplitude / mean == testing::approx(0.5 * std::abs(q[0].q)).epsilon(0.05));
      ratio[static_cast<std::size_t>(k)] = amplitude / mean;
    }
    CHECK(ratio[0] == testing::approx(ratio[1]).epsilon(1e-9));
  }

  TEST_CASE("resonant excitation grows to the damping-limited amplitude") {
    const double e = 5.0;
    auto d = with_field(e, 0.0);
    d.excitation_depth = 0.002;
    d.excitation_frequency = d.omega_rf + d.secular[0];
    const auto q = axis_parameters(d)[0].q;
    const double period = 2.0 * pi / d.omega_rf;
    const double settle = 10.0 / d.damping;
    const double window = 2.0 / d.damping;
    TrajectoryOptions o;
    o.start_on_periodic_orbit = true;
    const auto tr = integrate_trajectory(d, settle + window, period / 200, o);

    auto secular_amplitude = [&](const Trajectory& t) {
      std::complex<double> acc{0.0, 0.0};
      double mean = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < t.t.size(); ++i) {
        if (t.t[i] < settle) continue;
        mean += t.states[i].x[0];
        ++n;
      }
      mean /= n;
      for (std::size_t i = 0; i < t.t.size(); ++i) {
        if (t.t[i] < settle) continue;
        acc += (t.states[i].x[0] - mean) * std::polar(1.0, -d.secular[0] * t.t[i]);
      }
      return 2.0 * std::abs(acc) / n;
    };

    const double x0 = d.charge * e / (d.mass * d.secular[0] * d.secular[0]);
    const double w = d.secular[0];
    const double om = d.omega_rf;
    const double force = om * om * q * q * d.excitation_depth * x0 / 8.0 * (1.0 + om * om / ((om + w) * (om + w)));
    const double oracle = force / (d.damping * w);
    const double measured = secular_amplitude(tr);
    MESSAGE("secular amplitude " << measured << " m, oracle " << oracle << " m");
    CHECK(measured == testing::approx(oracle).epsilon(0.1));

    auto centred = d;
    centred.stray_field = {0.0, 0.0};
    const auto quiet = integrate_trajectory(centred, settle + window, period / 200, o);
    CHECK(secular_amplitude(quiet) < 1e-15);
  }

  TEST_CASE("scatter rate") {
    const double s = 0.5;
    const double peak = 0.5 * kGamma * s / (1.0 + s);
    CHECK(scatter_rate(0.0, 0.0, kGamma, s, kK) == testing::approx(peak).epsilon(1e-14));
    const double weak = 1e-8;
    CHECK(scatter_rate(0.0, 0.5 * kGamma, kGamma, weak, kK) / scatter_rate(0.0, 0.0, kGamma, weak, kK) ==
          testing::approx(0.5).epsilon(1e-7));
    CHECK(scatter_rate(1e4, 0.0, kGamma, s, kK) < 1e-6 * peak);
    // Doppler shift: moving along the beam at v looks like detuning k v.
    CHECK(scatter_rate(3.0, -0.5 * kGamma, kGamma, s, kK) ==
          testing::approx(scatter_rate(0.0, -0.5 * kGamma - kK * 3.0, kGamma, s, kK)).epsilon(1e-14));
  }

  TEST_CASE("excitation spectrum is flat at zero field and grows with field and depth") {
    std::vector<double> offsets = testing::linspace(2.0 * pi * 1.3e6, 2.0 * pi * 2.3e6, 11);
    auto d = with_field(0.0, 0.0);
    d.excitation_depth = 0.002;
    offsets.push_back(d.secular[0]);
    offsets.push_back(d.secular[1]);
    const auto flat = excitation_spectrum(d, offsets, beam(pi / 4), quick());
    CHECK(flat.peak_height < 0.01 * flat.baseline);

    double prev = 0.0;
    for (double e : {3.0, 6.0, 12.0}) {
      auto de = with_field(e / std::sqrt(2.0), e / std::sqrt(2.0));
      de.excitation_depth = 0.002;
      const double h = excitation_peak_metric(de, beam(pi / 4), quick());
      CHECK(h > prev);
      prev = h;
    }
    prev = 0.0;
    for (double eps : {0.001, 0.002, 0.004}) {
      auto de = with_field(7.0, 7.0);
      de.excitation_depth = eps;
      const double h = excitation_peak_metric(de, beam(pi / 4), quick());
      CHECK(h > prev);
      prev = h;
    }
  }

  TEST_CASE("RF-phase contrast") {
    const auto x_beam = beam(0.0);
    CHECK(rf_correlation_contrast(with_field(0.0, 0.0), x_beam) == 0.0);
    CHECK(rf_correlation_contrast(with_field(0.0, 50.0), x_beam) < 1e-12);

    // First order in the velocity: R(v) = R0 (1 + c1 v).
    const double e = 0.2;
    const auto d = with_field(e, 0.0);
    const auto v = beam_velocity_samples(d, x_beam, 256);
    const double delta = x_beam.detuning;
    const double c1 = (8.0 * kK * delta / (kGamma * kGamma)) / (1.0 + x_beam.saturation + 4.0 * delta * delta / (kGamma * kGamma));
    std::vector<double> bin_mean(32, 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) bin_mean[k / 8] += v[k] / 8.0;
    const auto [mn, mx] = std::minmax_element(bin_mean.begin(), bin_mean.end());
    const double taylor = std::abs(c1) * (*mx - *mn) / 2.0;
    CHECK(rf_correlation_contrast(d, x_beam) == testing::approx(taylor).epsilon(0.01));

    const double c_small = rf_correlation_contrast(with_field(0.1, 0.0), x_beam);
    const double c_double = rf_correlation_contrast(with_field(0.2, 0.0), x_beam);
    CHECK(c_double / c_small == testing::approx(2.0).epsilon(0.01));
  }

  TEST_CASE("RF-phase contrast follows the beam projection") {
    const auto d = with_field(0.5, 0.0);
    const double c0 = rf_correlation_contrast(d, beam(0.0));
    for (double angle : {pi / 6, pi / 4, pi / 3}) {
      CHECK(rf_correlation_contrast(d, beam(angle)) / c0 == testing::approx(std::cos(angle)).epsilon(0.02));
    }
  }

  TEST_CASE("lineshape without micromotion is the power-broadened Lorentzian") {
    const auto d = with_field(0.0, 0.0);
    for (double s : {1e-6, 0.01, 0.5}) {
      const auto b = beam(pi / 4, s);
      const auto v = beam_velocity_samples(d, b);
      const double fwhm = lineshape_fwhm([&](double det) { return averaged_rate(v, det, b); }, 5.0 * kGamma);
      CHECK(fwhm == testing::approx(kGamma * std::sqrt(1.0 + s)).epsilon(1e-6));
    }
  }

  TEST_CASE("micromotion broadening matches the arcsine convolution") {
    const double s = 0.01;
    const auto b = beam(pi / 4, s);
    const auto unit = beam_velocity_samples(with_field(1.0, 1.0), b);
    const double v_unit = *std::max_element(unit.begin(), unit.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
    const double scale = (kGamma / kK) / std::abs(v_unit);
    const auto v = beam_velocity_samples(with_field(scale, scale), b);
    const double fwhm = lineshape_fwhm([&](double det) { return averaged_rate(v, det, b); }, 5.0 * kGamma);

    double peak = 0.0;
    for (double det = -3.0 * kGamma; det <= 3.0 * kGamma; det += kGamma / 2000) peak = std::max(peak, arcsine_rate(det, kGamma, s));
    const double lo = bisect_half(-5.0 * kGamma, 0.0, 0.5 * peak, kGamma, s);
    const double hi = bisect_half(5.0 * kGamma, 0.0, 0.5 * peak, kGamma, s);
    MESSAGE("broadened FWHM " << fwhm / kGamma << " Gamma, oracle " << (hi - lo) / kGamma << " Gamma");
    CHECK(fwhm == testing::approx(hi - lo).epsilon(0.02));
    CHECK(fwhm > kGamma);

    double prev = 0.0;
    for (double e : {0.0, 50.0, 100.0, 300.0}) {
      const auto ve = beam_velocity_samples(with_field(e, e), b);
      const double w = lineshape_fwhm([&](double det) { return averaged_rate(ve, det, b); }, 20.0 * kGamma);
      CHECK(w > prev);
      prev = w;
    }
  }

  TEST_CASE("compensation recovers an injected field") {
    CompensationSearch search;
    search.beam = beam(pi / 4);
    search.range = 30.0;
    search.steady = quick();
    auto d = with_field(12.0, -7.0);
    d.excitation_depth = 0.002;
    const auto res = compensate(d, search);
    CHECK(res.estimated_stray[0] == testing::approx(12.0).epsilon(0.01));
    CHECK(res.estimated_stray[1] == testing::approx(-7.0).epsilon(0.01));

    auto centred = with_field(0.0, 0.0);
    centred.excitation_depth = 0.002;
    const auto zero = compensate(centred, search);
    CHECK(std::abs(zero.compensation[0]) < 0.01 * search.range);
    CHECK(std::abs(zero.compensation[1]) < 0.01 * search.range);
  }

  TEST_CASE("phase-contrast compensation sees only the beam axis") {
    CompensationSearch search;
    search.objective = CompensationObjective::rf_phase_contrast;
    search.beam = beam(0.0);
    search.range = 30.0;
    const auto res = compensate(with_field(12.0, -7.0), search);
    CHECK(res.observable[0]);
    CHECK_FALSE(res.observable[1]);
    CHECK(res.estimated_stray[0] == testing::approx(12.0).epsilon(0.01));
    CHECK(res.compensation[1] == 0.0);
  }

  TEST_CASE("invalid dynamics are rejected") {
    auto d = RfTrapDynamics::reference();
    d.secular[1] = 0.6 * d.omega_rf;
    CHECK_THROWS_AS(d.validate(), InvalidArgument);
    const auto ok = RfTrapDynamics::reference();
    const double period = 2.0 * pi / ok.omega_rf;
    CHECK_THROWS_AS(integrate_trajectory(ok, period, period / 10), InvalidArgument);
    CHECK_THROWS_AS(excitation_spectrum(ok, std::vector<double>{0.0}, ProbeBeam::ytterbium(kGamma)), InvalidArgument);
  }
}

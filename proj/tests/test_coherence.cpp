#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "iontrap/coherence.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/rng.hpp"
#include "support.hpp"

using namespace iontrap;
using std::numbers::pi;

namespace {

DephasingModel static_only(double sigma) {
  DephasingModel m;
  m.sigma_static = sigma;
  m.sigma_dynamic = 0.0;
  return m;
}

DephasingModel dynamic_only(double sigma, double tau) {
  DephasingModel m;
  m.sigma_dynamic = sigma;
  m.tau_c = tau;
  return m;
}

// Phase variance of a sequence with sign function s(t) on [0, T]:
// sigma^2 double integral of s(t) s(t') exp(-|t - t'| / tau), midpoint rule.
double filter_variance(double sigma, double tau, double total, bool echo, int n = 3000) {
  const double h = total / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ti = (i + 0.5) * h;
    const double si = echo && ti < 0.5 * total ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      const double tj = (j + 0.5) * h;
      const double sj = echo && tj < 0.5 * total ? -1.0 : 1.0;
      acc += si * sj * std::exp(-std::abs(ti - tj) / tau);
    }
  }
  return sigma * sigma * acc * h * h;
}

FringeOptions expectation(int shots) {
  FringeOptions o;
  o.shots = shots;
  o.projective = false;
  return o;
}

}  // namespace

TEST_SUITE("coherence") {
  TEST_CASE("noiseless fringes have full contrast") {
    const auto phases = evenly_spaced_phases(8);
    const DephasingModel quiet = static_only(0.0);
    for (double delay : {0.0, 0.3, 2.0}) {
      const auto r = ramsey_fringe(delay, phases, quiet, expectation(1), 1);
      const auto e = spin_echo_fringe(delay, phases, quiet, expectation(1), 1);
      CHECK(fringe_visibility(r).value == testing::approx(1.0).epsilon(1e-12));
      CHECK(fringe_visibility(e).value == testing::approx(1.0).epsilon(1e-12));
      for (std::size_t i = 0; i < phases.size(); ++i) {
        CHECK(std::abs(r.p1[i] - 0.5 * (1.0 + std::cos(phases[i]))) < 1e-12);
      }
    }
  }

  TEST_CASE("zero delay keeps full visibility for any model") {
    const auto phases = evenly_spaced_phases(8);
    for (const auto& m : {DephasingModel::microwave(), DephasingModel::raman()}) {
      CHECK(fringe_visibility(ramsey_fringe(0.0, phases, m, expectation(50), 3)).value ==
            testing::approx(1.0).epsilon(1e-12));
      CHECK(ramsey_visibility(m, 0.0) == 1.0);
      CHECK(echo_visibility(m, 0.0) == 1.0);
    }
  }

  TEST_CASE("static noise decays as a Gaussian characteristic function") {
    const double sigma = 1.2318;
    const double t = 0.8;
    const auto m = static_only(sigma);
    const int n = 1000000;
    const auto stream = stream_id("test.static");
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = std::cos(accumulated_phase(Sequence::ramsey, t, m, 4, stream, std::uint64_t(i)));
      sum += c;
      sum2 += c * c;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    const double expected = std::exp(-0.5 * sigma * sigma * t * t);
    CHECK(std::abs(mean - expected) <= 3.0 * se);
    CHECK(ramsey_visibility(m, t) == testing::approx(expected).epsilon(1e-14));
  }

  TEST_CASE("static-noise identity on sampled fringes") {
    const auto m = static_only(1.2318);
    const auto phases = evenly_spaced_phases(8);
    for (double t : {0.3, 0.8, 1.2}) {
      const auto v = fringe_visibility(ramsey_fringe(t, phases, m, expectation(100000), 8));
      CHECK(std::abs(v.value - ramsey_visibility(m, t)) <= 3.0 * v.uncertainty + 1e-3);
    }
  }

  TEST_CASE("sampled OU phase has the filter-function variance") {
    const auto m = dynamic_only(1.733, 0.5);
    const auto stream = stream_id("test.ou");
    const int n = 20000;
    for (Sequence seq : {Sequence::ramsey, Sequence::spin_echo}) {
      const double t = 1.4;
      double sum2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double phi = accumulated_phase(seq, t, m, 6, stream, std::uint64_t(i));
        sum2 += phi * phi;
      }
      const double var = filter_variance(1.733, 0.5, t, seq == Sequence::spin_echo);
      CHECK(std::abs(sum2 / n - var) <= 3.0 * var * std::sqrt(2.0 / n));
    }
  }

  TEST_CASE("model visibilities equal the filter-function integrals") {
    for (double tau : {0.05, 0.5, 5.0}) {
      const auto m = dynamic_only(1.733, tau);
      for (double t : {0.2, 1.0, 2.5}) {
        CHECK(ramsey_visibility(m, t) == testing::approx(std::exp(-0.5 * filter_variance(1.733, tau, t, false))).epsilon(1e-4));
        CHECK(echo_visibility(m, t) == testing::approx(std::exp(-0.5 * filter_variance(1.733, tau, t, true))).epsilon(1e-4));
      }
    }
  }

  TEST_CASE("echo limits") {
    const auto phases = evenly_spaced_phases(8);
    const auto fixed = static_only(3.0);
    for (double t : {0.5, 1.5, 3.0}) {
      CHECK(fringe_visibility(spin_echo_fringe(t, phases, fixed, expectation(200), 2)).value ==
            testing::approx(1.0).epsilon(1e-12));
    }
    const auto slow = dynamic_only(1.733, 1e4);
    CHECK(echo_visibility(slow, 1.0) > 0.999);
    const auto fast = dynamic_only(30.0, 1e-4);
    for (double t : {0.5, 1.0}) CHECK(echo_visibility(fast, t) == testing::approx(ramsey_visibility(fast, t)).epsilon(1e-3));
  }

  TEST_CASE("echo visibility is never below Ramsey") {
    for (const auto& m : {DephasingModel::microwave(), DephasingModel::raman(), dynamic_only(2.0, 0.1),
                          static_only(1.0)}) {
      for (double t : testing::linspace(0.0, 4.0, 41)) CHECK(echo_visibility(m, t) >= ramsey_visibility(m, t) - 1e-15);
    }
  }

  TEST_CASE("fringe visibility ignores a common phase offset") {
    const auto phases = evenly_spaced_phases(8);
    FringeOptions o;
    o.shots = 100;
    const auto f = ramsey_fringe(0.6, phases, DephasingModel::microwave(), o, 12);
    Fringe shifted = f;
    for (auto& p : shifted.phases) p += 0.7;
    const auto a = fringe_visibility(f);
    const auto b = fringe_visibility(shifted);
    CHECK(b.value == testing::approx(a.value).epsilon(1e-12));
    CHECK(b.uncertainty == testing::approx(a.uncertainty).epsilon(1e-9));
  }

  TEST_CASE("Gaussian fit recovers exact data") {
    const auto delays = default_ramsey_delays();
    std::vector<double> v;
    for (double t : delays) v.push_back(0.97 * std::exp(-(t / 0.78) * (t / 0.78)));
    const auto fit = fit_coherence_time(delays, v, {});
    CHECK(fit.t2 == testing::approx(0.78).epsilon(1e-8));
    CHECK(fit.v0 == testing::approx(0.97).epsilon(1e-8));
    CHECK(fit.t2_uncertainty < 1e-6);
    const std::vector<double> flat(delays.size(), 0.5);
    CHECK_THROWS_AS(fit_coherence_time(delays, flat, {}), FitError);
  }

  TEST_CASE("noise calibration round trip") {
    const auto r = default_ramsey_delays();
    const auto e = default_echo_delays();
    const auto m = calibrate_dephasing(0.78, 1.883, 0.5, r, e);
    CHECK(model_t2(Sequence::ramsey, m, r) == testing::approx(0.78).epsilon(1e-6));
    CHECK(model_t2(Sequence::spin_echo, m, e) == testing::approx(1.883).epsilon(1e-6));
    CHECK(m.sigma_static == testing::approx(DephasingModel::microwave().sigma_static).epsilon(1e-3));
    CHECK(m.sigma_dynamic == testing::approx(DephasingModel::microwave().sigma_dynamic).epsilon(1e-3));

    const auto raman = calibrate_echo(m, 1.433, e);
    CHECK(model_t2(Sequence::spin_echo, raman, e) == testing::approx(1.433).epsilon(1e-6));
    CHECK(raman.sigma_dynamic > m.sigma_dynamic);
  }

  TEST_CASE("microwave Ramsey pipeline at 100 shots per point") {
    CoherenceScan scan;
    scan.delays = default_ramsey_delays();
    scan.fringe.shots = 100;
    const auto res = run_coherence_scan(scan, DephasingModel::microwave(), 1);
    MESSAGE("Ramsey T2 " << res.t2 << " +- " << res.t2_uncertainty);
    CHECK(std::abs(res.t2 / 0.78 - 1.0) <= 0.15);
  }

  TEST_CASE("Rabi drive") {
    const double omega0 = pi / 0.1e-3;  // 0.1 ms pi time
    const std::vector<double> t{0.0, 0.1e-3, 0.2e-3};
    const auto clean = rabi_drive(t, omega0, 0, DephasingModel::microwave(), 1);
    CHECK(clean[0] == 0.0);
    CHECK(clean[1] == testing::approx(1.0).epsilon(1e-14));
    CHECK(clean[2] < 1e-20);
    const auto noisy = rabi_drive(t, omega0, 2000, DephasingModel::microwave(), 1);
    CHECK(noisy[0] == 0.0);
    CHECK(noisy[1] > 0.99);
    CHECK(noisy[2] < 0.01);
  }

  TEST_CASE("fringes do not depend on the worker count") {
    const auto phases = evenly_spaced_phases(8);
    FringeOptions a;
    a.shots = 200;
    a.workers = 1;
    FringeOptions b = a;
    b.workers = 4;
    const auto fa = spin_echo_fringe(1.2, phases, DephasingModel::raman(), a, 5);
    const auto fb = spin_echo_fringe(1.2, phases, DephasingModel::raman(), b, 5);
    CHECK(fa.p1 == fb.p1);
  }

  TEST_CASE("invalid models are rejected") {
    DephasingModel m = DephasingModel::microwave();
    m.tau_c = 0.0;
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
    m = DephasingModel::microwave();
    m.sigma_static = -1.0;
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
  }
}

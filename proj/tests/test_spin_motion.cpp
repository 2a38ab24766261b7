#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "iontrap/errors.hpp"
#include "iontrap/spin_motion.hpp"
#include "support.hpp"

using namespace iontrap;
using std::numbers::pi;

namespace {

constexpr double kOmega0 = 2.0 * pi * 100e3;

// Brute-force evolution: full (n, spin) Hilbert space, one Hamiltonian,
// one matrix exponential. Basis index 2n + s with s = 0 dark, 1 bright.
double oracle_bright(const std::vector<double>& probs, Branch branch, double eta, double detuning,
                     double t) {
  const int n_levels = static_cast<int>(probs.size()) + 1;
  const int dim = 2 * n_levels;
  const int shift = branch == Branch::carrier ? 0 : (branch == Branch::red_sideband ? -1 : 1);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 0; n < n_levels; ++n) {
    h(2 * n, 2 * n) = -detuning / 2.0;
    h(2 * n + 1, 2 * n + 1) = detuning / 2.0;
    const int m = n + shift;
    if (m < 0 || m >= n_levels) continue;
    double omega = kOmega0;
    if (shift == -1) omega = eta * std::sqrt(static_cast<double>(n)) * kOmega0;
    if (shift == 1) omega = eta * std::sqrt(static_cast<double>(n + 1)) * kOmega0;
    h(2 * m + 1, 2 * n) = omega / 2.0;
    h(2 * n, 2 * m + 1) = omega / 2.0;
  }
  const Eigen::MatrixXcd u = (std::complex<double>(0.0, -t) * h).exp();
  double bright = 0.0;
  for (int n = 0; n + 1 < n_levels; ++n) {
    for (int k = 0; k < n_levels; ++k) bright += probs[static_cast<std::size_t>(n)] * std::norm(u(2 * k + 1, 2 * n));
  }
  return bright;
}

std::vector<double> random_probs(std::mt19937_64& gen, int n_max) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(n_max + 1));
  double total = 0.0;
  for (auto& x : p) total += (x = u(gen));
  for (auto& x : p) x /= total;
  return p;
}

PulseSpec pulse(Branch b, double duration = 0.0) {
  PulseSpec p;
  p.branch = b;
  p.omega0 = kOmega0;
  p.eta = 0.1;
  p.duration = duration;
  return p;
}

}  // namespace

TEST_SUITE("spin_motion") {
  TEST_CASE("thermal distribution closed form") {
    const auto ground = thermal_distribution(0.0, 10);
    CHECK(ground[0] == 1.0);
    for (int n = 1; n <= 10; ++n) CHECK(ground[n] == 0.0);

    // p_n = 1^n / 2^(n+1)
    const auto one = thermal_distribution(1.0, 60);
    CHECK(one[0] == testing::approx(0.5).epsilon(1e-12));
    CHECK(one[1] == testing::approx(0.25).epsilon(1e-12));
    CHECK(one[2] == testing::approx(0.125).epsilon(1e-12));

    const auto doppler = thermal_distribution(4.5, 200);
    CHECK(std::abs(doppler.mean() - 4.5) < 1e-3);
  }

  TEST_CASE("thermal distribution rejects a too small truncation") {
    CHECK_THROWS_AS(thermal_distribution(4.5, 10), TruncationError);
    const auto automatic = thermal_distribution_auto(30.0, 16);
    CHECK(std::abs(automatic.mean() - 30.0) < 1e-4 * 31.0);
  }

  TEST_CASE("motional distribution validates") {
    CHECK_THROWS_AS(MotionalDistribution({0.5, 0.4}), InvalidArgument);
    CHECK_THROWS_AS(MotionalDistribution({1.2, -0.2}), InvalidArgument);
  }

  TEST_CASE("first-order Rabi frequencies") {
    CHECK(rabi_frequency(pulse(Branch::red_sideband), 0) == 0.0);
    CHECK(rabi_frequency(pulse(Branch::blue_sideband), 0) == testing::approx(2.0 * pi * 10e3).epsilon(1e-14));
    CHECK(rabi_frequency(pulse(Branch::red_sideband), 4) == testing::approx(2.0 * pi * 20e3).epsilon(1e-14));
    CHECK(rabi_frequency(pulse(Branch::carrier), 7) == kOmega0);
  }

  TEST_CASE("full Lamb-Dicke elements match the displacement operator") {
    // |<m| exp(i eta (a + a^dag)) |n>| in a large truncated Fock space.
    const double eta = 0.3;
    const int dim = 80;
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 1; k < dim; ++k) {
      x(k - 1, k) = std::sqrt(static_cast<double>(k));
      x(k, k - 1) = std::sqrt(static_cast<double>(k));
    }
    const Eigen::MatrixXcd d = (std::complex<double>(0.0, eta) * x).exp();
    PulseSpec p = pulse(Branch::carrier);
    p.eta = eta;
    p.full_lamb_dicke = true;
    for (int n = 0; n <= 20; ++n) {
      p.branch = Branch::carrier;
      CHECK(rabi_frequency(p, n) == testing::approx(kOmega0 * std::abs(d(n, n))).epsilon(1e-9));
      p.branch = Branch::blue_sideband;
      CHECK(rabi_frequency(p, n) == testing::approx(kOmega0 * std::abs(d(n + 1, n))).epsilon(1e-9));
      p.branch = Branch::red_sideband;
      const double red = n == 0 ? 0.0 : kOmega0 * std::abs(d(n - 1, n));
      CHECK(rabi_frequency(p, n) == testing::approx(red).epsilon(1e-9));
    }
  }

  TEST_CASE("flop curve examples") {
    const auto ground = thermal_distribution(0.0, 20);
    const auto times = testing::linspace(0.0, 1e-3, 50);
    for (double v : flop_curve(ground, pulse(Branch::red_sideband), times)) CHECK(v == 0.0);

    const auto warm = thermal_distribution(3.0, 120);
    const std::vector<double> pi_time{pi / kOmega0};
    CHECK(flop_curve(warm, pulse(Branch::carrier), pi_time)[0] == testing::approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("flop curve equals brute-force matrix exponential") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 6; ++trial) {
      const int n_max = 3 + trial;
      const auto probs = random_probs(gen, n_max);
      const MotionalDistribution dist(probs);
      for (Branch b : {Branch::carrier, Branch::red_sideband, Branch::blue_sideband}) {
        for (double detuning : {0.0, 2.0 * pi * 3e3}) {
          PulseSpec p = pulse(b);
          p.detuning = detuning;
          const auto times = testing::linspace(0.0, 2e-4, 9);
          const auto curve = flop_curve(dist, p, times);
          for (std::size_t i = 0; i < times.size(); ++i) {
            CHECK(std::abs(curve[i] - oracle_bright(probs, b, 0.1, detuning, times[i])) < 1e-10);
          }
        }
      }
    }
  }

  TEST_CASE("thermal ratio law") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u_nbar(0.01, 6.0);
    std::uniform_real_distribution<double> u_t(0.0, 5e-4);
    for (int trial = 0; trial < 40; ++trial) {
      const double nbar = u_nbar(gen);
      const auto dist = thermal_distribution_auto(nbar, 64, 1e-14);
      const std::vector<double> t{u_t(gen)};
      const double red = flop_curve(dist, pulse(Branch::red_sideband), t)[0];
      const double blue = flop_curve(dist, pulse(Branch::blue_sideband), t)[0];
      CHECK(std::abs(red * (nbar + 1.0) - blue * nbar) < 1e-9);
    }
    // n = 0.5: pointwise ratio 1/3
    const auto half = thermal_distribution_auto(0.5, 64, 1e-14);
    const auto times = testing::linspace(1e-6, 4e-4, 30);
    const auto red = flop_curve(half, pulse(Branch::red_sideband), times);
    const auto blue = flop_curve(half, pulse(Branch::blue_sideband), times);
    for (std::size_t i = 0; i < times.size(); ++i) CHECK(red[i] / blue[i] == testing::approx(1.0 / 3.0).epsilon(1e-9));
  }

  TEST_CASE("apply_pulse examples") {
    const auto n3 = SpinMotionState::dark(MotionalDistribution::fock(3, 10));
    const auto flipped = apply_pulse(n3, pulse(Branch::carrier, pi / kOmega0));
    CHECK(flipped.bright_populations()[3] == testing::approx(1.0).epsilon(1e-12));

    const double red_pi = pi / (0.1 * kOmega0);
    const auto n1 = SpinMotionState::dark(MotionalDistribution::fock(1, 10));
    CHECK(apply_pulse(n1, pulse(Branch::red_sideband, red_pi)).bright_populations()[0] ==
          testing::approx(1.0).epsilon(1e-12));

    // sin^2(sqrt(4) pi / 2) = 0
    const auto n4 = SpinMotionState::dark(MotionalDistribution::fock(4, 10));
    CHECK(apply_pulse(n4, pulse(Branch::red_sideband, red_pi)).bright_probability() < 1e-24 + 1e-15);
  }

  TEST_CASE("apply_pulse agrees with flop_curve and conserves probability") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto dist = MotionalDistribution(random_probs(gen, 12));
    for (Branch b : {Branch::carrier, Branch::red_sideband, Branch::blue_sideband}) {
      for (int k = 0; k < 10; ++k) {
        PulseSpec p = pulse(b, 4e-4 * u(gen));
        p.detuning = 2.0 * pi * 5e3 * (u(gen) - 0.5);
        p.phase = 2.0 * pi * u(gen);
        auto state = SpinMotionState::dark(dist.resized(13));
        state = apply_pulse(state, p);
        CHECK(std::abs(state.total_probability() - 1.0) < 1e-12);
        const std::vector<double> t{p.duration};
        CHECK(state.bright_probability() == testing::approx(flop_curve(dist, p, t)[0]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("two pulses of the same branch compose coherently") {
    // Two half-length pulses equal one full pulse only with the coherence kept.
    const auto dist = thermal_distribution(0.4, 40);
    const double t = 1.7e-4;
    const auto once = apply_pulse(SpinMotionState::dark(dist), pulse(Branch::blue_sideband, t));
    const auto half = apply_pulse(SpinMotionState::dark(dist), pulse(Branch::blue_sideband, t / 2));
    CHECK(half.has_coherence());
    const auto twice = apply_pulse(half, pulse(Branch::blue_sideband, t / 2));
    CHECK(twice.bright_probability() == testing::approx(once.bright_probability()).epsilon(1e-12));
    CHECK_THROWS_AS(apply_pulse(half, pulse(Branch::red_sideband, t)), std::logic_error);
  }

  TEST_CASE("blue overflow is counted as leakage") {
    const auto top = SpinMotionState::dark(MotionalDistribution::fock(5, 5));
    const double blue_pi = pi / (0.1 * std::sqrt(6.0) * kOmega0);
    const auto out = apply_pulse(top, pulse(Branch::blue_sideband, blue_pi));
    CHECK(out.leakage() == testing::approx(1.0).epsilon(1e-12));
    CHECK(std::abs(out.total_probability() - 1.0) < 1e-12);
  }

  TEST_CASE("optical pumping resets the spin and keeps the motion") {
    const auto dist = thermal_distribution(1.0, 60);
    const auto state = apply_pulse(SpinMotionState::dark(dist), pulse(Branch::red_sideband, 1e-4));
    const auto pumped = state.pumped();
    CHECK(pumped.bright_probability() == 0.0);
    CHECK_FALSE(pumped.has_coherence());
    const auto before = state.motional();
    const auto after = pumped.motional();
    for (int n = 0; n <= 60; ++n) CHECK(after[n] == testing::approx(before[n]).epsilon(1e-14));
  }

  TEST_CASE("invalid pulses are rejected") {
    PulseSpec p = pulse(Branch::carrier, 1e-6);
    p.eta = 1.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = pulse(Branch::carrier, -1e-6);
    CHECK_THROWS_AS(apply_pulse(SpinMotionState::dark(MotionalDistribution::ground(3)), p), InvalidArgument);
  }
}

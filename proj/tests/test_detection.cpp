#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "iontrap/detection.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/rng.hpp"
#include "support.hpp"

using namespace iontrap;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// P(N <= k) by summing the probability mass directly.
double cdf_sum(int k, double mean) {
  double term = std::exp(-mean);
  double total = term;
  for (int j = 1; j <= k; ++j) {
    term *= mean / j;
    total += term;
  }
  return total;
}

// Composite Simpson over the leak time, threshold 1.5.
std::pair<double, double> simpson_errors(const DetectionModel& m, double w) {
  const int n = 20000;
  const double h = w / n;
  const double bg = m.background_rate * w;
  auto bright_integrand = [&](double t) {
    return std::exp(-t / m.depump_tau) / m.depump_tau * cdf_sum(1, m.bright_rate * t + bg);
  };
  auto dark_integrand = [&](double t) {
    return std::exp(-t / m.repump_tau) / m.repump_tau * cdf_sum(1, m.bright_rate * (w - t) + bg);
  };
  double sb = bright_integrand(0.0) + bright_integrand(w);
  double sd = dark_integrand(0.0) + dark_integrand(w);
  for (int i = 1; i < n; ++i) {
    const double c = i % 2 ? 4.0 : 2.0;
    sb += c * bright_integrand(i * h);
    sd += c * dark_integrand(i * h);
  }
  const double err_bright = std::exp(-w / m.depump_tau) * cdf_sum(1, m.bright_rate * w + bg) + sb * h / 3.0;
  const double ok_dark = std::exp(-w / m.repump_tau) * cdf_sum(1, bg) + sd * h / 3.0;
  return {err_bright, 1.0 - ok_dark};
}

DetectionModel no_leaks(double rate, double background) {
  DetectionModel m = DetectionModel::ideal(rate);
  m.background_rate = background;
  return m;
}

}  // namespace

TEST_SUITE("detection") {
  TEST_CASE("photon count examples") {
    const auto silent = no_leaks(0.0, 0.0);
    for (std::uint64_t i = 0; i < 1000; ++i) {
      CHECK(sample_photon_count(QubitState::bright, silent, 1e-3, 1, 2, i) == 0);
      CHECK(sample_photon_count(QubitState::dark, silent, 1e-3, 1, 2, i) == 0);
    }

    const int n = 100000;
    const auto background = no_leaks(10e3, 200.0);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_photon_count(QubitState::dark, background, 1e-3, 3, 4, std::uint64_t(i));
    CHECK(std::abs(sum / n - 0.2) < 3.0 * std::sqrt(0.2 / n));

    const auto bright = no_leaks(8e3, 0.0);
    sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_photon_count(QubitState::bright, bright, 0.5e-3, 5, 6, std::uint64_t(i));
    CHECK(std::abs(sum / n - 4.0) < 3.0 * std::sqrt(4.0 / n));
  }

  TEST_CASE("classification at threshold 1.5") {
    CHECK(classify(0, 1.5) == QubitState::dark);
    CHECK(classify(1, 1.5) == QubitState::dark);
    CHECK(classify(2, 1.5) == QubitState::bright);
    CHECK_THROWS_AS(classify(2, 2.0), TieError);
  }

  TEST_CASE("ideal detector is nearly perfect") {
    const std::vector<double> w{1e-4, 2e-4};
    for (const auto& p : fidelity_curve(DetectionModel::ideal(1e5), w, 20000, 1).points) {
      CHECK(p.avg_fidelity > 0.999);
    }
  }

  TEST_CASE("calibrated defaults at 1 ms") {
    const std::vector<double> w{1e-3};
    const auto p = fidelity_curve(DetectionModel::calibrated(), w, 100000, 1).points[0];
    CHECK(std::abs(p.avg_fidelity - 0.988) <= 0.004);
  }

  TEST_CASE("dark error at short windows matches the Poisson tail") {
    const auto m = no_leaks(10e3, 2000.0);
    const std::vector<double> w{0.1e-3, 0.3e-3, 0.6e-3};
    const int shots = 100000;
    const auto curve = fidelity_curve(m, w, shots, 2);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double p = 1.0 - cdf_sum(1, 2000.0 * w[i]);
      CHECK(std::abs(curve.points[i].err_dark - p) <= 3.0 * std::sqrt(p * (1.0 - p) / shots));
    }
  }

  TEST_CASE("poisson cdf") {
    for (double mean : {0.0, 0.2, 1.0, 7.5, 30.0}) {
      for (int k : {0, 1, 2, 5, 20}) CHECK(poisson_cdf(k, mean) == testing::approx(cdf_sum(k, mean)).epsilon(1e-12));
    }
    CHECK(poisson_cdf(-1, 2.0) == 0.0);
  }

  TEST_CASE("analytic model without leaks is the closed form") {
    const auto m = no_leaks(10e3, 300.0);
    for (double w : {0.1e-3, 1e-3, 3e-3}) {
      const auto e = analytic_error_model(m, w);
      CHECK(e.err_bright == testing::approx(cdf_sum(1, (10e3 + 300.0) * w)).epsilon(1e-12));
      CHECK(e.err_dark == testing::approx(1.0 - cdf_sum(1, 300.0 * w)).epsilon(1e-12));
    }
  }

  TEST_CASE("analytic model equals Simpson integration over the leak time") {
    DetectionModel m = DetectionModel::calibrated();
    m.repump_tau = 5e-3;
    for (double w : {0.2e-3, 1e-3, 2.5e-3}) {
      const auto e = analytic_error_model(m, w);
      const auto [eb, ed] = simpson_errors(m, w);
      CHECK(e.err_bright == testing::approx(eb).epsilon(1e-8));
      CHECK(e.err_dark == testing::approx(ed).epsilon(1e-8));
    }
  }

  TEST_CASE("bright-state leak limit") {
    // No background, fast counting: the state is misread only if it leaks
    // before two photons arrive, P = 2 / (rate tau).
    DetectionModel m = no_leaks(1e7, 0.0);
    m.depump_tau = 1e-3;
    const auto e = analytic_error_model(m, 1e-3);
    CHECK(e.err_dark == 0.0);
    CHECK(e.err_bright == testing::approx(2.0 / (1e7 * 1e-3)).epsilon(1e-3));
  }

  TEST_CASE("error monotonicity in the window") {
    const auto windows = testing::linspace(0.05e-3, 3e-3, 60);
    const auto m = no_leaks(10e3, 50.0);
    double prev_b = 2.0;
    for (double w : windows) {
      const auto e = analytic_error_model(m, w);
      CHECK(e.err_bright <= prev_b);
      prev_b = e.err_bright;
    }
    // Background only: dark error grows with the window.
    double prev_d = -1.0;
    for (double w : windows) {
      const auto e = analytic_error_model(m, w);
      CHECK(e.err_dark >= prev_d);
      prev_d = e.err_dark;
    }

    // Calibrated model: the average error falls to one interior minimum and
    // rises after it.
    const auto cal = DetectionModel::calibrated();
    std::vector<double> avg;
    for (double w : windows) {
      const auto e = analytic_error_model(cal, w);
      avg.push_back(0.5 * (e.err_bright + e.err_dark));
    }
    int turns = 0;
    for (std::size_t i = 1; i + 1 < avg.size(); ++i) turns += (avg[i] < avg[i - 1]) != (avg[i + 1] < avg[i]);
    CHECK(turns == 1);
  }

  TEST_CASE("optimal window matches a dense scan") {
    const auto cal = DetectionModel::calibrated();
    const double w_opt = optimal_window(cal, 0.1e-3, 3e-3);
    double best_w = 0.0;
    double best = 1.0;
    for (double w = 0.1e-3; w <= 3e-3; w += 1e-6) {
      const auto e = analytic_error_model(cal, w);
      if (e.err_bright + e.err_dark < best) {
        best = e.err_bright + e.err_dark;
        best_w = w;
      }
    }
    CHECK(w_opt == testing::approx(best_w).epsilon(5e-3));
  }

  TEST_CASE("depump calibration round trip") {
    const double tau = calibrate_depump_tau(DetectionModel::calibrated(), 1e-3, 0.988);
    CHECK(tau == testing::approx(DetectionModel::calibrated().depump_tau).epsilon(1e-4));
    DetectionModel m = DetectionModel::calibrated();
    m.depump_tau = tau;
    CHECK(analytic_error_model(m, 1e-3).average_fidelity() == testing::approx(0.988).epsilon(1e-10));
    CHECK_THROWS_AS(calibrate_depump_tau(no_leaks(10.0, 1e4), 1e-3, 0.999), ConvergenceError);
  }

  TEST_CASE("1.5 photons is the best half-integer threshold") {
    const std::vector<double> thresholds{0.5, 1.5, 2.5, 3.5, 4.5, 5.5};
    const auto scores = threshold_scan(DetectionModel::calibrated(), 1e-3, thresholds);
    for (const auto& s : scores) {
      if (s.threshold != 1.5) CHECK(s.average_error > scores[1].average_error);
    }
  }

  TEST_CASE("Monte Carlo agrees with the analytic model on a window grid") {
    const auto cal = DetectionModel::calibrated();
    const auto windows = testing::linspace(0.2e-3, 2e-3, 10);
    const int shots = 100000;
    const auto curve = fidelity_curve(cal, windows, shots, 17);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto e = analytic_error_model(cal, windows[i]);
      const double sb = std::sqrt(e.err_bright * (1.0 - e.err_bright) / shots);
      const double sd = std::sqrt(e.err_dark * (1.0 - e.err_dark) / shots);
      CHECK(std::abs(curve.points[i].err_bright - e.err_bright) <= 3.0 * sb);
      CHECK(std::abs(curve.points[i].err_dark - e.err_dark) <= 3.0 * std::max(sd, 1.0 / shots));
    }
  }

  TEST_CASE("fidelity curve does not depend on the worker count") {
    const auto windows = testing::linspace(0.2e-3, 2e-3, 4);
    const auto a = fidelity_curve(DetectionModel::calibrated(), windows, 5000, 9, 1);
    const auto b = fidelity_curve(DetectionModel::calibrated(), windows, 5000, 9, 4);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      CHECK(a.points[i].err_bright == b.points[i].err_bright);
      CHECK(a.points[i].err_dark == b.points[i].err_dark);
    }
  }

  TEST_CASE("invalid models are rejected") {
    DetectionModel m = DetectionModel::calibrated();
    m.threshold = 2.0;
    const std::vector<double> w{1e-3};
    CHECK_THROWS_AS(fidelity_curve(m, w, 10, 1), InvalidArgument);
    m = DetectionModel::calibrated();
    m.depump_tau = 0.0;
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
  }
}

#include "iontrap/spin_motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/laguerre.hpp>

#include "iontrap/errors.hpp"

namespace iontrap {

namespace {

constexpr double kThermalLeakageLimit = 1e-6;

using cd = std::complex<double>;

}  // namespace

// ---------------------------------------------------------------------------
// MotionalDistribution

MotionalDistribution::MotionalDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw InvalidArgument("motional distribution needs n_max >= 1");
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("motional probabilities must be finite and >= 0");
  }
  const double t = total();
  if (t < 1.0 - 1e-9 || t > 1.0 + 1e-12) {
    throw InvalidArgument("motional probabilities must sum to 1 (got " + std::to_string(t) + ")");
  }
}

MotionalDistribution MotionalDistribution::fock(int n, int n_max) {
  if (n < 0 || n > n_max) throw InvalidArgument("Fock index outside 0..n_max");
  std::vector<double> p(static_cast<std::size_t>(std::max(n_max, 1)) + 1, 0.0);
  p[static_cast<std::size_t>(n)] = 1.0;
  return MotionalDistribution(std::move(p));
}

double MotionalDistribution::mean() const noexcept {
  double m = 0.0;
  for (std::size_t n = 0; n < probs_.size(); ++n) m += static_cast<double>(n) * probs_[n];
  return m;
}

double MotionalDistribution::total() const noexcept {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

MotionalDistribution MotionalDistribution::resized(int n_max) const {
  if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
  std::vector<double> p(probs_);
  if (static_cast<std::size_t>(n_max) + 1 < p.size()) {
    const double tail = std::accumulate(p.begin() + n_max + 1, p.end(), 0.0);
    if (tail > 1e-15) throw TruncationError("resize would drop probability mass " + std::to_string(tail));
  }
  p.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
  return MotionalDistribution(std::move(p));
}

double thermal_leakage(double nbar, int n_max) {
  if (nbar <= 0.0) return 0.0;
  return std::pow(nbar / (nbar + 1.0), n_max + 1);
}

MotionalDistribution thermal_distribution(double nbar, int n_max) {
  if (!(nbar >= 0.0)) throw InvalidArgument("thermal_distribution: nbar must be >= 0");
  if (n_max < 1) throw InvalidArgument("thermal_distribution: n_max must be >= 1");
  const double leak = thermal_leakage(nbar, n_max);
  if (leak >= kThermalLeakageLimit) {
    throw TruncationError("thermal state with nbar=" + std::to_string(nbar) + " leaks " +
                          std::to_string(leak) + " above n_max=" + std::to_string(n_max) +
                          "; raise n_max");
  }
  std::vector<double> p(static_cast<std::size_t>(n_max) + 1, 0.0);
  const double ratio = nbar / (nbar + 1.0);
  double term = 1.0 / (nbar + 1.0);
  for (auto& v : p) {
    v = term;
    term *= ratio;
  }
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= sum;
  return MotionalDistribution(std::move(p));
}

MotionalDistribution thermal_distribution_auto(double nbar, int n_max_hint, double leakage_bound) {
  int n_max = std::max(n_max_hint, 1);
  while (thermal_leakage(nbar, n_max) >= std::min(leakage_bound, kThermalLeakageLimit)) {
    if (n_max > (1 << 22)) throw TruncationError("thermal_distribution_auto: nbar too large");
    n_max *= 2;
  }
  return thermal_distribution(nbar, n_max);
}

// ---------------------------------------------------------------------------
// Pulses

void PulseSpec::validate() const {
  if (!(omega0 > 0.0)) throw InvalidArgument("pulse: omega0 must be > 0");
  if (!(eta >= 0.0 && eta < 1.0)) throw InvalidArgument("pulse: eta must lie in [0, 1)");
  if (!(duration >= 0.0)) throw InvalidArgument("pulse: duration must be >= 0");
  if (!std::isfinite(phase) || !std::isfinite(detuning)) throw InvalidArgument("pulse: phase/detuning must be finite");
}

int branch_shift(Branch b) noexcept {
  switch (b) {
    case Branch::carrier: return 0;
    case Branch::red_sideband: return -1;
    case Branch::blue_sideband: return 1;
  }
  return 0;
}

namespace {

// |<n_hi| exp(i eta (a + a^dag)) |n_lo>| for n_hi = n_lo + shift.
double debye_waller_element(double eta, int n_lo, int shift) {
  const double x = eta * eta;
  double ratio = 1.0;  // sqrt(n_lo! / n_hi!)
  for (int k = n_lo + 1; k <= n_lo + shift; ++k) ratio /= std::sqrt(static_cast<double>(k));
  const double lag = boost::math::laguerre(static_cast<unsigned>(n_lo), static_cast<unsigned>(shift), x);
  return std::exp(-x / 2.0) * std::pow(eta, shift) * ratio * std::abs(lag);
}

}  // namespace

double rabi_frequency(const PulseSpec& pulse, int n) {
  if (n < 0) throw InvalidArgument("rabi_frequency: n must be >= 0");
  const double dn = static_cast<double>(n);
  if (!pulse.full_lamb_dicke) {
    switch (pulse.branch) {
      case Branch::carrier: return pulse.omega0;
      case Branch::red_sideband: return pulse.eta * std::sqrt(dn) * pulse.omega0;
      case Branch::blue_sideband: return pulse.eta * std::sqrt(dn + 1.0) * pulse.omega0;
    }
  }
  switch (pulse.branch) {
    case Branch::carrier: return pulse.omega0 * debye_waller_element(pulse.eta, n, 0);
    case Branch::red_sideband:
      return n == 0 ? 0.0 : pulse.omega0 * debye_waller_element(pulse.eta, n - 1, 1);
    case Branch::blue_sideband: return pulse.omega0 * debye_waller_element(pulse.eta, n, 1);
  }
  return 0.0;
}

std::vector<double> flop_curve(const MotionalDistribution& dist, const PulseSpec& pulse,
                               std::span<const double> times) {
  PulseSpec p = pulse;
  p.duration = 0.0;
  p.validate();
  const auto probs = dist.probs();
  const int n_max = dist.n_max();

  std::vector<double> omega(probs.size());
  for (int n = 0; n <= n_max; ++n) omega[static_cast<std::size_t>(n)] = rabi_frequency(pulse, n);

  std::vector<double> out;
  out.reserve(times.size());
  const double d2 = pulse.detuning * pulse.detuning;
  for (double t : times) {
    double sum = 0.0;
    for (std::size_t n = 0; n < probs.size(); ++n) {
      if (probs[n] == 0.0 || omega[n] == 0.0) continue;
      const double w2 = omega[n] * omega[n] + d2;
      const double w = std::sqrt(w2);
      const double s = std::sin(w * t / 2.0);
      sum += probs[n] * (omega[n] * omega[n] / w2) * s * s;
    }
    out.push_back(std::clamp(sum, 0.0, 1.0));
  }
  return out;
}

TwoLevelBlock rotate(const TwoLevelBlock& b, double omega, double detuning, double phase,
                     double duration) {
  const double w = std::hypot(omega, detuning);
  if (w == 0.0 || duration == 0.0) return b;
  const double c = std::cos(w * duration / 2.0);
  const double s = std::sin(w * duration / 2.0);
  const cd i(0.0, 1.0);
  const cd u00 = c + i * (detuning / w) * s;
  const cd u11 = c - i * (detuning / w) * s;
  const cd u01 = -i * (omega / w) * std::polar(1.0, -phase) * s;
  const cd u10 = -i * (omega / w) * std::polar(1.0, phase) * s;

  // rho' = U rho U^dag
  const cd r00 = b.lower;
  const cd r01 = b.coherence;
  const cd r10 = std::conj(b.coherence);
  const cd r11 = b.upper;
  const cd m00 = u00 * r00 + u01 * r10;
  const cd m01 = u00 * r01 + u01 * r11;
  const cd m10 = u10 * r00 + u11 * r10;
  const cd m11 = u10 * r01 + u11 * r11;

  TwoLevelBlock out;
  out.lower = (m00 * std::conj(u00) + m01 * std::conj(u01)).real();
  out.upper = (m10 * std::conj(u10) + m11 * std::conj(u11)).real();
  out.coherence = m00 * std::conj(u10) + m01 * std::conj(u11);
  return out;
}

// ---------------------------------------------------------------------------
// SpinMotionState

SpinMotionState SpinMotionState::dark(const MotionalDistribution& dist) {
  SpinMotionState s;
  s.dark_.assign(dist.probs().begin(), dist.probs().end());
  s.bright_.assign(s.dark_.size(), 0.0);
  s.coherence_.assign(s.dark_.size(), cd{});
  return s;
}

SpinMotionState SpinMotionState::from_populations(std::vector<double> dark, std::vector<double> bright,
                                                  double leakage) {
  if (dark.size() != bright.size() || dark.size() < 2) {
    throw InvalidArgument("from_populations: dark/bright size mismatch or n_max < 1");
  }
  SpinMotionState s;
  s.dark_ = std::move(dark);
  s.bright_ = std::move(bright);
  s.coherence_.assign(s.dark_.size(), cd{});
  s.leakage_ = leakage;
  return s;
}

double SpinMotionState::bright_probability() const noexcept {
  return std::accumulate(bright_.begin(), bright_.end(), 0.0);
}

double SpinMotionState::total_probability() const noexcept {
  return std::accumulate(dark_.begin(), dark_.end(), 0.0) + bright_probability();
}

bool SpinMotionState::has_coherence(double tol) const noexcept {
  return std::any_of(coherence_.begin(), coherence_.end(), [tol](const cd& c) { return std::abs(c) > tol; });
}

MotionalDistribution SpinMotionState::motional() const {
  std::vector<double> p(dark_.size());
  for (std::size_t n = 0; n < p.size(); ++n) p[n] = std::max(0.0, dark_[n] + bright_[n]);
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  // Rounding only; genuine loss is impossible because transfers are conservative.
  if (sum > 0.0 && std::abs(sum - 1.0) < 1e-9) {
    for (auto& v : p) v /= sum;
  }
  return MotionalDistribution(std::move(p));
}

SpinMotionState SpinMotionState::pumped(double infidelity) const {
  if (!(infidelity >= 0.0 && infidelity <= 1.0)) throw InvalidArgument("pump infidelity must lie in [0, 1]");
  SpinMotionState s = *this;
  for (std::size_t n = 0; n < s.dark_.size(); ++n) {
    const double moved = s.bright_[n] * (1.0 - infidelity);
    s.dark_[n] += moved;
    s.bright_[n] -= moved;
    s.coherence_[n] = cd{};
  }
  return s;
}

SpinMotionState SpinMotionState::resized(int n_max) const {
  if (n_max < this->n_max()) throw InvalidArgument("SpinMotionState::resized only grows");
  SpinMotionState s = *this;
  const auto size = static_cast<std::size_t>(n_max) + 1;
  s.dark_.resize(size, 0.0);
  s.bright_.resize(size, 0.0);
  s.coherence_.resize(size, cd{});
  return s;
}

SpinMotionState apply_pulse(const SpinMotionState& state, const PulseSpec& pulse) {
  pulse.validate();
  if (pulse.branch != state.pairing_ && state.has_coherence()) {
    throw std::logic_error(
        "apply_pulse: state carries coherence of a different branch; pump before changing branch");
  }
  SpinMotionState out = state;
  if (pulse.branch != state.pairing_) {
    std::fill(out.coherence_.begin(), out.coherence_.end(), cd{});
    out.pairing_ = pulse.branch;
  }
  const int shift = branch_shift(pulse.branch);
  const int n_max = out.n_max();

  for (int n = 0; n <= n_max; ++n) {
    const int m = n + shift;  // Fock index of the bright partner
    const auto un = static_cast<std::size_t>(n);
    if (m < 0) continue;  // red sideband from n = 0 is uncoupled
    const double omega = rabi_frequency(pulse, n);
    if (m > n_max) {
      // Blue sideband out of the top level: transfer is clamped into (n_max, bright).
      const TwoLevelBlock rotated =
          rotate({out.dark_[un], 0.0, cd{}}, omega, pulse.detuning, pulse.phase, pulse.duration);
      const double moved = out.dark_[un] - rotated.lower;
      out.dark_[un] -= moved;
      out.bright_[un] += moved;
      out.coherence_[un] = cd{};
      out.leakage_ += moved;
      continue;
    }
    const auto um = static_cast<std::size_t>(m);
    const TwoLevelBlock rotated = rotate({out.dark_[un], out.bright_[um], out.coherence_[un]}, omega,
                                         pulse.detuning, pulse.phase, pulse.duration);
    out.dark_[un] = std::max(0.0, rotated.lower);
    out.bright_[um] = std::max(0.0, rotated.upper);
    out.coherence_[un] = rotated.coherence;
  }
  return out;
}

}  // namespace iontrap

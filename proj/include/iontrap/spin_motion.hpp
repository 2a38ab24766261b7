#pragma once

#include <complex>
#include <span>
#include <vector>

namespace iontrap {

/// Probability distribution over Fock states n = 0..n_max of one motional mode.
///
/// Construction validates the invariants: every entry is non-negative and the
/// total lies in [1 - 1e-9, 1 + 1e-12]. The distribution is a value type.
class MotionalDistribution {
 public:
  explicit MotionalDistribution(std::vector<double> probs);

  static MotionalDistribution fock(int n, int n_max);
  static MotionalDistribution ground(int n_max) { return fock(0, n_max); }

  [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
  [[nodiscard]] int n_max() const noexcept { return static_cast<int>(probs_.size()) - 1; }
  [[nodiscard]] double operator[](int n) const { return probs_.at(static_cast<std::size_t>(n)); }
  [[nodiscard]] double mean() const noexcept;
  [[nodiscard]] double total() const noexcept;

  /// Copy zero-padded (or, if the dropped tail is below 1e-15, trimmed) to a new n_max.
  [[nodiscard]] MotionalDistribution resized(int n_max) const;

 private:
  std::vector<double> probs_;
};

/// Probability mass a thermal state of mean nbar puts above n_max.
double thermal_leakage(double nbar, int n_max);

/// Thermal occupation p_n = nbar^n / (nbar+1)^(n+1), renormalized on 0..n_max.
/// Throws TruncationError when thermal_leakage(nbar, n_max) >= 1e-6.
MotionalDistribution thermal_distribution(double nbar, int n_max);

/// Thermal state with n_max starting at `n_max_hint` and doubling until the
/// truncation leakage drops below `leakage_bound`.
MotionalDistribution thermal_distribution_auto(double nbar, int n_max_hint = 256,
                                               double leakage_bound = 1e-9);

/// Transition driven by a pulse.
enum class Branch { carrier, red_sideband, blue_sideband };

/// One coherent drive segment.
struct PulseSpec {
  Branch branch = Branch::carrier;
  double omega0 = 0.0;    // base Rabi angular frequency, rad/s
  double eta = 0.1;       // Lamb-Dicke parameter
  double duration = 0.0;  // s
  double phase = 0.0;     // rad
  double detuning = 0.0;  // rad/s
  /// Use the full Debye-Waller / Laguerre matrix elements instead of the
  /// first-order sqrt(n) scaling.
  bool full_lamb_dicke = false;

  /// Throws InvalidArgument unless omega0 > 0, 0 <= eta < 1, duration >= 0.
  void validate() const;
};

/// Fock index change of a branch: 0, -1, +1.
int branch_shift(Branch b) noexcept;

/// Rabi frequency of the transition out of (n, dark) for the given branch.
/// Red sideband couples (n, dark) <-> (n-1, bright) and returns 0 for n = 0;
/// blue couples (n, dark) <-> (n+1, bright).
double rabi_frequency(const PulseSpec& pulse, int n);

/// Bright-state probability after a pulse of length t applied to (n, dark) for
/// every n, averaged over `dist`:
///   P(t) = sum_n p_n (Omega_n^2 / W_n^2) sin^2(W_n t / 2),  W_n^2 = Omega_n^2 + detuning^2.
/// `pulse.duration` is ignored.
std::vector<double> flop_curve(const MotionalDistribution& dist, const PulseSpec& pulse,
                               std::span<const double> times);

/// Applies the two-level propagator for (Omega, detuning, phase, t) to the
/// 2x2 density block [[a, c], [conj(c), b]] written in the (lower, upper) basis.
struct TwoLevelBlock {
  double lower = 0.0;
  double upper = 0.0;
  std::complex<double> coherence{0.0, 0.0};  // rho(lower, upper)
};
TwoLevelBlock rotate(const TwoLevelBlock& block, double omega, double detuning, double phase,
                     double duration);

/// Joint spin-motion state as an incoherent mixture over Fock index with
/// coherent two-level dynamics inside each coupled pair.
///
/// Populations are stored for (n, dark) and (n, bright). Coherences are stored
/// for the pairs of the current `pairing` branch, keyed by the dark Fock index:
/// carrier pairs (n,d)-(n,b), red pairs (n,d)-(n-1,b), blue pairs (n,d)-(n+1,b).
/// Switching to a different branch is only allowed when every coherence is
/// zero, which holds for all pulse sequences this library builds (a single
/// sideband pulse between optical pumps, or carrier-only sequences).
class SpinMotionState {
 public:
  /// Every Fock level in |0> (dark), motional populations from `dist`.
  static SpinMotionState dark(const MotionalDistribution& dist);

  /// Spin-diagonal state from per-Fock populations (no coherences).
  static SpinMotionState from_populations(std::vector<double> dark, std::vector<double> bright,
                                          double leakage = 0.0);

  [[nodiscard]] int n_max() const noexcept { return static_cast<int>(dark_.size()) - 1; }
  [[nodiscard]] std::span<const double> dark_populations() const noexcept { return dark_; }
  [[nodiscard]] std::span<const double> bright_populations() const noexcept { return bright_; }
  [[nodiscard]] std::span<const std::complex<double>> coherences() const noexcept { return coherence_; }
  [[nodiscard]] Branch pairing() const noexcept { return pairing_; }

  [[nodiscard]] double bright_probability() const noexcept;
  [[nodiscard]] double total_probability() const noexcept;
  /// Population moved into the clamped top level by blue-sideband overflow.
  [[nodiscard]] double leakage() const noexcept { return leakage_; }
  [[nodiscard]] bool has_coherence(double tol = 1e-15) const noexcept;

  /// Marginal over spin.
  [[nodiscard]] MotionalDistribution motional() const;

  /// Optical pumping: bright population returns to dark at the same Fock index
  /// with probability 1 - infidelity. Coherences are destroyed.
  [[nodiscard]] SpinMotionState pumped(double infidelity = 0.0) const;

  /// Zero-padded copy with a larger truncation.
  [[nodiscard]] SpinMotionState resized(int n_max) const;

 private:
  friend SpinMotionState apply_pulse(const SpinMotionState&, const PulseSpec&);
  std::vector<double> dark_;
  std::vector<double> bright_;
  std::vector<std::complex<double>> coherence_;
  Branch pairing_ = Branch::carrier;
  double leakage_ = 0.0;
};

/// Applies one pulse. Throws std::logic_error if the pulse branch differs from
/// the state's pairing while coherences are present. Blue-sideband transfer out
/// of n_max is clamped into (n_max, bright) and counted in leakage().
SpinMotionState apply_pulse(const SpinMotionState& state, const PulseSpec& pulse);

}  // namespace iontrap

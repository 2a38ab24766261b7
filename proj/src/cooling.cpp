#include "iontrap/cooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

void CoolingSchedule::validate() const {
  if (iterations < 0) throw InvalidArgument("cooling schedule: iterations must be >= 0");
  if (!(pump_reset_infidelity >= 0.0 && pump_reset_infidelity <= 1.0)) {
    throw InvalidArgument("cooling schedule: pump_reset_infidelity must lie in [0, 1]");
  }
  if (!(pump_duration >= 0.0)) throw InvalidArgument("cooling schedule: pump_duration must be >= 0");
  if (rule == DurationRule::fixed && !(fixed_duration >= 0.0)) {
    throw InvalidArgument("cooling schedule: fixed_duration must be >= 0");
  }
  if (cycle_heating && !(cycle_heating->rate >= 0.0)) {
    throw InvalidArgument("cooling schedule: heating rate must be >= 0");
  }
  for (const auto& m : modes) {
    if (!(m.omega0 > 0.0)) throw InvalidArgument("cooling schedule: mode '" + m.name + "' needs omega0 > 0");
    if (!(m.eta > 0.0 && m.eta < 1.0)) throw InvalidArgument("cooling schedule: mode '" + m.name + "' needs 0 < eta < 1");
  }
}

MotionalDistribution doppler_cool(double nbar_doppler) {
  if (!(nbar_doppler >= 0.0)) throw InvalidArgument("doppler_cool: nbar must be >= 0");
  return thermal_distribution_auto(nbar_doppler);
}

namespace {

PulseSpec red_pulse(const ModeDescriptor& mode, double duration) {
  PulseSpec p;
  p.branch = Branch::red_sideband;
  p.omega0 = mode.omega0;
  p.eta = mode.eta;
  p.duration = duration;
  return p;
}

// Birth-death generator applied to v (no normalization assumed). The upward
// rate out of the last level is dropped; that flux is what leakage measures.
void apply_generator(std::span<const double> v, std::span<double> out) {
  const std::size_t size = v.size();
  const std::size_t top = size - 1;
  for (std::size_t n = 0; n < size; ++n) {
    const double dn = static_cast<double>(n);
    const double up = n < top ? dn + 1.0 : 0.0;
    double d = -(up + dn) * v[n];
    if (n > 0) d += dn * v[n - 1];              // from n-1 at rate n
    if (n < top) d += (dn + 1.0) * v[n + 1];    // from n+1 at rate n+1
    out[n] = d;
  }
}

// exp(x G) v by uniformization, x = rate * duration.
std::vector<double> propagate_birth_death(std::vector<double> v, double x) {
  if (x <= 0.0) return v;
  const std::size_t size = v.size();
  const double lambda = 2.0 * static_cast<double>(size - 1) + 1.0;  // max exit rate per unit x
  // Split so the Poisson weights never underflow.
  const int chunks = std::max(1, static_cast<int>(std::ceil(lambda * x / 400.0)));
  const double lx = lambda * x / chunks;

  std::vector<double> term(size), next(size), acc(size), gen(size);
  for (int c = 0; c < chunks; ++c) {
    term = v;
    double weight = std::exp(-lx);
    for (std::size_t n = 0; n < size; ++n) acc[n] = weight * term[n];
    double cumulative = weight;
    for (int k = 1; cumulative < 1.0 - 1e-16 && k < 100000; ++k) {
      apply_generator(term, gen);
      for (std::size_t n = 0; n < size; ++n) next[n] = term[n] + gen[n] / lambda;
      std::swap(term, next);
      weight *= lx / k;
      cumulative += weight;
      for (std::size_t n = 0; n < size; ++n) acc[n] += weight * term[n];
      if (k > lx && weight < 1e-18) break;
    }
    for (std::size_t n = 0; n < size; ++n) v[n] = std::max(0.0, acc[n]);
  }
  return v;
}

int heating_n_max(const MotionalDistribution& dist, double added_quanta) {
  const double final_nbar = dist.mean() + added_quanta;
  int n_max = dist.n_max();
  // Occupied support of the input, then room for a thermal tail on top of it.
  int support = 0;
  for (int n = dist.n_max(); n >= 0; --n) {
    if (dist[n] > 1e-300) {
      support = n;
      break;
    }
  }
  while (thermal_leakage(final_nbar, n_max - support) >= 1e-12 && n_max < (1 << 20)) {
    n_max = std::max(2 * n_max, 16);
  }
  return n_max;
}

SpinMotionState heat_state(const SpinMotionState& state, double duration, const HeatingProcess& process) {
  if (process.rate == 0.0 || duration == 0.0) return state;
  const MotionalDistribution marginal = state.motional();
  const double x = process.rate * duration;
  if (process.model == HeatingModel::nbar_increment) {
    if (state.bright_probability() > 0.0) {
      throw InvalidArgument("nbar_increment heating needs a state with the spin in |0>");
    }
    const auto th = thermal_distribution_auto(marginal.mean() + x, state.n_max());
    std::vector<double> dark(th.probs().begin(), th.probs().end());
    return SpinMotionState::from_populations(std::move(dark), std::vector<double>(dark.size(), 0.0),
                                             state.leakage());
  }
  const int n_max = heating_n_max(marginal, x);
  const SpinMotionState grown = state.resized(n_max);
  std::vector<double> dark(grown.dark_populations().begin(), grown.dark_populations().end());
  std::vector<double> bright(grown.bright_populations().begin(), grown.bright_populations().end());
  dark = propagate_birth_death(std::move(dark), x);
  if (grown.bright_probability() > 0.0) bright = propagate_birth_death(std::move(bright), x);
  return SpinMotionState::from_populations(std::move(dark), std::move(bright), state.leakage());
}

}  // namespace

double cooling_pulse_duration(const ModeDescriptor& mode, const CoolingSchedule& schedule, double nbar) {
  const double omega1 = rabi_frequency(red_pulse(mode, 0.0), 1);
  switch (schedule.rule) {
    case DurationRule::pi_at_n1: return constants::pi / omega1;
    case DurationRule::pi_at_nbar: return constants::pi / (omega1 * std::sqrt(std::max(nbar, 1.0)));
    case DurationRule::fixed: return schedule.fixed_duration;
  }
  return 0.0;
}

SpinMotionState sideband_cool_step(const SpinMotionState& state, const ModeDescriptor& mode,
                                   const CoolingSchedule& schedule) {
  const double nbar = state.motional().mean();
  const double duration = cooling_pulse_duration(mode, schedule, nbar);
  const SpinMotionState driven = apply_pulse(state, red_pulse(mode, duration));
  return driven.pumped(schedule.pump_reset_infidelity);
}

std::vector<MotionalDistribution> sideband_cool(std::vector<MotionalDistribution> dists,
                                                const CoolingSchedule& schedule) {
  schedule.validate();
  if (schedule.modes.empty()) throw InvalidArgument("sideband_cool: schedule has no modes");
  if (dists.size() != schedule.modes.size()) {
    throw InvalidArgument("sideband_cool: need one distribution per mode");
  }
  if (schedule.iterations == 0) return dists;

  std::vector<SpinMotionState> states;
  states.reserve(dists.size());
  for (const auto& d : dists) states.push_back(SpinMotionState::dark(d));

  const std::size_t modes = schedule.modes.size();
  const std::size_t steps = static_cast<std::size_t>(schedule.iterations) *
                            (schedule.iterations_per_mode ? modes : std::size_t{1});
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t m = step % modes;
    const double nbar = states[m].motional().mean();
    const double duration = cooling_pulse_duration(schedule.modes[m], schedule, nbar);
    states[m] = sideband_cool_step(states[m], schedule.modes[m], schedule);
    if (schedule.cycle_heating) {
      const double cycle = duration + schedule.pump_duration;
      for (auto& s : states) s = heat_state(s, cycle, *schedule.cycle_heating);
    }
  }

  std::vector<MotionalDistribution> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.motional());
  return out;
}

MotionalDistribution sideband_cool(const MotionalDistribution& dist, const CoolingSchedule& schedule) {
  if (schedule.modes.size() != 1) throw InvalidArgument("sideband_cool: single-mode overload needs one mode");
  return sideband_cool(std::vector<MotionalDistribution>{dist}, schedule).front();
}

HeatingResult heat_with_leakage(const MotionalDistribution& dist, double duration,
                                const HeatingProcess& process) {
  if (!(duration >= 0.0)) throw InvalidArgument("heat: duration must be >= 0");
  if (!(process.rate >= 0.0)) throw InvalidArgument("heat: rate must be >= 0");
  if (duration == 0.0 || process.rate == 0.0) return {dist, 0.0};
  const double x = process.rate * duration;

  if (process.model == HeatingModel::nbar_increment) {
    return {thermal_distribution_auto(dist.mean() + x, dist.n_max()), 0.0};
  }
  const int n_max = heating_n_max(dist, x);
  std::vector<double> p(dist.probs().begin(), dist.probs().end());
  p.resize(static_cast<std::size_t>(n_max) + 1, 0.0);
  const double top_before = p.back();
  p = propagate_birth_death(std::move(p), x);
  // Upper bound on the flux the truncated generator dropped at the top level.
  const double leakage = x * (n_max + 1.0) * std::max(top_before, p.back());
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= sum;
  return {MotionalDistribution(std::move(p)), leakage};
}

MotionalDistribution heat(const MotionalDistribution& dist, double duration, const HeatingProcess& process) {
  return heat_with_leakage(dist, duration, process).dist;
}

}  // namespace iontrap

#include "iontrap/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "iontrap/coherence.hpp"
#include "iontrap/constants.hpp"
#include "iontrap/cooling.hpp"
#include "iontrap/detection.hpp"
#include "iontrap/frequency_comb.hpp"
#include "iontrap/heating_analysis.hpp"
#include "iontrap/micromotion.hpp"
#include "iontrap/parallel.hpp"
#include "iontrap/rng.hpp"
#include "iontrap/spin_motion.hpp"
#include "iontrap/trap_model.hpp"

#ifndef IONTRAP_VERSION
#define IONTRAP_VERSION "0.0.0"
#endif

namespace iontrap {

namespace {

using json = nlohmann::json;
using constants::two_pi;

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

double hz(double omega) { return omega / two_pi; }

int as_int(std::int64_t v, const char* key) {
  if (v > 100'000'000) throw InvalidArgument(fmt::format("{} is too large", key));
  return static_cast<int>(v);
}

Branch branch_from(const std::string& s) {
  if (s == "red") return Branch::red_sideband;
  if (s == "blue") return Branch::blue_sideband;
  return Branch::carrier;
}

const char* branch_label(Branch b) {
  switch (b) {
    case Branch::carrier: return "carrier";
    case Branch::red_sideband: return "red";
    case Branch::blue_sideband: return "blue";
  }
  return "?";
}

// Binomial readout of a probability curve, one generator per point.
void sample_curve(std::span<const double> p, int shots, std::uint64_t seed, std::uint64_t stream,
                  std::vector<double>& mean, std::vector<double>& se) {
  mean.assign(p.size(), 0.0);
  se.assign(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (shots == 0) {
      mean[i] = p[i];
      continue;
    }
    CounterRng rng(seed, stream, i);
    std::binomial_distribution<int> draw(shots, std::clamp(p[i], 0.0, 1.0));
    const int k = draw(rng);
    mean[i] = static_cast<double>(k) / shots;
    const double q = (k + 0.5) / (shots + 1.0);
    se[i] = std::sqrt(q * (1.0 - q) / shots);
  }
}

DephasingModel dephasing_from(const ExperimentConfig& c, const std::string& preset) {
  DephasingModel m;
  if (preset == "microwave") m = DephasingModel::microwave();
  else if (preset == "raman") m = DephasingModel::raman();
  else if (preset == "none") m = DephasingModel{0.0, 0.0, 1.0, 0.0};
  else {
    m.sigma_static = c.quantity("sigma_static");
    m.sigma_dynamic = c.quantity("sigma_dynamic");
    m.tau_c = c.quantity("tau_c");
  }
  return m;
}

RfTrapDynamics dynamics_from(const ExperimentConfig& c) {
  RfTrapDynamics d = RfTrapDynamics::reference();
  d.omega_rf = c.quantity("omega_rf");
  d.secular = {c.quantity("secular_x"), c.quantity("secular_z")};
  d.damping = c.quantity("damping");
  return d;
}

ProbeBeam beam_from(const ExperimentConfig& c, double detuning) {
  ProbeBeam b = ProbeBeam::ytterbium(detuning);
  b.angle = c.quantity("beam_angle");
  b.saturation = c.quantity("saturation");
  return b;
}

SidebandScan sideband_scan_from(const ExperimentConfig& c) {
  SidebandScan s;
  s.omega0 = c.quantity("omega0");
  s.eta = c.quantity("eta");
  s.full_lamb_dicke = c.flag("full_lamb_dicke");
  s.times = sideband_time_grid(s.omega0, s.eta, as_int(c.integer("points"), "points"), c.quantity("span"));
  s.shots = c.shots;
  s.contrast = c.quantity("contrast");
  return s;
}

json estimate_json(const Estimate& e) { return json{{"value", e.value}, {"uncertainty", e.uncertainty}}; }

// ---- experiments ------------------------------------------------------------

RunResult run_flop(const ExperimentConfig& c, unsigned) {
  const auto times = linspace(0.0, c.quantity("duration"), as_int(c.integer("points"), "points"));
  const double omega0 = c.quantity("omega0");
  RunResult r;
  Table t{"results.csv", {"t_s", "p_bright", "p_bright_se", "p_model"}, {}};
  std::vector<double> model, mean, se;
  if (c.text("drive") == "microwave") {
    DephasingModel noise = dephasing_from(c, c.text("noise"));
    model = rabi_drive(times, omega0, 0, noise, c.seed);
    mean = rabi_drive(times, omega0, c.shots, noise, c.seed);
    se.resize(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
      se[i] = c.shots > 0 ? std::sqrt(std::max(mean[i] * (1.0 - mean[i]), 0.25 / c.shots) / c.shots) : 0.0;
    }
    r.summary["pi_time_s"] = constants::pi / omega0;
  } else {
    PulseSpec pulse;
    pulse.branch = branch_from(c.text("branch"));
    pulse.omega0 = omega0;
    pulse.eta = c.quantity("eta");
    pulse.detuning = c.quantity("detuning");
    pulse.full_lamb_dicke = c.flag("full_lamb_dicke");
    const auto dist = thermal_distribution_auto(c.quantity("nbar"));
    model = flop_curve(dist, pulse, times);
    sample_curve(model, c.shots, c.seed, stream_id("runner.flop"), mean, se);
    r.summary["nbar"] = dist.mean();
    r.summary["n_max"] = dist.n_max();
  }
  for (std::size_t i = 0; i < times.size(); ++i) t.rows.push_back({times[i], mean[i], se[i], model[i]});
  r.tables.push_back(std::move(t));
  return r;
}

RunResult run_cool_and_measure(const ExperimentConfig& c, unsigned) {
  CoolingSchedule sched;
  const double omega0 = c.quantity("omega0");
  const double eta = c.quantity("eta");
  const auto& freqs = c.list("mode_frequencies");
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    sched.modes.push_back({fmt::format("mode{}", i), freqs[i], eta, omega0});
  }
  const auto measured = static_cast<std::size_t>(c.integer("measured_mode"));
  if (measured >= freqs.size()) {
    throw InvalidArgument(fmt::format("measured_mode {} out of range for {} modes", measured, freqs.size()));
  }
  sched.iterations = as_int(c.integer("iterations"), "iterations");
  sched.iterations_per_mode = c.flag("iterations_per_mode");
  const auto& rule = c.text("rule");
  sched.rule = rule == "pi_at_n1" ? DurationRule::pi_at_n1 : rule == "fixed" ? DurationRule::fixed : DurationRule::pi_at_nbar;
  sched.fixed_duration = c.quantity("fixed_duration");
  sched.pump_duration = c.quantity("pump_duration");
  sched.pump_reset_infidelity = c.quantity("pump_infidelity");
  if (const double rate = c.quantity("cycle_heating_rate"); rate > 0.0) {
    sched.cycle_heating = HeatingProcess{rate, HeatingModel::birth_death};
  }
  std::vector<MotionalDistribution> dists(freqs.size(), doppler_cool(c.quantity("nbar_doppler")));
  if (sched.iterations > 0 && !sched.modes.empty()) dists = sideband_cool(std::move(dists), sched);

  const SidebandScan scan = sideband_scan_from(c);
  const auto m = measure_sidebands(dists[measured], scan, c.seed, stream_id("runner.cool_and_measure"));
  RunResult r;
  Table t{"results.csv", {"t_s", "p_red", "p_red_se", "p_blue", "p_blue_se"}, {}};
  for (std::size_t i = 0; i < scan.times.size(); ++i) {
    t.rows.push_back({scan.times[i], m.red[i], m.red_se[i], m.blue[i], m.blue_se[i]});
  }
  r.tables.push_back(std::move(t));
  json modes = json::array();
  for (std::size_t i = 0; i < dists.size(); ++i) {
    modes.push_back({{"frequency_hz", hz(freqs[i])}, {"nbar_true", dists[i].mean()}});
  }
  r.summary["modes"] = modes;
  r.summary["measured_mode"] = measured;
  r.summary["nbar_true"] = dists[measured].mean();
  r.summary["nbar_estimate"] = estimate_json(m.nbar);
  r.summary["red_amplitude"] = estimate_json(m.amplitudes.red);
  r.summary["blue_amplitude"] = estimate_json(m.amplitudes.blue);
  return r;
}

RunResult run_heating_rate(const ExperimentConfig& c, unsigned) {
  HeatingExperiment exp;
  exp.initial = thermal_distribution_auto(c.quantity("initial_nbar"));
  exp.heating.rate = c.quantity("rate");
  exp.heating.model = c.text("heating_model") == "nbar_increment" ? HeatingModel::nbar_increment : HeatingModel::birth_death;
  exp.delays = c.list("delays");
  exp.scan = sideband_scan_from(c);
  exp.scan.uncertainty = c.text("uncertainty") == "bootstrap" ? NbarUncertainty::bootstrap : NbarUncertainty::linear;
  exp.scan.bootstrap_samples = as_int(c.integer("bootstrap_samples"), "bootstrap_samples");
  const auto res = simulate_heating_experiment(exp, c.seed);

  RunResult r;
  Table t{"results.csv", {"delay_s", "nbar", "nbar_se", "nbar_true"}, {}};
  for (std::size_t i = 0; i < exp.delays.size(); ++i) {
    t.rows.push_back({exp.delays[i], res.measurements[i].nbar.value, res.measurements[i].nbar.uncertainty,
                      res.true_nbar[i]});
  }
  r.tables.push_back(std::move(t));
  const auto noise = electric_field_psd(res.fit.rate, IonConstants::yb171(c.quantity("mode_frequency")));
  r.summary["rate_injected_per_s"] = exp.heating.rate;
  r.summary["rate_per_s"] = res.fit.rate;
  r.summary["rate_uncertainty_per_s"] = res.fit.rate_uncertainty;
  r.summary["intercept"] = res.fit.intercept;
  r.summary["intercept_uncertainty"] = res.fit.intercept_uncertainty;
  r.summary["s_e_v2_per_m2_hz"] = noise.s_e;
  r.summary["omega_s_e_v2_per_m2"] = noise.omega_s_e;
  return r;
}

RunResult run_detection(const ExperimentConfig& c, unsigned workers) {
  DetectionModel m;
  m.bright_rate = c.quantity("bright_rate");
  m.background_rate = c.quantity("background_rate");
  m.depump_tau = c.quantity("depump_tau");
  m.repump_tau = c.quantity("repump_tau");
  m.threshold = c.quantity("threshold");
  const auto& windows = c.list("windows");
  const auto curve = fidelity_curve(m, windows, c.shots, c.seed, workers);
  const bool analytic = c.flag("analytic");

  RunResult r;
  Table t{"results.csv", {"window_s", "err_bright", "err_bright_se", "err_dark", "err_dark_se", "avg_fidelity"}, {}};
  if (analytic) {
    t.columns.insert(t.columns.end(), {"analytic_err_bright", "analytic_err_dark", "analytic_avg_fidelity"});
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    std::vector<Cell> row{p.window, p.err_bright, p.err_bright_se, p.err_dark, p.err_dark_se, p.avg_fidelity};
    if (analytic) {
      const auto a = analytic_error_model(m, p.window);
      row.insert(row.end(), {a.err_bright, a.err_dark, a.average_fidelity()});
    }
    t.rows.push_back(std::move(row));
    if (p.avg_fidelity > curve.points[best].avg_fidelity) best = i;
  }
  r.tables.push_back(std::move(t));
  if (!curve.points.empty()) {
    r.summary["best_window_s"] = curve.points[best].window;
    r.summary["best_avg_fidelity"] = curve.points[best].avg_fidelity;
  }
  if (analytic && windows.size() >= 2) {
    const auto [lo, hi] = std::minmax_element(windows.begin(), windows.end());
    const double w = optimal_window(m, *lo, *hi);
    r.summary["analytic_optimal_window_s"] = w;
    r.summary["analytic_optimal_fidelity"] = analytic_error_model(m, w).average_fidelity();
  }
  return r;
}

RunResult run_coherence(const ExperimentConfig& c, unsigned workers, Sequence seq) {
  DephasingModel model = dephasing_from(c, c.text("noise"));
  model.pulse_infidelity = c.quantity("pulse_infidelity");
  CoherenceScan scan;
  scan.sequence = seq;
  scan.delays = c.list("delays");
  scan.phase_points = as_int(c.integer("phase_points"), "phase_points");
  scan.fringe = FringeOptions{c.shots, c.flag("projective"), workers};
  const auto res = run_coherence_scan(scan, model, c.seed);

  RunResult r;
  Table t{"results.csv", {"delay_s", "visibility", "visibility_se", "visibility_model"}, {}};
  for (std::size_t i = 0; i < res.delays.size(); ++i) {
    const double d = res.delays[i];
    const double v = seq == Sequence::ramsey ? ramsey_visibility(model, d) : echo_visibility(model, d);
    t.rows.push_back({d, res.visibilities[i], res.visibility_se[i], v});
  }
  r.tables.push_back(std::move(t));

  const auto& fringe_delays = c.list("fringe_delays");
  const int fringe_points = as_int(c.integer("fringe_points"), "fringe_points");
  if (!fringe_delays.empty()) {
    Table f{"fringes.csv", {"delay_s", "phase_rad", "p1", "p1_se"}, {}};
    const auto phases = evenly_spaced_phases(fringe_points);
    for (std::size_t k = 0; k < fringe_delays.size(); ++k) {
      const std::uint64_t seed = mix64(c.seed ^ stream_id("runner.fringes")) + k;
      const auto fr = run_fringe(seq, fringe_delays[k], phases, model, scan.fringe, seed);
      for (std::size_t i = 0; i < fr.phases.size(); ++i) {
        f.rows.push_back({fringe_delays[k], fr.phases[i], fr.p1[i], fr.se[i]});
      }
    }
    r.tables.push_back(std::move(f));
  }
  r.summary["t2_s"] = res.t2;
  r.summary["t2_uncertainty_s"] = res.t2_uncertainty;
  r.summary["v0"] = res.v0;
  r.summary["model"] = {{"sigma_static_rad_s", model.sigma_static},
                        {"sigma_dynamic_rad_s", model.sigma_dynamic},
                        {"tau_c_s", model.tau_c},
                        {"pulse_infidelity", model.pulse_infidelity}};
  return r;
}

RunResult run_micromotion_spectrum(const ExperimentConfig& c, unsigned workers) {
  RfTrapDynamics dyn = dynamics_from(c);
  const ProbeBeam beam = beam_from(c, c.quantity("detuning"));
  const auto offsets = linspace(c.quantity("offset_min"), c.quantity("offset_max"),
                                as_int(c.integer("offset_points"), "offset_points"));
  SteadyStateOptions steady;
  steady.steps_per_cycle = as_int(c.integer("steps_per_cycle"), "steps_per_cycle");
  const double angle = c.quantity("field_angle");
  const auto& fields = c.list("stray_fields");
  const auto& depths = c.list("excitation_depths");
  const bool do_comp = c.flag("compensate");
  const double comp_range = c.quantity("compensation_range");

  RunResult r;
  Table t{"results.csv",
          {"stray_field_v_per_m", "excitation_depth", "offset_hz", "excitation_hz", "brightness"},
          {}};
  json spectra = json::array();
  for (double f : fields) {
    for (double depth : depths) {
      dyn.stray_field = {f * std::cos(angle), f * std::sin(angle)};
      dyn.excitation_depth = depth;
      const auto spec = excitation_spectrum(dyn, offsets, beam, steady, workers);
      for (const auto& p : spec.points) {
        t.rows.push_back({f, depth, hz(p.excitation_offset), hz(dyn.omega_rf + p.excitation_offset), p.brightness});
      }
      spectra.push_back({{"stray_field_v_per_m", f},
                         {"excitation_depth", depth},
                         {"baseline", spec.baseline},
                         {"peak_height", spec.peak_height},
                         {"peak_over_baseline", spec.baseline > 0 ? spec.peak_height / spec.baseline : 0.0}});
    }
  }
  r.tables.push_back(std::move(t));
  r.summary["spectra"] = spectra;
  if (do_comp) {
    json comps = json::array();
    for (double f : fields) {
      dyn.stray_field = {f * std::cos(angle), f * std::sin(angle)};
      dyn.excitation_depth = depths.empty() ? 0.0 : depths.front();
      CompensationSearch search;
      search.objective = CompensationObjective::excitation_peak;
      search.beam = beam;
      search.range = comp_range;
      search.steady = steady;
      const auto res = compensate(dyn, search);
      comps.push_back({{"injected_v_per_m", {dyn.stray_field[0], dyn.stray_field[1]}},
                       {"estimated_v_per_m", {res.estimated_stray[0], res.estimated_stray[1]}},
                       {"observable", {res.observable[0], res.observable[1]}},
                       {"evaluations", res.evaluations}});
    }
    r.summary["compensation"] = comps;
  }
  return r;
}

RunResult run_rf_phase_contrast(const ExperimentConfig& c, unsigned workers) {
  const RfTrapDynamics base = dynamics_from(c);
  const ProbeBeam beam = beam_from(c, c.quantity("detuning"));
  const auto& fields = c.list("stray_fields");
  const auto& angles = c.list("field_angles");
  const int bins = as_int(c.integer("bins"), "bins");
  const int steps = as_int(c.integer("steps_per_cycle"), "steps_per_cycle");
  std::vector<double> contrast(fields.size() * angles.size());
  parallel_for(contrast.size(), workers, [&](std::size_t k) {
    RfTrapDynamics dyn = base;
    const double f = fields[k % fields.size()];
    const double a = angles[k / fields.size()];
    dyn.stray_field = {f * std::cos(a), f * std::sin(a)};
    contrast[k] = rf_correlation_contrast(dyn, beam, bins, steps);
  });
  RunResult r;
  Table t{"results.csv", {"field_angle_rad", "stray_field_v_per_m", "contrast"}, {}};
  for (std::size_t k = 0; k < contrast.size(); ++k) {
    t.rows.push_back({angles[k / fields.size()], fields[k % fields.size()], contrast[k]});
  }
  r.tables.push_back(std::move(t));
  r.summary["beam_angle_rad"] = beam.angle;
  return r;
}

RunResult run_lineshape(const ExperimentConfig& c, unsigned workers) {
  RfTrapDynamics dyn = dynamics_from(c);
  const ProbeBeam beam = beam_from(c, 0.0);
  const double span = c.quantity("detuning_span");
  const auto detunings = linspace(-span, span, as_int(c.integer("points"), "points"));
  const double angle = c.quantity("field_angle");
  const int steps = as_int(c.integer("steps_per_cycle"), "steps_per_cycle");
  const auto& fields = c.list("stray_fields");

  std::vector<Lineshape> shapes(fields.size());
  std::vector<double> fwhm(fields.size());
  parallel_for(fields.size(), workers, [&](std::size_t k) {
    RfTrapDynamics d = dyn;
    d.stray_field = {fields[k] * std::cos(angle), fields[k] * std::sin(angle)};
    shapes[k] = broadened_lineshape(d, detunings, beam, steps);
    const auto v = beam_velocity_samples(d, beam, steps);
    fwhm[k] = lineshape_fwhm([&](double det) { return averaged_rate(v, det, beam); }, span);
  });
  RunResult r;
  Table t{"results.csv", {"stray_field_v_per_m", "detuning_hz", "scatter_rate_per_s"}, {}};
  json widths = json::array();
  for (std::size_t k = 0; k < fields.size(); ++k) {
    for (std::size_t i = 0; i < detunings.size(); ++i) {
      t.rows.push_back({fields[k], hz(shapes[k].detunings[i]), shapes[k].scatter_rates[i]});
    }
    widths.push_back({{"stray_field_v_per_m", fields[k]}, {"fwhm_hz", hz(fwhm[k])}});
  }
  r.tables.push_back(std::move(t));
  r.summary["linewidths"] = widths;
  r.summary["natural_linewidth_hz"] = hz(beam.linewidth);
  return r;
}

RunResult run_trap_characterize(const ExperimentConfig& c, unsigned) {
  TrapGeometry g = TrapGeometry::symmetric_six_rail(c.quantity("geometry.inner_edge"), c.quantity("geometry.rf_width"),
                                                    c.quantity("geometry.gap"), c.quantity("geometry.slot_width"),
                                                    c.quantity("geometry.outer_extent"));
  const double inner = c.quantity("geometry.inner_dc");
  const double outer = c.quantity("geometry.outer_dc");
  for (auto& s : g.dc_strips) s.voltage = s.name.rfind("inner", 0) == 0 ? inner : outer;
  TrapDrive d = TrapDrive::reference();
  d.v_rf = c.quantity("v_rf");
  d.omega_rf = c.quantity("omega_rf");

  RunResult r;
  if (c.flag("calibrate_split")) {
    const auto cal = calibrate_dc_split(g, d, c.quantity("target_high"), c.quantity("target_low"));
    g = cal.geometry;
    json volts = json::object();
    for (const auto& s : g.dc_strips) volts[s.name] = s.voltage;
    r.summary["calibration"] = {{"dc_voltages_v", volts},
                                {"frequencies_hz", {hz(cal.frequencies[0]), hz(cal.frequencies[1])}},
                                {"relative_error", {cal.relative_error[0], cal.relative_error[1]}},
                                {"dc_field_at_null_v_per_m", cal.dc_field_at_null}};
  }
  const auto sec = secular_frequencies(g, d);
  const auto rot = dc_axes_rotation(g, d);
  r.summary["null_height_m"] = sec.null.y();
  r.summary["null_x_m"] = sec.null.x();
  r.summary["secular_hz"] = {hz(sec.frequencies[0]), hz(sec.frequencies[1])};
  r.summary["mathieu_q"] = {sec.mathieu_q[0], sec.mathieu_q[1]};
  r.summary["pseudopotential_valid"] = sec.pseudopotential_valid;
  r.summary["axis_angle_rad"] = rot.angle;
  try {
    const auto depth = trap_depth(g, d);
    r.summary["depth_ev"] = depth.depth_ev;
    r.summary["saddle_height_m"] = depth.saddle_height;
  } catch (const GeometryError& e) {
    r.summary["depth_error"] = e.what();
  }

  const auto rows = field_map(g, d, c.quantity("map.x_min"), c.quantity("map.x_max"), c.quantity("map.z_min"),
                              c.quantity("map.z_max"), as_int(c.integer("map.nx"), "map.nx"),
                              as_int(c.integer("map.nz"), "map.nz"));
  Table t{"results.csv", {"x_m", "z_m", "ex_v_per_m", "ez_v_per_m", "pseudopotential_ev"}, {}};
  for (const auto& row : rows) t.rows.push_back({row.x, row.z, row.ex, row.ez, row.pseudopotential_ev});
  r.tables.push_back(std::move(t));
  return r;
}

RunResult run_comb_plan(const ExperimentConfig& c, unsigned) {
  CombConfig cfg;
  cfg.omega_rep = c.quantity("rep_rate");
  cfg.harmonic_n = as_int(c.integer("harmonic"), "harmonic");
  cfg.delta_hf = c.quantity("hyperfine");
  cfg.optical_detuning = c.quantity("optical_detuning");
  RunResult r;
  Table t{"results.csv", {"mode_hz", "branch", "delta_aom_hz", "resonance_hz"}, {}};
  for (double f : c.list("trap_frequencies")) {
    for (Branch b : {Branch::red_sideband, Branch::carrier, Branch::blue_sideband}) {
      CombConfig tuned = cfg;
      tuned.delta_aom = sideband_target(cfg, f, b);
      t.rows.push_back({hz(f), std::string(branch_label(b)), hz(tuned.delta_aom), hz(raman_resonance(tuned))});
    }
  }
  r.tables.push_back(std::move(t));
  r.summary["harmonic_frequency_hz"] = hz(cfg.harmonic_n * cfg.omega_rep);
  r.summary["carrier_delta_aom_hz"] = hz(cfg.delta_hf - cfg.harmonic_n * cfg.omega_rep);
  return r;
}

RunResult dispatch(const ExperimentConfig& c, unsigned workers) {
  switch (c.experiment) {
    case Experiment::flop: return run_flop(c, workers);
    case Experiment::cool_and_measure: return run_cool_and_measure(c, workers);
    case Experiment::heating_rate: return run_heating_rate(c, workers);
    case Experiment::detection_fidelity: return run_detection(c, workers);
    case Experiment::ramsey: return run_coherence(c, workers, Sequence::ramsey);
    case Experiment::spin_echo: return run_coherence(c, workers, Sequence::spin_echo);
    case Experiment::micromotion_spectrum: return run_micromotion_spectrum(c, workers);
    case Experiment::rf_phase_contrast: return run_rf_phase_contrast(c, workers);
    case Experiment::lineshape: return run_lineshape(c, workers);
    case Experiment::trap_characterize: return run_trap_characterize(c, workers);
    case Experiment::comb_plan: return run_comb_plan(c, workers);
  }
  throw std::logic_error("unhandled experiment");
}

template <class E>
[[noreturn]] void rethrow_as(const E& e, const ExperimentConfig& c) {
  throw E(fmt::format("{}: {}", experiment_name(c.experiment), e.what()));
}

json resolved_json(const ExperimentConfig& c) {
  json out = json::object();
  for (const auto& [k, v] : c.values()) {
    std::visit([&](const auto& x) { out[k] = x; }, v);
  }
  return out;
}

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

}  // namespace

const char* artifact_version() noexcept { return IONTRAP_VERSION; }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += csv_field(table.columns[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* text = std::get_if<std::string>(&row[i])) {
        out += csv_field(*text);
      } else {
        std::visit([&](const auto& x) { out += fmt::format("{}", x); }, row[i]);
      }
    }
    out += '\n';
  }
  return out;
}

RunResult execute(const ExperimentConfig& config, unsigned workers) {
  try {
    return dispatch(config, workers);
  } catch (const InstabilityError& e) {
    rethrow_as(e, config);
  } catch (const ConvergenceError& e) {
    rethrow_as(e, config);
  } catch (const GeometryError& e) {
    rethrow_as(e, config);
  } catch (const FitError& e) {
    rethrow_as(e, config);
  } catch (const TruncationError& e) {
    rethrow_as(e, config);
  } catch (const NoMaximumError& e) {
    rethrow_as(e, config);
  } catch (const DegenerateEstimateError& e) {
    rethrow_as(e, config);
  } catch (const InvalidArgument& e) {
    rethrow_as(e, config);
  }
}

json RunRecord::to_json() const {
  return json{{"artifact_version", version},
              {"seed", seed},
              {"started_utc", started_utc},
              {"wall_clock_s", wall_clock_s},
              {"results", result_files},
              {"config", config_text},
              {"summary", summary}};
}

RunRecord run(const ExperimentConfig& config, const RunOptions& options) {
  RunRecord rec;
  rec.started_utc = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res = execute(config, options.workers);
  rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.config_text = config.to_text();
  rec.seed = config.seed;
  rec.version = artifact_version();
  rec.summary = std::move(res.summary);
  rec.directory = options.directory.empty() ? std::filesystem::path(config.output_path) : options.directory;
  std::filesystem::create_directories(rec.directory);
  for (const auto& t : res.tables) {
    std::ofstream out(rec.directory / t.file, std::ios::binary);
    out << to_csv(t);
    if (!out) throw Error(fmt::format("cannot write {}", (rec.directory / t.file).string()));
    rec.result_files.push_back(t.file);
  }
  json j = rec.to_json();
  j["experiment"] = experiment_name(config.experiment);
  j["shots"] = config.shots;
  j["resolved"] = resolved_json(config);
  std::ofstream out(rec.directory / "run.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error(fmt::format("cannot write {}", (rec.directory / "run.json").string()));
  return rec;
}

RunRecord replay(const std::filesystem::path& run_json, const RunOptions& options) {
  std::ifstream in(run_json);
  if (!in) throw InvalidArgument(fmt::format("cannot read {}", run_json.string()));
  const json j = json::parse(in);
  const auto cfg = validate_config(j.at("config").get<std::string>());
  return run(cfg, options);
}

}  // namespace iontrap

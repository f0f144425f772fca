#include "fabtip/characterization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <numeric>

#include "fabtip/csv.hpp"
#include "fabtip/errors.hpp"

namespace fabtip {

void SweepPlan::validate() const {
  if (!(fmin > 0.0) || !(fmin < fmax)) throw ConfigError("sweep needs 0 < fmin < fmax");
  if (points < 2) throw ConfigError("sweep needs at least two points");
  if (cycles < 2) throw ConfigError("sweep needs at least two cycles per point");
}

std::vector<double> sweep_frequencies(const SweepPlan& plan) {
  plan.validate();
  std::vector<double> f(static_cast<std::size_t>(plan.points));
  const double lo = std::log(plan.fmin), hi = std::log(plan.fmax);
  for (int i = 0; i < plan.points; ++i) f[i] = std::exp(lo + (hi - lo) * i / (plan.points - 1));
  f.front() = plan.fmin;
  f.back() = plan.fmax;
  return f;
}

double lockin_amplitude(std::span<const double> signal, double frequency, double sample_rate) {
  if (!(frequency > 0.0) || !(sample_rate > 2.0 * frequency)) throw DomainError("lock-in needs 0 < 2f < fs");
  const auto n = signal.size();
  const double periods = static_cast<double>(n) * frequency / sample_rate;
  if (periods < 1.0 - 1e-9 || std::abs(periods - std::round(periods)) > 1e-6 * std::max(1.0, periods))
    throw DomainError("lock-in window must contain a whole number of periods");
  double in_phase = 0.0, quadrature = 0.0;
  const double w = 2.0 * std::numbers::pi * frequency / sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    in_phase += signal[i] * std::cos(w * static_cast<double>(i));
    quadrature += signal[i] * std::sin(w * static_cast<double>(i));
  }
  return 2.0 / static_cast<double>(n) * std::hypot(in_phase, quadrature);
}

void BodeResult::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.precision(10);
  out << "freq_hz,amplitude,gain_db\n";
  for (std::size_t i = 0; i < freqs.size(); ++i) out << freqs[i] << ',' << amplitudes[i] << ',' << gains_db[i] << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

BodeResult bode(std::span<const double> freqs, std::span<const double> amplitudes) {
  if (freqs.size() != amplitudes.size() || freqs.empty()) throw DomainError("bode needs matching non-empty inputs");
  if (!(amplitudes[0] > 0.0)) throw DomainError("reference amplitude must be positive");
  for (std::size_t i = 1; i < freqs.size(); ++i)
    if (!(freqs[i] > freqs[i - 1])) throw DomainError("bode frequencies must be strictly increasing");
  BodeResult r;
  r.freqs.assign(freqs.begin(), freqs.end());
  r.amplitudes.assign(amplitudes.begin(), amplitudes.end());
  for (double a : amplitudes) {
    if (!(a > 0.0)) throw DomainError("bode amplitudes must be positive");
    r.gains_db.push_back(20.0 * std::log10(a / amplitudes[0]));
  }
  r.gains_db[0] = 0.0;
  r.bandwidth = minus3db(r.freqs, r.gains_db);
  return r;
}

std::optional<double> minus3db(std::span<const double> freqs, std::span<const double> gains_db) {
  constexpr double kLevel = -3.0;
  for (std::size_t i = 0; i < gains_db.size(); ++i) {
    if (gains_db[i] > kLevel) continue;
    if (gains_db[i] == kLevel || i == 0) return freqs[i];
    const double u = (kLevel - gains_db[i - 1]) / (gains_db[i] - gains_db[i - 1]);
    return std::exp(std::log(freqs[i - 1]) + u * (std::log(freqs[i]) - std::log(freqs[i - 1])));
  }
  return std::nullopt;
}

namespace {

// First time after index `from` at which the series crosses `level`, upward or downward.
std::optional<double> crossing(std::span<const double> t, std::span<const double> v, std::size_t from, double level,
                               bool upward) {
  for (std::size_t k = std::max<std::size_t>(from, 1); k < v.size(); ++k) {
    const bool hit = upward ? v[k] >= level : v[k] <= level;
    if (!hit) continue;
    const bool before = upward ? v[k - 1] < level : v[k - 1] > level;
    if (!before) {
      if (k == from) return t[k];
      continue;
    }
    return t[k - 1] + (level - v[k - 1]) / (v[k] - v[k - 1]) * (t[k] - t[k - 1]);
  }
  return std::nullopt;
}

std::size_t index_at(std::span<const double> t, double time) {
  return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), time - 1e-12) - t.begin());
}

}  // namespace

StepMetrics step_metrics(std::span<const double> time, std::span<const double> value, double on, double off) {
  if (time.size() != value.size() || time.size() < 3) throw AnalysisError("step series too short");
  if (!(off > on)) throw AnalysisError("step hold window is empty");
  const double window_start = off - 0.2 * (off - on);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (time[i] >= window_start && time[i] < off) {
      sum += value[i];
      ++count;
    }
  }
  if (count == 0) throw AnalysisError("no samples in the steady-state window");
  StepMetrics m;
  m.steady = sum / static_cast<double>(count);
  if (!(m.steady > 0.0)) throw AnalysisError("steady-state value is not positive");

  const double lo = 0.1 * m.steady, hi = 0.9 * m.steady;
  const auto i_on = index_at(time, on);
  auto r10 = crossing(time, value, i_on, lo, true);
  auto r90 = r10 ? crossing(time, value, i_on, hi, true) : std::nullopt;
  const auto i_off = index_at(time, off);
  auto f90 = crossing(time, value, i_off, hi, false);
  auto f10 = f90 ? crossing(time, value, i_off, lo, false) : std::nullopt;
  if (!r10 || !r90) throw AnalysisError("rising edge never crosses the 10%/90% thresholds");
  if (!f90 || !f10) throw AnalysisError("falling edge never crosses the 90%/10% thresholds");
  m.rise = *r90 - *r10;
  m.fall = *f10 - *f90;
  return m;
}

double supply_for_force(double force, double height, const ActuatorGeometry& geom) {
  const double per_pa = arc_blocked_force(1.0, height, geom.width, geom.length);
  if (!(per_pa > 0.0)) throw DomainError("no blocked force at this height");
  return force / per_pa;
}

double drive_response_amplitude(double frequency, int cycles, bool discard_first, const BenchSetup& setup) {
  int per_period = std::max(20, static_cast<int>(std::ceil(1.0 / (frequency * setup.dynamics.dt) - 1e-9)));
  per_period += per_period % 2;
  DynamicsParams params = setup.dynamics;
  params.dt = 1.0 / (frequency * per_period);

  const int total_cycles = cycles + (discard_first ? 1 : 0);
  const auto n = static_cast<std::size_t>(total_cycles) * per_period;
  auto wave = std::make_unique<bool[]>(n);
  for (std::size_t k = 0; k < n; ++k) wave[k] = (k % per_period) < static_cast<std::size_t>(per_period / 2);

  auto force = simulate_drive_force(std::span<const bool>(wave.get(), n), setup.supply, setup.height,
                                    params, setup.geometry, setup.law, setup.max_flow);
  std::span<const double> steady(force);
  steady = steady.subspan(force.size() - static_cast<std::size_t>(cycles) * per_period);
  return lockin_amplitude(steady, frequency, frequency * per_period);
}

SweepRun run_sweep(const SweepPlan& plan, const BenchSetup& setup) {
  auto freqs = sweep_frequencies(plan);
  std::vector<double> amps;
  SweepRun run;
  for (double f : freqs) {
    amps.push_back(drive_response_amplitude(f, plan.cycles, plan.discard_first, setup));
    int per_period = std::max(20, static_cast<int>(std::ceil(1.0 / (f * setup.dynamics.dt) - 1e-9)));
    per_period += per_period % 2;
    run.sample_rates.push_back(f * per_period);
  }
  run.bode = bode(freqs, amps);
  return run;
}

StepRun run_step(const BenchSetup& setup, double pre, double hold, double post) {
  const double dt = setup.dynamics.dt;
  const auto n_pre = static_cast<std::size_t>(std::llround(pre / dt));
  const auto n_hold = static_cast<std::size_t>(std::llround(hold / dt));
  const auto n_post = static_cast<std::size_t>(std::llround(post / dt));
  auto wave = std::make_unique<bool[]>(n_pre + n_hold + n_post);
  for (std::size_t k = 0; k < n_pre + n_hold + n_post; ++k) wave[k] = k >= n_pre && k < n_pre + n_hold;

  StepRun run;
  run.trajectory = simulate_drive(std::span<const bool>(wave.get(), n_pre + n_hold + n_post), setup.supply,
                                  setup.height, setup.dynamics, setup.geometry, setup.law, setup.max_flow);
  // Sample k is the state at (k + 1) dt, so the edges sit at these times.
  run.on = static_cast<double>(n_pre) * dt;
  run.off = static_cast<double>(n_pre + n_hold) * dt;
  // Prepend the rest state at t = 0 so the first edge has a sample before it.
  std::vector<double> t{0.0}, f{blocked_force(0.0, setup.height, setup.geometry, setup.law)};
  t.insert(t.end(), run.trajectory.time.begin(), run.trajectory.time.end());
  f.insert(f.end(), run.trajectory.force.begin(), run.trajectory.force.end());
  run.metrics = step_metrics(t, f, run.on, run.off);
  return run;
}

DurabilityReport durability_from_peaks(std::vector<double> peak_force, std::vector<double> peak_pressure) {
  if (peak_force.size() < 2) throw AnalysisError("durability drift needs at least two cycles");
  DurabilityReport r;
  r.peak_force = std::move(peak_force);
  r.peak_pressure = std::move(peak_pressure);
  const double baseline = r.peak_force[1];
  if (!(baseline > 0.0)) throw AnalysisError("baseline peak force is not positive");
  for (std::size_t k = 1; k < r.peak_force.size(); ++k)
    r.max_drift = std::max(r.max_drift, std::abs(r.peak_force[k] / baseline - 1.0));
  r.final_drift = std::abs(r.peak_force.back() / baseline - 1.0);
  return r;
}

DurabilityReport durability_run(const DurabilityPlan& plan, const BenchSetup& setup, const WearModel& wear) {
  if (plan.cycles < 1 || !(plan.period > 0.0)) throw ConfigError("invalid durability plan");
  const double dt = setup.dynamics.dt;
  const auto per_cycle = static_cast<std::size_t>(std::llround(plan.period / dt));
  // Supply waveform indexed by phase so every cycle sees identical inputs.
  std::vector<double> supply(per_cycle);
  for (std::size_t k = 0; k < per_cycle; ++k)
    supply[k] = 0.5 * plan.peak_pressure *
                (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(per_cycle)));

  std::vector<double> peak_force, peak_pressure;
  ChamberState state{0.0, setup.height, true, 0.0};
  for (int cycle = 1; cycle <= plan.cycles; ++cycle) {
    double pf = 0.0, pp = 0.0;
    const double factor = wear ? wear(cycle) : 1.0;
    for (std::size_t k = 0; k < per_cycle; ++k) {
      state = step(state, true, supply[k], dt, setup.dynamics, setup.geometry, setup.max_flow);
      pp = std::max(pp, state.pressure);
      pf = std::max(pf, factor * blocked_force(state.pressure, setup.height, setup.geometry, setup.law));
    }
    peak_force.push_back(pf);
    peak_pressure.push_back(pp);
  }
  if (plan.cycles < 2) throw AnalysisError("durability drift needs at least two cycles");
  return durability_from_peaks(std::move(peak_force), std::move(peak_pressure));
}

LabRecording LabRecording::from_csv(const std::filesystem::path& path) {
  auto table = csv::read(path, {"time_s", "force_n"}, {"pressure_pa"});
  if (table.rows.size() < 3) throw ValidationError(path.string() + ": recording needs at least three samples");
  LabRecording rec;
  const bool has_pressure = table.has_column("pressure_pa");
  for (const auto& row : table.rows) {
    rec.time.push_back(row[0]);
    rec.force.push_back(row[1]);
    if (has_pressure) rec.pressure.push_back(row[2]);
  }
  const double dt = (rec.time.back() - rec.time.front()) / static_cast<double>(rec.time.size() - 1);
  for (std::size_t i = 1; i < rec.time.size(); ++i) {
    const double step = rec.time[i] - rec.time[i - 1];
    if (!(step > 0.0) || std::abs(step - dt) > 1e-3 * dt)
      throw ValidationError(path.string() + ":" + std::to_string(table.lines[i]) + ": non-uniform sample spacing");
  }
  rec.sample_rate = 1.0 / dt;
  return rec;
}

DurabilityReport durability_from_recording(const LabRecording& rec, double period) {
  if (!(period > 0.0)) throw ConfigError("durability period must be positive");
  std::vector<double> pf, pp;
  const double t0 = rec.time.front();
  for (std::size_t i = 0; i < rec.time.size(); ++i) {
    const auto cycle = static_cast<std::size_t>(std::floor((rec.time[i] - t0) / period + 1e-9));
    if (cycle >= pf.size()) {
      pf.resize(cycle + 1, 0.0);
      pp.resize(cycle + 1, 0.0);
    }
    pf[cycle] = std::max(pf[cycle], rec.force[i]);
    if (!rec.pressure.empty()) pp[cycle] = std::max(pp[cycle], rec.pressure[i]);
  }
  // Drop a trailing partial cycle.
  const double covered = rec.time.back() - t0 + 1.0 / rec.sample_rate;
  if (static_cast<double>(pf.size()) * period > covered + 1e-9) {
    pf.pop_back();
    pp.pop_back();
  }
  return durability_from_peaks(std::move(pf), std::move(pp));
}

StepMetrics step_metrics_from_recording(const LabRecording& rec, std::optional<double> on, std::optional<double> off) {
  if (!on || !off) {
    const double peak = *std::max_element(rec.force.begin(), rec.force.end());
    auto up = crossing(rec.time, rec.force, 0, 0.5 * peak, true);
    if (!up) throw AnalysisError("no rising edge in recording");
    auto down = crossing(rec.time, rec.force, index_at(rec.time, *up), 0.5 * peak, false);
    if (!down) throw AnalysisError("no falling edge in recording");
    // Walk back from the half-level crossings to the baseline and the plateau.
    auto i = index_at(rec.time, *up);
    while (i > 0 && rec.force[i] > 0.02 * peak) --i;
    auto j = index_at(rec.time, *down);
    while (j > 0 && rec.force[j] < 0.98 * peak) --j;
    if (!on) on = rec.time[i];
    if (!off) off = rec.time[j];
  }
  return step_metrics(rec.time, rec.force, *on, *off);
}

double recording_amplitude(const LabRecording& rec, double frequency, int cycles) {
  const double per_period = rec.sample_rate / frequency;
  if (std::abs(per_period - std::round(per_period)) > 1e-6 * per_period)
    throw DomainError("recording sample rate is not a whole multiple of the drive frequency");
  const auto n_period = static_cast<std::size_t>(std::llround(per_period));
  std::size_t available = rec.force.size() / n_period;
  std::size_t use = cycles > 0 ? static_cast<std::size_t>(cycles) : available;
  if (use == 0 || use > available) throw AnalysisError("recording shorter than the requested cycles");
  std::span<const double> window(rec.force);
  window = window.subspan(rec.force.size() - use * n_period);
  return lockin_amplitude(window, frequency, rec.sample_rate);
}

}  // namespace fabtip

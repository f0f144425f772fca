#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fabtip/pneumatics.hpp"
#include "fabtip/statics.hpp"

namespace fabtip {

struct SweepPlan {
  double fmin = 1.0;    // Hz
  double fmax = 100.0;  // Hz
  int points = 30;
  int cycles = 10;  // steady-state cycles analysed per frequency
  bool discard_first = true;

  void validate() const;
};

/// Log-spaced frequencies with exact endpoints.
std::vector<double> sweep_frequencies(const SweepPlan& plan);

/// Lock-in amplitude (2/N)|sum x_i exp(-j 2 pi f t_i)| over a window that must
/// hold a whole number of periods. Throws DomainError otherwise or if fs <= 2f.
double lockin_amplitude(std::span<const double> signal, double frequency, double sample_rate);

struct BodeResult {
  std::vector<double> freqs;
  std::vector<double> amplitudes;
  std::vector<double> gains_db;  // relative to the first (lowest) frequency
  std::optional<double> bandwidth;

  void write_csv(const std::filesystem::path& path) const;
};

BodeResult bode(std::span<const double> freqs, std::span<const double> amplitudes);

/// First crossing at or below -3 dB, interpolated linearly in log frequency.
std::optional<double> minus3db(std::span<const double> freqs, std::span<const double> gains_db);

struct StepMetrics {
  double rise = 0.0;  // s, 10% -> 90%
  double fall = 0.0;  // s, 90% -> 10%
  double steady = 0.0;
};

/// Rise/fall of a step held on [on, off]. Steady state is the mean over the
/// last 20% of the hold window; crossings are linearly interpolated.
StepMetrics step_metrics(std::span<const double> time, std::span<const double> value, double on, double off);

/// Emulated single-chamber bench: chamber between force sensor and spacer.
struct BenchSetup {
  ActuatorGeometry geometry{};
  ForceLaw law = ArcModel{};
  DynamicsParams dynamics{};
  double max_flow = PumpModel{}.max_flow;
  double height = 0.5e-3;   // m, spacer
  double supply = kSupplyMax;  // Pa
};

/// Supply pressure giving `force` N of blocked force at `height` (arc model).
double supply_for_force(double force, double height, const ActuatorGeometry& geom);

struct SweepRun {
  BodeResult bode;
  std::vector<double> sample_rates;
};

/// Square-wave valve drive at each sweep frequency, lock-in on the force.
/// The step is shortened per frequency so every period spans an even number
/// of samples (at most the bench dt).
SweepRun run_sweep(const SweepPlan& plan, const BenchSetup& setup);

/// Lock-in amplitude of the force at `frequency` under square-wave valve drive.
double drive_response_amplitude(double frequency, int cycles, bool discard_first, const BenchSetup& setup);

struct StepRun {
  StepMetrics metrics;
  Trajectory trajectory;
  double on = 0.0;
  double off = 0.0;
};

/// Valve opens at `pre`, holds for `hold` seconds, then vents for `post`.
StepRun run_step(const BenchSetup& setup, double pre = 0.1, double hold = 3.0, double post = 0.5);

struct DurabilityPlan {
  int cycles = 1000;
  double period = 4.0;         // s
  double peak_pressure = 60e3;  // Pa, sine from 0 to this
};

struct DurabilityReport {
  std::vector<double> peak_force;     // per cycle
  std::vector<double> peak_pressure;  // per cycle
  double max_drift = 0.0;             // max |peak_k / peak_2 - 1| over k >= 2
  double final_drift = 0.0;
};

/// Force multiplier per 1-based cycle index; models wear.
using WearModel = std::function<double(int cycle)>;

DurabilityReport durability_run(const DurabilityPlan& plan, const BenchSetup& setup, const WearModel& wear = {});

/// Drift statistics from per-cycle peaks. Needs at least two cycles.
DurabilityReport durability_from_peaks(std::vector<double> peak_force, std::vector<double> peak_pressure);

/// Lab recording `time_s,force_n[,pressure_pa]` at a uniform sample rate.
struct LabRecording {
  std::vector<double> time;
  std::vector<double> force;
  std::vector<double> pressure;  // empty when absent
  double sample_rate = 0.0;

  static LabRecording from_csv(const std::filesystem::path& path);
};

/// Per-cycle peaks of a recording split at multiples of `period`.
DurabilityReport durability_from_recording(const LabRecording& rec, double period);

/// Step metrics of a recording. The hold window is detected from the 50%
/// crossings of the force when not given.
StepMetrics step_metrics_from_recording(const LabRecording& rec, std::optional<double> on = {},
                                        std::optional<double> off = {});

/// Lock-in amplitude of a recording driven at `frequency`; analyses the last
/// `cycles` periods (or all whole periods when 0).
double recording_amplitude(const LabRecording& rec, double frequency, int cycles = 0);

}  // namespace fabtip

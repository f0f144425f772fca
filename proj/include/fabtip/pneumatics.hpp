#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "fabtip/statics.hpp"

namespace fabtip {

inline constexpr double kAtmosphere = 101325.0;  // Pa
inline constexpr double kSupplyMax = 64e3;       // Pa, pump ceiling
inline constexpr int kChambers = 4;
inline constexpr int kPumps = 2;

/// Piecewise-linear duty -> pressure map plus the per-pump flow ceiling.
struct PumpModel {
  std::vector<double> duty{0.0, 1.0};
  std::vector<double> pressure{0.0, kSupplyMax};
  double max_flow = 0.8e-3 / 60.0;  // m^3/s per pump; two pumps give 1.6 L/min

  void validate() const;
  /// Loads `duty,pressure_pa` rows.
  static PumpModel from_csv(const std::filesystem::path& path, double max_flow = 0.8e-3 / 60.0);
};

double pump_pressure(double duty, const PumpModel& pump);

/// First-order inflate/vent time constants and the fixed emulator step.
struct DynamicsParams {
  double tau_up = 0.064 / std::log(9.0);
  double tau_down = 0.011 / std::log(9.0);
  double dt = 1e-3;

  void validate() const;

  /// Time constants tuned so the swept bench setup at 0.5 mm reproduces the
  /// measured 7.1 Hz bandwidth.
  static DynamicsParams bench_calibrated();
};

struct ChamberState {
  double pressure = 0.0;  // Pa, gauge
  double height = 0.0;    // m, constrained
  bool valve_open = false;
  double time = 0.0;  // s
};

/// Advances one chamber by `dt` with the exact exponential update toward
/// `supply` (valve open) or ambient (valve closed). While inflating, the
/// implied volumetric inflow V*dP/dt/P_atm is capped at `max_flow`.
ChamberState step(const ChamberState& state, bool valve_open, double supply, double dt,
                  const DynamicsParams& params, const ActuatorGeometry& geom,
                  double max_flow = std::numeric_limits<double>::infinity());

/// Pressure/force trajectory of one constrained chamber.
struct Trajectory {
  std::vector<double> time;
  std::vector<double> pressure;
  std::vector<double> force;
  std::vector<bool> valve;

  void write_csv(const std::filesystem::path& path) const;
};

/// Drives one chamber with a valve waveform sampled at `params.dt`. Sample k
/// holds the state after applying waveform[k] for one step.
Trajectory simulate_drive(std::span<const bool> valve_waveform, double supply, double constrained_height,
                          const DynamicsParams& params, const ActuatorGeometry& geom,
                          const ForceLaw& law = ArcModel{},
                          double max_flow = std::numeric_limits<double>::infinity(),
                          double initial_pressure = 0.0);

/// Force-only convenience wrapper around simulate_drive.
std::vector<double> simulate_drive_force(std::span<const bool> valve_waveform, double supply,
                                         double constrained_height, const DynamicsParams& params,
                                         const ActuatorGeometry& geom, const ForceLaw& law = ArcModel{},
                                         double max_flow = std::numeric_limits<double>::infinity());

/// One controller output: valve states for chambers 1..4 and pump duties A, B.
struct ValveCommand {
  std::array<bool, kChambers> open{};
  std::array<double, kPumps> duty{};
  double time = 0.0;

  friend bool operator==(const ValveCommand&, const ValveCommand&) = default;
};

/// Four chambers fed by two pumps. Single owner; `chambers()` snapshots are values.
class PneumaticEmulator {
 public:
  struct Config {
    ActuatorGeometry geometry{};
    ForceLaw law = ArcModel{};
    DynamicsParams dynamics{};
    PumpModel pump{};
    std::array<double, kChambers> constrained_height{0.5e-3, 0.5e-3, 0.5e-3, 0.5e-3};
    /// Pump index (0 = A, 1 = B) feeding each chamber.
    std::array<int, kChambers> pump_of_chamber{0, 0, 1, 1};

    void validate() const;
  };

  explicit PneumaticEmulator(Config config);

  /// Applies `command` for one step of `config.dynamics.dt`.
  void advance(const ValveCommand& command);

  const std::array<ChamberState, kChambers>& chambers() const { return chambers_; }
  std::array<double, kChambers> pressures() const;
  std::array<double, kChambers> forces() const;
  double time() const { return chambers_[0].time; }
  const Config& config() const { return config_; }

 private:
  Config config_;
  std::array<ChamberState, kChambers> chambers_{};
};

}  // namespace fabtip

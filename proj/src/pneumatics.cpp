#include "fabtip/pneumatics.hpp"

#include <algorithm>
#include <fstream>

#include "fabtip/csv.hpp"
#include "fabtip/errors.hpp"

namespace fabtip {

void PumpModel::validate() const {
  if (duty.size() < 2 || duty.size() != pressure.size())
    throw ConfigError("pump table needs matching duty/pressure columns with at least two rows");
  if (duty.front() != 0.0 || duty.back() != 1.0) throw ConfigError("pump table must span duty 0..1");
  for (std::size_t i = 1; i < duty.size(); ++i) {
    if (!(duty[i] > duty[i - 1])) throw ConfigError("pump duty must be strictly increasing");
    if (pressure[i] < pressure[i - 1]) throw ConfigError("pump pressure must be non-decreasing");
  }
  if (pressure.front() < 0.0) throw ConfigError("pump pressure must be non-negative");
  if (!(max_flow > 0.0)) throw ConfigError("pump max_flow must be positive");
}

PumpModel PumpModel::from_csv(const std::filesystem::path& path, double max_flow) {
  auto table = csv::read(path, {"duty", "pressure_pa"});
  PumpModel pump;
  pump.duty.clear();
  pump.pressure.clear();
  for (const auto& row : table.rows) {
    pump.duty.push_back(row[0]);
    pump.pressure.push_back(row[1]);
  }
  pump.max_flow = max_flow;
  pump.validate();
  return pump;
}

double pump_pressure(double duty, const PumpModel& pump) {
  if (!(duty >= 0.0 && duty <= 1.0)) throw DomainError("pump duty outside [0, 1]");
  auto it = std::upper_bound(pump.duty.begin(), pump.duty.end(), duty);
  if (it == pump.duty.end()) return pump.pressure.back();
  auto i = static_cast<std::size_t>(it - pump.duty.begin()) - 1;
  double u = (duty - pump.duty[i]) / (pump.duty[i + 1] - pump.duty[i]);
  return pump.pressure[i] + u * (pump.pressure[i + 1] - pump.pressure[i]);
}

void DynamicsParams::validate() const {
  if (!(tau_up > 0.0) || !(tau_down > 0.0)) throw ConfigError("time constants must be positive");
  if (!(dt > 0.0) || dt > tau_down / 2) throw ConfigError("step must satisfy 0 < dt <= tau_down / 2");
}

DynamicsParams DynamicsParams::bench_calibrated() {
  DynamicsParams p;
  p.tau_up *= 1.12;
  p.tau_down *= 1.12;
  return p;
}

ChamberState step(const ChamberState& state, bool valve_open, double supply, double dt,
                  const DynamicsParams& params, const ActuatorGeometry& geom, double max_flow) {
  if (!(dt > 0.0)) throw DomainError("step dt must be positive");
  if (!(supply >= 0.0)) throw DomainError("supply pressure must be non-negative");

  const double target = valve_open ? supply : 0.0;
  const bool rising = target > state.pressure;
  const double tau = rising ? params.tau_up : params.tau_down;

  ChamberState next = state;
  next.pressure = target + (state.pressure - target) * std::exp(-dt / tau);
  if (rising && std::isfinite(max_flow)) {
    const double volume = chamber_volume(state.height, geom);
    if (volume > 0.0) {
      const double max_rise = max_flow * kAtmosphere * dt / volume;
      next.pressure = std::min(next.pressure, state.pressure + max_rise);
    }
  }
  next.valve_open = valve_open;
  next.time = state.time + dt;
  return next;
}

void Trajectory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "time_s,pressure_pa,force_n,valve\n";
  out.precision(10);
  for (std::size_t i = 0; i < time.size(); ++i)
    out << time[i] << ',' << pressure[i] << ',' << force[i] << ',' << (valve[i] ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Trajectory simulate_drive(std::span<const bool> valve_waveform, double supply, double constrained_height,
                          const DynamicsParams& params, const ActuatorGeometry& geom, const ForceLaw& law,
                          double max_flow, double initial_pressure) {
  // Validate the height once so a bad value fails before any stepping.
  blocked_force(0.0, constrained_height, geom, law);

  Trajectory traj;
  traj.time.reserve(valve_waveform.size());
  traj.pressure.reserve(valve_waveform.size());
  traj.force.reserve(valve_waveform.size());
  traj.valve.reserve(valve_waveform.size());

  ChamberState state{initial_pressure, constrained_height, false, 0.0};
  for (std::size_t k = 0; k < valve_waveform.size(); ++k) {
    state = step(state, valve_waveform[k], supply, params.dt, params, geom, max_flow);
    // Time from the step index keeps sample times free of accumulated rounding.
    traj.time.push_back(static_cast<double>(k + 1) * params.dt);
    traj.pressure.push_back(state.pressure);
    traj.force.push_back(blocked_force(state.pressure, constrained_height, geom, law));
    traj.valve.push_back(valve_waveform[k]);
  }
  return traj;
}

std::vector<double> simulate_drive_force(std::span<const bool> valve_waveform, double supply,
                                         double constrained_height, const DynamicsParams& params,
                                         const ActuatorGeometry& geom, const ForceLaw& law, double max_flow) {
  return simulate_drive(valve_waveform, supply, constrained_height, params, geom, law, max_flow).force;
}

void PneumaticEmulator::Config::validate() const {
  geometry.validate();
  dynamics.validate();
  pump.validate();
  if (geometry.chamber_count != kChambers) throw ConfigError("emulator expects four chambers");
  for (double h : constrained_height) {
    if (!(h >= 0.0) || h > free_height(geometry, law)) throw ConfigError("constrained height outside force-law domain");
  }
  for (int p : pump_of_chamber)
    if (p < 0 || p >= kPumps) throw ConfigError("pump index out of range");
}

PneumaticEmulator::PneumaticEmulator(Config config) : config_(std::move(config)) {
  config_.validate();
  for (int c = 0; c < kChambers; ++c) chambers_[c].height = config_.constrained_height[c];
}

void PneumaticEmulator::advance(const ValveCommand& command) {
  std::array<double, kPumps> supply{};
  for (int p = 0; p < kPumps; ++p) supply[p] = pump_pressure(command.duty[p], config_.pump);

  // The pump's flow ceiling is shared evenly among its currently filling chambers.
  std::array<int, kPumps> filling{};
  for (int c = 0; c < kChambers; ++c) {
    int p = config_.pump_of_chamber[c];
    if (command.open[c] && supply[p] > chambers_[c].pressure) ++filling[p];
  }
  for (int c = 0; c < kChambers; ++c) {
    int p = config_.pump_of_chamber[c];
    double share = config_.pump.max_flow / std::max(1, filling[p]);
    chambers_[c] = step(chambers_[c], command.open[c], supply[p], config_.dynamics.dt, config_.dynamics,
                        config_.geometry, share);
  }
}

std::array<double, kChambers> PneumaticEmulator::pressures() const {
  std::array<double, kChambers> out{};
  for (int c = 0; c < kChambers; ++c) out[c] = chambers_[c].pressure;
  return out;
}

std::array<double, kChambers> PneumaticEmulator::forces() const {
  std::array<double, kChambers> out{};
  for (int c = 0; c < kChambers; ++c)
    out[c] = blocked_force(chambers_[c].pressure, chambers_[c].height, config_.geometry, config_.law);
  return out;
}

}  // namespace fabtip

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>

#include "fabtip/pneumatics.hpp"
#include "fabtip/statics.hpp"

namespace fabtip {

inline constexpr int kSensorSide = 6;

using PressureGrid = Eigen::Matrix<double, kSensorSide, kSensorSide>;

/// Dimensionless 6x6 tactile map (row 0 at the front edge).
struct PressureMap {
  PressureGrid values = PressureGrid::Zero();
  double timestamp = 0.0;
  double noise_sigma = 0.0;
};

struct SensorConfig {
  double gain_per_kpa = 1.0;
  double noise_sigma = 0.02 * 64.0;  // 2% of the 64 kPa full scale

  /// Sensor reading of a chamber at the pump ceiling.
  double full_scale() const { return gain_per_kpa * kSupplyMax / 1e3; }
};

/// Chamber c contributes gain * P_c[kPa] to its 3x3 block; Gaussian noise is
/// added per element and the result clamped at zero.
PressureMap sense(const std::array<double, kChambers>& pressures_pa, double gain_per_kpa, double noise_sigma,
                  std::mt19937_64& rng, const ActuatorGeometry& geom = {}, double timestamp = 0.0);

PressureMap sense(const std::array<double, kChambers>& pressures_pa, double gain_per_kpa, double noise_sigma,
                  std::uint64_t seed, const ActuatorGeometry& geom = {}, double timestamp = 0.0);

/// Stateful sensor with its own seeded noise stream.
class TactileSensor {
 public:
  TactileSensor(SensorConfig config, std::uint64_t seed, ActuatorGeometry geom = {});
  PressureMap read(const std::array<double, kChambers>& pressures_pa, double timestamp);
  const SensorConfig& config() const { return config_; }

 private:
  SensorConfig config_;
  ActuatorGeometry geom_;
  std::mt19937_64 rng_;
};

/// Mean reading over each chamber's 3x3 block, indexed by chamber id - 1.
std::array<double, kChambers> block_means(const PressureGrid& grid, const ActuatorGeometry& geom = {});

/// Natural cubic spline through equally spaced nodes, evaluated at `factor`
/// points per interval. Returns (n - 1) * factor + 1 samples; nodes land exactly.
Eigen::VectorXd spline_upsample(const Eigen::VectorXd& nodes, int factor);

/// Separable natural bicubic spline upsampling, (6 - 1) * factor + 1 per side.
Eigen::MatrixXd upsample_bicubic(const Eigen::MatrixXd& grid, int factor);

struct ExportReport {
  std::size_t clamped = 0;  // elements above the shared scale
};

/// Writes `<stem>.csv` (one line per row) and `<stem>.pgm` (P5, maxval 255)
/// using the shared scale `scale_max`.
ExportReport export_map(const Eigen::MatrixXd& grid, const std::filesystem::path& stem, double scale_max);

}  // namespace fabtip

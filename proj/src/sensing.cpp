#include "fabtip/sensing.hpp"

#include <cmath>
#include <fstream>

#include "fabtip/errors.hpp"

namespace fabtip {

namespace {

constexpr int kBlock = kSensorSide / 2;

PressureGrid noiseless(const std::array<double, kChambers>& pressures_pa, double gain, const ActuatorGeometry& geom) {
  PressureGrid grid = PressureGrid::Zero();
  for (int c = 0; c < kChambers; ++c) {
    if (!(pressures_pa[c] >= 0.0)) throw DomainError("chamber pressure must be non-negative");
    const auto cell = geom.layout[c];
    grid.block<kBlock, kBlock>(cell.row * kBlock, cell.col * kBlock).setConstant(gain * pressures_pa[c] / 1e3);
  }
  return grid;
}

}  // namespace

PressureMap sense(const std::array<double, kChambers>& pressures_pa, double gain_per_kpa, double noise_sigma,
                  std::mt19937_64& rng, const ActuatorGeometry& geom, double timestamp) {
  PressureMap map;
  map.values = noiseless(pressures_pa, gain_per_kpa, geom);
  map.timestamp = timestamp;
  map.noise_sigma = noise_sigma;
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int r = 0; r < kSensorSide; ++r)
      for (int c = 0; c < kSensorSide; ++c) map.values(r, c) = std::max(0.0, map.values(r, c) + noise(rng));
  }
  return map;
}

PressureMap sense(const std::array<double, kChambers>& pressures_pa, double gain_per_kpa, double noise_sigma,
                  std::uint64_t seed, const ActuatorGeometry& geom, double timestamp) {
  std::mt19937_64 rng(seed);
  return sense(pressures_pa, gain_per_kpa, noise_sigma, rng, geom, timestamp);
}

TactileSensor::TactileSensor(SensorConfig config, std::uint64_t seed, ActuatorGeometry geom)
    : config_(config), geom_(std::move(geom)), rng_(seed) {
  if (!(config_.gain_per_kpa > 0.0) || !(config_.noise_sigma >= 0.0)) throw ConfigError("invalid sensor config");
}

PressureMap TactileSensor::read(const std::array<double, kChambers>& pressures_pa, double timestamp) {
  return sense(pressures_pa, config_.gain_per_kpa, config_.noise_sigma, rng_, geom_, timestamp);
}

std::array<double, kChambers> block_means(const PressureGrid& grid, const ActuatorGeometry& geom) {
  std::array<double, kChambers> out{};
  for (int c = 0; c < kChambers; ++c) {
    const auto cell = geom.layout[c];
    out[c] = grid.block<kBlock, kBlock>(cell.row * kBlock, cell.col * kBlock).mean();
  }
  return out;
}

Eigen::VectorXd spline_upsample(const Eigen::VectorXd& y, int factor) {
  if (factor < 1) throw DomainError("upsampling factor must be >= 1");
  const Eigen::Index n = y.size();
  if (n < 2) throw DomainError("spline needs at least two nodes");

  // Second derivatives with natural end conditions (unit node spacing):
  // M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]).
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  if (n > 2) {
    const Eigen::Index k = n - 2;
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(k, 4.0);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) rhs[i] = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
    for (Eigen::Index i = 1; i < k; ++i) {  // Thomas algorithm, unit off-diagonals
      double w = 1.0 / diag[i - 1];
      diag[i] -= w;
      rhs[i] -= w * rhs[i - 1];
    }
    Eigen::VectorXd inner(k);
    inner[k - 1] = rhs[k - 1] / diag[k - 1];
    for (Eigen::Index i = k - 2; i >= 0; --i) inner[i] = (rhs[i] - inner[i + 1]) / diag[i];
    m.segment(1, k) = inner;
  }

  Eigen::VectorXd out((n - 1) * factor + 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    for (int s = 0; s < factor; ++s) {
      const double t = static_cast<double>(s) / factor;
      const double a = 1.0 - t;
      out[i * factor + s] = (s == 0) ? y[i]
                                     : a * y[i] + t * y[i + 1] +
                                           ((a * a * a - a) * m[i] + (t * t * t - t) * m[i + 1]) / 6.0;
    }
  }
  out[out.size() - 1] = y[n - 1];
  return out;
}

Eigen::MatrixXd upsample_bicubic(const Eigen::MatrixXd& grid, int factor) {
  if (factor < 1) throw DomainError("upsampling factor must be >= 1");
  const Eigen::Index rows = grid.rows(), cols = grid.cols();
  Eigen::MatrixXd along_rows((rows), (cols - 1) * factor + 1);
  for (Eigen::Index r = 0; r < rows; ++r) along_rows.row(r) = spline_upsample(grid.row(r).transpose(), factor).transpose();
  Eigen::MatrixXd out((rows - 1) * factor + 1, along_rows.cols());
  for (Eigen::Index c = 0; c < along_rows.cols(); ++c) out.col(c) = spline_upsample(along_rows.col(c), factor);
  return out;
}

ExportReport export_map(const Eigen::MatrixXd& grid, const std::filesystem::path& stem, double scale_max) {
  if (!(scale_max > 0.0)) throw DomainError("export scale must be positive");
  ExportReport report;

  auto csv_path = stem;
  csv_path += ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write '" + csv_path.string() + "'");
  csv.precision(8);
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) csv << (c ? "," : "") << grid(r, c);
    csv << '\n';
  }
  if (!csv) throw IoError("write failed for '" + csv_path.string() + "'");

  auto pgm_path = stem;
  pgm_path += ".pgm";
  std::ofstream pgm(pgm_path, std::ios::binary);
  if (!pgm) throw IoError("cannot write '" + pgm_path.string() + "'");
  pgm << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      double v = grid(r, c);
      if (v > scale_max) ++report.clamped;
      double level = std::clamp(v / scale_max, 0.0, 1.0) * 255.0;
      pgm.put(static_cast<char>(static_cast<unsigned char>(std::lround(level))));
    }
  }
  if (!pgm) throw IoError("write failed for '" + pgm_path.string() + "'");
  return report;
}

}  // namespace fabtip

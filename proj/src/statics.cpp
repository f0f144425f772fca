#include "fabtip/statics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "fabtip/csv.hpp"
#include "fabtip/errors.hpp"

namespace fabtip {

void ActuatorGeometry::validate() const {
  if (!(width > 0.0)) throw ConfigError("actuator width must be positive");
  if (!(length > 0.0)) throw ConfigError("actuator length must be positive");
  if (chamber_count < 1) throw ConfigError("chamber_count must be >= 1");
  if (static_cast<int>(layout.size()) != chamber_count)
    throw ConfigError("layout must list one cell per chamber");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.size(); ++j)
      if (layout[i] == layout[j]) throw ConfigError("layout maps two chambers to one cell");
  }
  if (stroke_limit && !(*stroke_limit > 0.0)) throw ConfigError("stroke limit must be positive");
}

ActuatorGeometry ActuatorGeometry::fingertip_device() {
  ActuatorGeometry g;
  g.stroke_limit = 3.2e-3;
  return g;
}

CalibrationTable::CalibrationTable(std::vector<double> pressures, std::vector<double> heights,
                                   Eigen::MatrixXd forces)
    : pressures_(std::move(pressures)), heights_(std::move(heights)), forces_(std::move(forces)) {
  if (pressures_.size() < 2 || heights_.size() < 2)
    throw ConfigError("calibration table needs at least two pressures and two heights");
  if (forces_.rows() != static_cast<Eigen::Index>(pressures_.size()) ||
      forces_.cols() != static_cast<Eigen::Index>(heights_.size()))
    throw ConfigError("calibration table is not rectangular");
  if (!std::is_sorted(pressures_.begin(), pressures_.end()) ||
      std::adjacent_find(pressures_.begin(), pressures_.end()) != pressures_.end())
    throw ConfigError("calibration pressures must be strictly increasing");
  if (!std::is_sorted(heights_.begin(), heights_.end()) ||
      std::adjacent_find(heights_.begin(), heights_.end()) != heights_.end())
    throw ConfigError("calibration heights must be strictly increasing");
  if (heights_.front() < 0.0 || pressures_.front() < 0.0)
    throw ConfigError("calibration axes must be non-negative");
  if (!forces_.allFinite() || (forces_.array() < 0.0).any())
    throw ConfigError("calibration forces must be finite and non-negative");
  for (Eigen::Index r = 0; r < forces_.rows(); ++r)
    for (Eigen::Index c = 1; c < forces_.cols(); ++c)
      if (forces_(r, c) > forces_(r, c - 1))
        throw ConfigError("calibration force must be non-increasing in height");
}

CalibrationTable CalibrationTable::from_csv(const std::filesystem::path& path) {
  auto table = csv::read(path, {"pressure_pa", "height_m", "force_n"});
  std::set<double> ps, hs;
  for (const auto& row : table.rows) {
    ps.insert(row[0]);
    hs.insert(row[1]);
  }
  std::vector<double> pressures(ps.begin(), ps.end()), heights(hs.begin(), hs.end());
  if (pressures.size() * heights.size() != table.rows.size())
    throw ConfigError(path.string() + ": calibration rows do not fill a rectangular grid");
  Eigen::MatrixXd forces = Eigen::MatrixXd::Constant(pressures.size(), heights.size(), -1.0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    auto r = std::lower_bound(pressures.begin(), pressures.end(), row[0]) - pressures.begin();
    auto c = std::lower_bound(heights.begin(), heights.end(), row[1]) - heights.begin();
    if (forces(r, c) != -1.0)
      throw ConfigError(path.string() + ":" + std::to_string(table.lines[i]) + ": duplicate grid node");
    forces(r, c) = row[2];
  }
  return CalibrationTable(std::move(pressures), std::move(heights), std::move(forces));
}

namespace {

// Index i with axis[i] <= x <= axis[i+1], and the fractional position.
std::pair<std::size_t, double> bracket(const std::vector<double>& axis, double x) {
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t i = it == axis.begin() ? 0 : static_cast<std::size_t>(it - axis.begin()) - 1;
  i = std::min(i, axis.size() - 2);
  double frac = (x - axis[i]) / (axis[i + 1] - axis[i]);
  return {i, frac};
}

}  // namespace

double CalibrationTable::force(double pressure, double height) const {
  if (pressure < pressures_.front() || pressure > pressures_.back())
    throw DomainError("pressure outside calibration range");
  if (height < heights_.front() || height > heights_.back())
    throw DomainError("height outside calibration range");
  auto [i, u] = bracket(pressures_, pressure);
  auto [j, v] = bracket(heights_, height);
  // Exact node hits return the stored value without rounding.
  if (u == 0.0 && v == 0.0) return forces_(i, j);
  double f00 = forces_(i, j), f01 = forces_(i, j + 1);
  double f10 = forces_(i + 1, j), f11 = forces_(i + 1, j + 1);
  return (1 - u) * ((1 - v) * f00 + v * f01) + u * ((1 - v) * f10 + v * f11);
}

double free_height(const ActuatorGeometry& geom, const ForceLaw& law) {
  if (const auto* table = std::get_if<CalibrationTable>(&law)) return table->max_height();
  return arc_free_height(geom.width);
}

double effective_stroke(const ActuatorGeometry& geom, const ForceLaw& law) {
  double h = free_height(geom, law);
  return geom.stroke_limit ? std::min(h, *geom.stroke_limit) : h;
}

double blocked_force(double pressure, double height, const ActuatorGeometry& geom, const ForceLaw& law) {
  if (!(pressure >= 0.0)) throw DomainError("pressure must be non-negative");
  if (!(height >= 0.0) || height > free_height(geom, law))
    throw DomainError("height outside [0, free height]");
  return std::visit(
      [&](const auto& l) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, CalibrationTable>)
          return l.force(pressure, height);
        else
          return arc_blocked_force(pressure, height, geom.width, geom.length);
      },
      law);
}

double cross_section_area(double height, const ActuatorGeometry& geom) {
  if (!(height >= 0.0) || height > arc_free_height(geom.width))
    throw DomainError("height outside [0, free height]");
  return arc_cross_section(height, geom.width);
}

double chamber_volume(double height, const ActuatorGeometry& geom) {
  return cross_section_area(height, geom) * geom.length;
}

double multi_chamber_force(double pressure, double height, int k, const ActuatorGeometry& geom,
                           const ForceLaw& law) {
  if (k < 1 || k > geom.chamber_count) throw DomainError("chamber count out of range");
  return k * blocked_force(pressure, height, geom, law);
}

}  // namespace fabtip

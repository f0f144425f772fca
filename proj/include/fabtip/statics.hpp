#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

namespace fabtip {

/// Grid cell of a chamber in the 2x2 layout. Row 0 is the front (distal) row,
/// column 0 the left column.
struct GridCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Flat pouch geometry. Chamber ids are 1-based; `layout[id - 1]` gives the cell.
struct ActuatorGeometry {
  double width = 13e-3;   // m, transverse
  double length = 13e-3;  // m, seam to seam
  int chamber_count = 4;
  std::vector<GridCell> layout{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  /// Measured usable stroke; the arc model's free height exceeds it.
  std::optional<double> stroke_limit;

  void validate() const;

  /// Fingertip device: 13 mm square chambers, 3.2 mm effective stroke.
  static ActuatorGeometry fingertip_device();
};

// Constant-pressure circular-arc pouch model. Kept generic over the scalar so
// it composes with autodiff or interval types.

template <typename Scalar>
Scalar arc_free_height(Scalar width) {
  return Scalar(2) * width / Scalar(std::numbers::pi);
}

/// Width of the flat contact patch at compression height `height`.
template <typename Scalar>
Scalar arc_contact_width(Scalar width, Scalar height) {
  using std::max;
  return max(Scalar(0), width - Scalar(std::numbers::pi) * height / Scalar(2));
}

template <typename Scalar>
Scalar arc_blocked_force(Scalar pressure, Scalar height, Scalar width, Scalar length) {
  return pressure * length * arc_contact_width(width, height);
}

/// Cross-section of the inflated pouch; dA/dH equals the contact width.
template <typename Scalar>
Scalar arc_cross_section(Scalar height, Scalar width) {
  return width * height - Scalar(std::numbers::pi) * height * height / Scalar(4);
}

/// Rectangular (pressure, height) grid of measured blocked forces.
/// Queries between nodes are bilinear.
class CalibrationTable {
 public:
  CalibrationTable(std::vector<double> pressures, std::vector<double> heights, Eigen::MatrixXd forces);

  /// Loads `pressure_pa,height_m,force_n` rows; any row order, must fill the grid.
  static CalibrationTable from_csv(const std::filesystem::path& path);

  double force(double pressure, double height) const;
  double max_height() const { return heights_.back(); }

  const std::vector<double>& pressures() const { return pressures_; }
  const std::vector<double>& heights() const { return heights_; }
  const Eigen::MatrixXd& forces() const { return forces_; }

 private:
  std::vector<double> pressures_;
  std::vector<double> heights_;
  Eigen::MatrixXd forces_;  // rows: pressures, cols: heights
};

struct ArcModel {};

using ForceLaw = std::variant<ArcModel, CalibrationTable>;

/// Height at which the blocked force vanishes (arc model) or the largest
/// tabulated height (calibration table).
double free_height(const ActuatorGeometry& geom, const ForceLaw& law = ArcModel{});

/// min(free height, stroke limit).
double effective_stroke(const ActuatorGeometry& geom, const ForceLaw& law = ArcModel{});

/// Blocked force in N. Throws DomainError for negative pressure or a height
/// outside [0, free_height].
double blocked_force(double pressure, double height, const ActuatorGeometry& geom,
                     const ForceLaw& law = ArcModel{});

/// Pouch cross-section in m^2 (arc model). Chamber volume is this times length.
double cross_section_area(double height, const ActuatorGeometry& geom);

double chamber_volume(double height, const ActuatorGeometry& geom);

/// k chambers in parallel, 1 <= k <= chamber_count.
double multi_chamber_force(double pressure, double height, int k, const ActuatorGeometry& geom,
                           const ForceLaw& law = ArcModel{});

}  // namespace fabtip

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fabtip/errors.hpp"
#include "fabtip/protocol.hpp"

namespace fabtip {

enum class Material : std::uint8_t { Neutral = 0, Stone = 1, Fabric = 2, Wood = 3 };

/// 5 Hz stone, 30 Hz fabric, 100 Hz wood; 0 for neutral.
double material_frequency(Material m);
Material material_from_id(std::uint8_t id);  // ProtocolError for ids > 3
std::string_view to_string(Material m);
Material parse_material(std::string_view name);

/// Bit i set means chamber i + 1 is active.
using ChamberSet = std::bitset<4>;

ChamberSet chambers(std::initializer_list<int> ids);

enum class Quadrant { FrontLeft = 0, FrontRight = 1, BackLeft = 2, BackRight = 3 };

struct HandSample {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // m
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  double timestamp = 0.0;  // s
};

/// Fingertip pad. In the pad frame x points right, y to the front and z along
/// the outward pad normal; the pad lies in z = 0 centred on the hand position.
struct ContactPad {
  double side = 30e-3;  // m
  /// Chamber id (1..4) registered to each quadrant, indexed by Quadrant.
  std::array<int, 4> chamber_of_quadrant{1, 2, 3, 4};

  void validate() const;
  /// Pad-frame corner of a quadrant.
  Eigen::Vector3d corner(Quadrant q) const;
};

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Ones();
};

struct SceneObject {
  Aabb box;
  Material material = Material::Neutral;
};

struct Scene {
  std::vector<SceneObject> objects;

  /// JSON: {"objects": [{"min": [x,y,z], "max": [x,y,z], "material": "stone"}]}, meters.
  static Scene from_json_file(const std::filesystem::path& path);
};

/// Penetration depth of a point into a box (distance to the nearest face), 0 outside.
double penetration_depth(const Eigen::Vector3d& point, const Aabb& box);

/// Per-chamber indentation in mm (indexed by chamber id - 1) of the pad's
/// outer quadrant corners into `object`.
std::array<double, 4> quadrant_indentation(const HandSample& pose, const ContactPad& pad, const SceneObject& object);

struct ContactState {
  std::array<double, 4> depth_mm{};
  std::array<Material, 4> material{};
};

/// Deepest penetration per chamber over all scene objects and that object's material.
ContactState scene_contacts(const HandSample& pose, const ContactPad& pad, const Scene& scene);

/// alpha * x + (1 - alpha) * prev, componentwise. Works for scalars and Eigen expressions.
template <typename T>
auto ema(const T& prev, const T& x, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("EMA alpha must lie in (0, 1]");
  if constexpr (std::is_arithmetic_v<T>)
    return alpha * x + (1.0 - alpha) * prev;
  else
    return T(alpha * x + (1.0 - alpha) * prev);
}

/// Chambers whose indentation strictly exceeds `threshold_mm`.
ChamberSet contact_mask(const std::array<double, 4>& depth_mm, double threshold_mm = 2.0);

enum class SlideDirection { None, Left, Right, Up, Down, Clockwise, CounterClockwise };

std::string_view to_string(SlideDirection d);

/// Dominant tangential (x/y) direction if the tangential speed strictly exceeds the threshold.
SlideDirection dominant_direction(const Eigen::Vector3d& velocity_mm_s, double threshold_mm_s = 5.0);

enum class RenderMode { ContactConfig, Sliding, Vibro };

std::string_view to_string(RenderMode m);
RenderMode parse_render_mode(std::string_view name);

struct ScheduleEvent {
  ChamberSet chambers;
  double onset = 0.0;     // s from pattern start
  double duration = 0.0;  // s
};

struct StimulusSchedule {
  std::vector<ScheduleEvent> events;
  std::optional<double> repeat_period;  // s; empty for one-shot
  RenderMode mode = RenderMode::Sliding;

  /// Union of chambers active `elapsed` seconds after the schedule started.
  ChamberSet active_at(double elapsed) const;
  void validate() const;
};

/// How a translation is realised on the 2x2 grid.
enum class TranslationStyle { ChamberPairs, SingleChambers };

inline constexpr double kSlideInterval = 0.100;  // s between sequential onsets
inline constexpr double kSlideDuration = 0.200;  // s per actuation
inline constexpr double kSlideRest = 0.500;      // s between repetitions

StimulusSchedule sliding_schedule(SlideDirection direction,
                                  TranslationStyle style = TranslationStyle::ChamberPairs);

/// True during the high half of a 50% square wave that starts high at phase zero.
bool square_wave_high(double elapsed, double frequency);

/// Per-chamber drive for a vibrotactile material with all active chambers on one phase.
std::array<bool, 4> vibro_drive(Material material, ChamberSet active, double t, double phase_origin);

/// Packs one haptic state. Depths in mm; velocities in mm/s and rad/s.
HapticFrame compose_frame(const std::array<double, 4>& depth_mm, const std::array<Material, 4>& materials,
                          const Eigen::Vector3d& velocity_mm_s, double angular_velocity_rad_s, std::uint16_t seq,
                          double t);

struct RendererConfig {
  double alpha_linear = 0.15;
  double alpha_angular = 0.10;
};

/// Hand stream -> haptic frames: differentiates the tracked pose, filters the
/// velocities and probes the scene with the pad.
class HapticRenderer {
 public:
  HapticRenderer(Scene scene, ContactPad pad = {}, RendererConfig config = {});

  /// Samples must have strictly increasing timestamps and unit quaternions.
  void observe(const HandSample& sample);

  /// Frame for the most recent sample, stamped with `t`.
  HapticFrame compose(std::uint16_t seq, double t) const;

  const Eigen::Vector3d& filtered_velocity_mm_s() const { return velocity_mm_s_; }
  double filtered_angular_velocity() const { return angular_rad_s_; }
  const std::optional<HandSample>& last_sample() const { return last_; }

 private:
  Scene scene_;
  ContactPad pad_;
  RendererConfig config_;
  std::optional<HandSample> last_;
  Eigen::Vector3d velocity_mm_s_ = Eigen::Vector3d::Zero();
  double angular_rad_s_ = 0.0;
};

/// `time_s,px,py,pz,qw,qx,qy,qz` rows.
std::vector<HandSample> read_trajectory_csv(const std::filesystem::path& path);

}  // namespace fabtip

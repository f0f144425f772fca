#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fabtip/pneumatics.hpp"
#include "fabtip/protocol.hpp"
#include "fabtip/rendering.hpp"

namespace fabtip {

struct ControllerConfig {
  RenderMode mode = RenderMode::ContactConfig;
  double contact_threshold_mm = 2.0;
  double sliding_threshold_mm_s = 5.0;
  /// Rotation from the angular-velocity field. Off in the live sliding scene;
  /// the sliding identification task turns it on.
  bool rotation_enabled = false;
  double rotation_threshold_rad_s = 0.5;
  TranslationStyle translation_style = TranslationStyle::ChamberPairs;
  /// Drive frequency per material id 1..3 (Hz).
  std::array<double, 3> material_frequency{5.0, 30.0, 100.0};
  std::array<int, kChambers> pump_of_chamber{0, 0, 1, 1};
  std::int64_t watchdog_timeout_ms = 200;
  std::int64_t min_toggle_ms = 5;
  std::int64_t pump_lookahead_ms = 100;

  void validate() const;
};

/// Firmware-style controller on a 1 ms tick. Frame ingress and ticks are
/// serialized by the owner; times are integer milliseconds on the shared clock.
class ControllerEmulator {
 public:
  struct Counters {
    std::uint64_t frames = 0;
    std::uint64_t rejected = 0;
    std::uint64_t watchdog_trips = 0;
  };

  explicit ControllerEmulator(ControllerConfig config);

  /// Applies a decoded frame. Returns false (and counts) if a material id is unknown.
  /// Throws DomainError on clock regression.
  bool on_frame(const HapticFrame& frame, std::int64_t now_ms);

  /// Trips the watchdog when no frame arrived within the timeout. Idempotent.
  /// Throws DomainError on clock regression, leaving state unchanged.
  void watchdog(std::int64_t now_ms);

  /// Evaluates the active mode at `now_ms` and returns the valve/pump command.
  ValveCommand tick(std::int64_t now_ms);

  bool tripped() const { return tripped_; }
  const Counters& counters() const { return counters_; }
  const ControllerConfig& config() const { return config_; }
  /// Active sliding pattern and the tick it was latched on.
  SlideDirection sliding_direction() const { return direction_; }
  std::int64_t sliding_onset_ms() const { return sliding_onset_ms_; }

 private:
  /// Chambers the mode logic wants open at `t_ms`, before toggle spacing.
  std::array<bool, kChambers> desired(std::int64_t t_ms) const;
  void check_clock(std::int64_t now_ms) const;

  ControllerConfig config_;
  Counters counters_;
  std::optional<std::int64_t> last_frame_ms_;
  std::int64_t last_time_ms_ = std::numeric_limits<std::int64_t>::min();
  bool tripped_ = true;

  // Contact configuration.
  ChamberSet contact_;
  // Sliding.
  SlideDirection direction_ = SlideDirection::None;
  StimulusSchedule schedule_;
  std::int64_t sliding_onset_ms_ = 0;
  // Vibro.
  std::array<double, kChambers> vibro_frequency_{};
  std::int64_t phase_origin_ms_ = 0;

  std::array<bool, kChambers> valve_{};
  std::array<std::int64_t, kChambers> last_toggle_ms_{};
  std::array<bool, kChambers> toggled_once_{};
};

/// Command log with `time_s,v1,v2,v3,v4,dutyA,dutyB` rows.
void write_command_log(const std::filesystem::path& path, const std::vector<ValveCommand>& commands);

}  // namespace fabtip

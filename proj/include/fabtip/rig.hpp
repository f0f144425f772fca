#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fabtip/controller.hpp"
#include "fabtip/pneumatics.hpp"
#include "fabtip/protocol.hpp"
#include "fabtip/sensing.hpp"

namespace fabtip {

struct RigConfig {
  ControllerConfig controller{};
  PneumaticEmulator::Config emulator{};
  SensorConfig sensor{};
  std::uint64_t seed = 1;
  std::int64_t frame_period_ms = 20;  // 50 Hz haptic stream
  bool record_commands = false;
  bool record_frames = false;
  std::optional<ImpairedChannel::Impairments> link;
};

/// State after one tick.
struct RigSample {
  std::int64_t time_ms = 0;
  PressureMap map;
  std::array<double, kChambers> pressures{};
  std::array<double, kChambers> forces{};
  ValveCommand command;
};

/// Haptic payload for the current frame slot; the rig stamps seq and time.
using FrameSource = std::function<HapticFrame(std::int64_t now_ms)>;

/// Renderer-to-sensor loop on one simulated clock (1 ms ticks). Every frame
/// crosses the wire codec and the latest-wins receiver before the controller.
class Rig {
 public:
  explicit Rig(RigConfig config);

  /// One tick: frame slot (if due), controller tick, emulator step, sensor read.
  const RigSample& tick(const FrameSource& source);

  std::int64_t now_ms() const { return now_ms_; }
  const RigSample& last() const { return last_; }
  const ControllerEmulator& controller() const { return controller_; }
  const PneumaticEmulator& emulator() const { return emulator_; }
  const FrameReceiver& receiver() const { return receiver_; }
  const RigConfig& config() const { return config_; }
  const std::vector<ValveCommand>& command_log() const { return commands_; }
  const std::vector<FrameBytes>& frame_log() const { return frames_; }

 private:
  RigConfig config_;
  ControllerEmulator controller_;
  PneumaticEmulator emulator_;
  TactileSensor sensor_;
  FrameReceiver receiver_;
  std::optional<ImpairedChannel> channel_;
  std::uint16_t seq_ = 0;
  std::int64_t now_ms_ = 0;
  RigSample last_;
  std::vector<ValveCommand> commands_;
  std::vector<FrameBytes> frames_;
};

/// Frame with no contact: keeps the controller's watchdog fed while idle.
HapticFrame idle_frame();

}  // namespace fabtip

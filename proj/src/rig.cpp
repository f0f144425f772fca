#include "fabtip/rig.hpp"

#include <cmath>

namespace fabtip {

Rig::Rig(RigConfig config)
    : config_(std::move(config)),
      controller_(config_.controller),
      emulator_(config_.emulator),
      sensor_(config_.sensor, config_.seed, config_.emulator.geometry) {
  if (config_.frame_period_ms <= 0) throw ConfigError("frame period must be positive");
  if (std::abs(config_.emulator.dynamics.dt - 1e-3) > 1e-12)
    throw ConfigError("rig emulator step must be the 1 ms controller tick");
  if (config_.link) channel_.emplace(*config_.link, config_.seed ^ 0x9E3779B97F4A7C15ULL);
  last_.map = sensor_.read(emulator_.pressures(), 0.0);
}

const RigSample& Rig::tick(const FrameSource& source) {
  if (now_ms_ % config_.frame_period_ms == 0) {
    HapticFrame frame = source(now_ms_);
    frame.seq = seq_++;
    frame.timestamp_ms = static_cast<std::uint32_t>(now_ms_);
    const FrameBytes bytes = encode(frame);
    if (config_.record_frames) frames_.push_back(bytes);
    std::vector<FrameBytes> delivered;
    if (channel_)
      delivered = channel_->transmit(bytes);
    else
      delivered.push_back(bytes);
    for (const auto& datagram : delivered) {
      if (receiver_.receive(datagram) == FrameReceiver::Outcome::Accepted)
        controller_.on_frame(*receiver_.latest(), now_ms_);
    }
  }

  const ValveCommand command = controller_.tick(now_ms_);
  if (config_.record_commands) commands_.push_back(command);
  emulator_.advance(command);
  ++now_ms_;

  last_.time_ms = now_ms_;
  last_.command = command;
  last_.pressures = emulator_.pressures();
  last_.forces = emulator_.forces();
  last_.map = sensor_.read(last_.pressures, static_cast<double>(now_ms_) / 1e3);
  return last_;
}

HapticFrame idle_frame() { return HapticFrame{}; }

}  // namespace fabtip

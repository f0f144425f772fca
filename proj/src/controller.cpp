#include "fabtip/controller.hpp"

#include <cmath>
#include <fstream>

#include "fabtip/errors.hpp"

namespace fabtip {

void ControllerConfig::validate() const {
  if (!(contact_threshold_mm > 0.0) || !(sliding_threshold_mm_s > 0.0) || !(rotation_threshold_rad_s > 0.0))
    throw ConfigError("controller thresholds must be positive");
  for (double f : material_frequency)
    if (!(f > 0.0) || f > 100.0) throw ConfigError("material frequencies must lie in (0, 100] Hz");
  for (int p : pump_of_chamber)
    if (p < 0 || p >= kPumps) throw ConfigError("pump index out of range");
  if (watchdog_timeout_ms <= 0 || min_toggle_ms < 0 || pump_lookahead_ms < 0)
    throw ConfigError("controller timing parameters out of range");
}

ControllerEmulator::ControllerEmulator(ControllerConfig config) : config_(config) { config_.validate(); }

void ControllerEmulator::check_clock(std::int64_t now_ms) const {
  if (now_ms < last_time_ms_) throw DomainError("controller clock regression");
}

bool ControllerEmulator::on_frame(const HapticFrame& frame, std::int64_t now_ms) {
  check_clock(now_ms);
  for (auto id : frame.material_id) {
    if (id > 3) {
      ++counters_.rejected;
      return false;
    }
  }
  last_time_ms_ = now_ms;
  last_frame_ms_ = now_ms;
  tripped_ = false;
  ++counters_.frames;

  std::array<double, 4> depth{};
  for (int c = 0; c < 4; ++c) depth[c] = frame.indentation_mm[c];
  const ChamberSet mask = contact_mask(depth, config_.contact_threshold_mm);

  switch (config_.mode) {
    case RenderMode::ContactConfig: contact_ = mask; break;

    case RenderMode::Sliding: {
      if (mask.none()) {
        direction_ = SlideDirection::None;
        schedule_ = {};
        break;
      }
      SlideDirection dir = SlideDirection::None;
      if (config_.rotation_enabled && std::abs(frame.angular_velocity_rad_s) > config_.rotation_threshold_rad_s) {
        // Positive angular velocity about the pad normal is counter-clockwise.
        dir = frame.angular_velocity_rad_s > 0 ? SlideDirection::CounterClockwise : SlideDirection::Clockwise;
      } else {
        Eigen::Vector3d v(frame.velocity_mm_s[0], frame.velocity_mm_s[1], frame.velocity_mm_s[2]);
        dir = dominant_direction(v, config_.sliding_threshold_mm_s);
      }
      // The running pattern persists through sub-threshold frames and only
      // restarts on a new direction.
      if (dir != SlideDirection::None && dir != direction_) {
        direction_ = dir;
        schedule_ = sliding_schedule(dir, config_.translation_style);
        sliding_onset_ms_ = now_ms;
      }
      break;
    }

    case RenderMode::Vibro: {
      const bool was_idle = std::none_of(vibro_frequency_.begin(), vibro_frequency_.end(), [](double f) { return f > 0; });
      std::array<double, kChambers> freq{};
      for (int c = 0; c < kChambers; ++c) {
        auto id = frame.material_id[c];
        if (mask.test(c) && id != 0) freq[c] = config_.material_frequency[id - 1];
      }
      const bool now_active = std::any_of(freq.begin(), freq.end(), [](double f) { return f > 0; });
      if (was_idle && now_active) phase_origin_ms_ = now_ms;
      vibro_frequency_ = freq;
      break;
    }
  }
  return true;
}

void ControllerEmulator::watchdog(std::int64_t now_ms) {
  check_clock(now_ms);
  last_time_ms_ = now_ms;
  if (tripped_) return;
  if (!last_frame_ms_ || now_ms - *last_frame_ms_ >= config_.watchdog_timeout_ms) {
    tripped_ = true;
    ++counters_.watchdog_trips;
    contact_.reset();
    direction_ = SlideDirection::None;
    schedule_ = {};
    vibro_frequency_.fill(0.0);
  }
}

std::array<bool, kChambers> ControllerEmulator::desired(std::int64_t t_ms) const {
  std::array<bool, kChambers> want{};
  if (tripped_) return want;
  switch (config_.mode) {
    case RenderMode::ContactConfig:
      for (int c = 0; c < kChambers; ++c) want[c] = contact_.test(c);
      break;
    case RenderMode::Sliding:
      if (direction_ != SlideDirection::None) {
        auto active = schedule_.active_at(static_cast<double>(t_ms - sliding_onset_ms_) / 1e3);
        for (int c = 0; c < kChambers; ++c) want[c] = active.test(c);
      }
      break;
    case RenderMode::Vibro:
      for (int c = 0; c < kChambers; ++c)
        want[c] = vibro_frequency_[c] > 0 &&
                  square_wave_high(static_cast<double>(t_ms - phase_origin_ms_) / 1e3, vibro_frequency_[c]);
      break;
  }
  return want;
}

ValveCommand ControllerEmulator::tick(std::int64_t now_ms) {
  watchdog(now_ms);

  const auto want = desired(now_ms);
  for (int c = 0; c < kChambers; ++c) {
    if (want[c] == valve_[c]) continue;
    // Venting on a watchdog trip is not held back by the toggle spacing.
    const bool vent = tripped_ && !want[c];
    if (!vent && toggled_once_[c] && now_ms - last_toggle_ms_[c] < config_.min_toggle_ms) continue;
    valve_[c] = want[c];
    last_toggle_ms_[c] = now_ms;
    toggled_once_[c] = true;
  }

  ValveCommand cmd;
  cmd.open = valve_;
  cmd.time = static_cast<double>(now_ms) / 1e3;
  std::array<bool, kPumps> needed{};
  for (int c = 0; c < kChambers; ++c)
    if (valve_[c]) needed[config_.pump_of_chamber[c]] = true;
  if (!tripped_) {
    for (std::int64_t k = 1; k <= config_.pump_lookahead_ms; ++k) {
      auto ahead = desired(now_ms + k);
      for (int c = 0; c < kChambers; ++c)
        if (ahead[c]) needed[config_.pump_of_chamber[c]] = true;
      if (needed[0] && needed[1]) break;
    }
  }
  for (int p = 0; p < kPumps; ++p) cmd.duty[p] = needed[p] ? 1.0 : 0.0;
  return cmd;
}

void write_command_log(const std::filesystem::path& path, const std::vector<ValveCommand>& commands) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "time_s,v1,v2,v3,v4,dutyA,dutyB\n";
  for (const auto& c : commands) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.3f,%d,%d,%d,%d,%g,%g\n", c.time, c.open[0], c.open[1], c.open[2], c.open[3],
                  c.duty[0], c.duty[1]);
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace fabtip

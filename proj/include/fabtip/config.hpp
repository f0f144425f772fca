#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>

#include "fabtip/characterization.hpp"
#include "fabtip/psychophysics.hpp"
#include "fabtip/rendering.hpp"
#include "fabtip/rig.hpp"

namespace fabtip {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
  bool realtime = false;  // simulated clock unless set
  std::filesystem::path log_dir;  // JSONL per session; empty disables
  int stream_hz = 20;

  void validate() const;
};

/// Settings shared by the CLI and the session service. Every key is optional;
/// unknown keys are rejected.
///
///   {
///     "seed": 1,
///     "actuator":   {"width_m": 0.013, "length_m": 0.013, "stroke_limit_m": 0.0032,
///                    "calibration_csv": "table.csv"},
///     "dynamics":   {"preset": "default" | "bench", "tau_up_s": ..., "tau_down_s": ...},
///     "pump":       {"max_flow_lpm": 0.8, "curve_csv": "pump.csv"},
///     "constrained_height_m": 0.0005,
///     "controller": {"contact_threshold_mm": 2, "sliding_threshold_mm_s": 5,
///                    "translation_style": "pairs" | "singles", "rotation_threshold_rad_s": 0.5,
///                    "material_frequency_hz": [5, 30, 100], "watchdog_ms": 200,
///                    "min_toggle_ms": 5, "pump_lookahead_ms": 100},
///     "sensor":     {"gain_per_kpa": 1, "noise_fraction": 0.02},
///     "renderer":   {"alpha_linear": 0.15, "alpha_angular": 0.10, "pad_side_m": 0.03},
///     "frame_period_ms": 20,
///     "task":       {"repetitions": 5, "isi_s": 2, "vibro_on_s": 2, "vibro_off_s": 2,
///                    "patterns_file": "patterns.json"},
///     "service":    {"host": "127.0.0.1", "port": 8080, "realtime": false,
///                    "log_dir": "logs", "stream_hz": 20}
///   }
///
/// Relative file paths resolve against the config file's directory.
struct SystemConfig {
  std::uint64_t seed = 1;
  RigConfig rig{};
  RendererConfig renderer{};
  ContactPad pad{};
  TaskSpec task{};
  ServiceConfig service{};

  static SystemConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static SystemConfig from_file(const std::filesystem::path& path);

  /// Task settings with the configured timing and pattern set.
  TaskSpec task_for(TaskKind kind) const;
  /// Single-chamber bench with the configured actuator, dynamics and pump.
  BenchSetup bench() const;
};

}  // namespace fabtip

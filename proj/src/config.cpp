#include "fabtip/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>

#include "fabtip/errors.hpp"

namespace fabtip {

using nlohmann::json;

void ServiceConfig::validate() const {
  if (host.empty()) throw ConfigError("service.host must not be empty");
  if (stream_hz <= 0 || stream_hz > 1000) throw ConfigError("service.stream_hz must lie in 1..1000");
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items())
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError(path_ + ": unknown key '" + key + "'");
  }

  bool has(const char* key) const { return j_.contains(key); }

  Reader child(const char* key) const { return Reader(j_.at(key), path_ + "." + key); }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "an integer");
      if (std::is_unsigned_v<T> && v.get<long long>() < 0) fail(key, "a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "a number");
    } else {
      if (!v.is_string()) fail(key, "a string");
    }
    out = v.get<T>();
  }

  double number(const char* key, double fallback) const {
    double v = fallback;
    get(key, v);
    return v;
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(path_ + "." + key + ": expected " + what);
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

SystemConfig SystemConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  SystemConfig c;
  Reader root(j, "config");
  root.allow({"seed", "actuator", "dynamics", "pump", "constrained_height_m", "controller", "sensor", "renderer",
              "frame_period_ms", "task", "service"});
  root.get("seed", c.seed);
  auto& emu = c.rig.emulator;

  if (root.has("actuator")) {
    Reader a = root.child("actuator");
    a.allow({"width_m", "length_m", "stroke_limit_m", "calibration_csv"});
    a.get("width_m", emu.geometry.width);
    a.get("length_m", emu.geometry.length);
    if (a.has("stroke_limit_m")) emu.geometry.stroke_limit = a.number("stroke_limit_m", 0.0);
    if (a.has("calibration_csv")) {
      std::string p;
      a.get("calibration_csv", p);
      emu.law = CalibrationTable::from_csv(resolve(base_dir, p));
    }
  }

  if (root.has("dynamics")) {
    Reader d = root.child("dynamics");
    d.allow({"preset", "tau_up_s", "tau_down_s"});
    std::string preset = "default";
    d.get("preset", preset);
    if (preset == "bench")
      emu.dynamics = DynamicsParams::bench_calibrated();
    else if (preset != "default")
      throw ConfigError("config.dynamics.preset: expected 'default' or 'bench'");
    d.get("tau_up_s", emu.dynamics.tau_up);
    d.get("tau_down_s", emu.dynamics.tau_down);
  }

  if (root.has("pump")) {
    Reader p = root.child("pump");
    p.allow({"max_flow_lpm", "curve_csv"});
    if (p.has("curve_csv")) {
      std::string path;
      p.get("curve_csv", path);
      emu.pump = PumpModel::from_csv(resolve(base_dir, path));
    }
    if (p.has("max_flow_lpm")) emu.pump.max_flow = p.number("max_flow_lpm", 0.0) * 1e-3 / 60.0;
  }

  if (root.has("constrained_height_m")) emu.constrained_height.fill(root.number("constrained_height_m", 0.0));

  if (root.has("controller")) {
    Reader k = root.child("controller");
    k.allow({"contact_threshold_mm", "sliding_threshold_mm_s", "translation_style", "rotation_threshold_rad_s",
             "material_frequency_hz", "watchdog_ms", "min_toggle_ms", "pump_lookahead_ms"});
    auto& ctl = c.rig.controller;
    k.get("contact_threshold_mm", ctl.contact_threshold_mm);
    k.get("sliding_threshold_mm_s", ctl.sliding_threshold_mm_s);
    k.get("rotation_threshold_rad_s", ctl.rotation_threshold_rad_s);
    k.get("watchdog_ms", ctl.watchdog_timeout_ms);
    k.get("min_toggle_ms", ctl.min_toggle_ms);
    k.get("pump_lookahead_ms", ctl.pump_lookahead_ms);
    if (k.has("translation_style")) {
      std::string s;
      k.get("translation_style", s);
      if (s == "pairs")
        ctl.translation_style = TranslationStyle::ChamberPairs;
      else if (s == "singles")
        ctl.translation_style = TranslationStyle::SingleChambers;
      else
        throw ConfigError("config.controller.translation_style: expected 'pairs' or 'singles'");
    }
    if (k.has("material_frequency_hz")) {
      const json& f = k.raw().at("material_frequency_hz");
      if (!f.is_array() || f.size() != 3 || !std::all_of(f.begin(), f.end(), [](const json& v) { return v.is_number(); }))
        throw ConfigError("config.controller.material_frequency_hz: expected three numbers");
      for (int i = 0; i < 3; ++i) ctl.material_frequency[i] = f[i].get<double>();
    }
  }

  if (root.has("sensor")) {
    Reader s = root.child("sensor");
    s.allow({"gain_per_kpa", "noise_fraction"});
    s.get("gain_per_kpa", c.rig.sensor.gain_per_kpa);
    const double fraction = s.number("noise_fraction", 0.02);
    if (!(fraction >= 0.0)) throw ConfigError("config.sensor.noise_fraction must be non-negative");
    c.rig.sensor.noise_sigma = fraction * c.rig.sensor.full_scale();
  }

  if (root.has("renderer")) {
    Reader r = root.child("renderer");
    r.allow({"alpha_linear", "alpha_angular", "pad_side_m"});
    r.get("alpha_linear", c.renderer.alpha_linear);
    r.get("alpha_angular", c.renderer.alpha_angular);
    r.get("pad_side_m", c.pad.side);
  }

  root.get("frame_period_ms", c.rig.frame_period_ms);

  if (root.has("task")) {
    Reader t = root.child("task");
    t.allow({"repetitions", "isi_s", "vibro_on_s", "vibro_off_s", "patterns_file"});
    t.get("repetitions", c.task.repetitions);
    t.get("isi_s", c.task.isi);
    t.get("vibro_on_s", c.task.vibro_on);
    t.get("vibro_off_s", c.task.vibro_off);
    if (t.has("patterns_file")) {
      std::string p;
      t.get("patterns_file", p);
      c.task.patterns = PatternSet::from_json_file(resolve(base_dir, p));
    }
  }

  if (root.has("service")) {
    Reader s = root.child("service");
    s.allow({"host", "port", "realtime", "log_dir", "stream_hz"});
    s.get("host", c.service.host);
    s.get("port", c.service.port);
    s.get("realtime", c.service.realtime);
    s.get("stream_hz", c.service.stream_hz);
    if (s.has("log_dir")) {
      std::string p;
      s.get("log_dir", p);
      c.service.log_dir = resolve(base_dir, p);
    }
  }

  // Validate the assembled pieces so bad values fail at load time.
  c.rig.emulator.validate();
  c.rig.controller.validate();
  c.pad.validate();
  if (c.rig.frame_period_ms <= 0) throw ConfigError("config.frame_period_ms must be positive");
  if (!(c.rig.sensor.gain_per_kpa > 0.0)) throw ConfigError("config.sensor.gain_per_kpa must be positive");
  ema(0.0, 0.0, c.renderer.alpha_linear);
  ema(0.0, 0.0, c.renderer.alpha_angular);
  c.task.validate();
  c.service.validate();
  return c;
}

SystemConfig SystemConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

TaskSpec SystemConfig::task_for(TaskKind kind) const {
  TaskSpec t = task;
  t.kind = kind;
  return t;
}

BenchSetup SystemConfig::bench() const {
  BenchSetup b;
  b.geometry = rig.emulator.geometry;
  b.law = rig.emulator.law;
  b.dynamics = rig.emulator.dynamics;
  b.max_flow = rig.emulator.pump.max_flow;
  b.height = rig.emulator.constrained_height[0];
  b.supply = pump_pressure(1.0, rig.emulator.pump);
  return b;
}

}  // namespace fabtip

#include "fabtip/app.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fabtip/controller.hpp"
#include "fabtip/csv.hpp"
#include "fabtip/errors.hpp"
#include "fabtip/psychophysics.hpp"
#include "fabtip/rig.hpp"
#include "fabtip/sensing.hpp"

namespace fabtip::app {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path output_dir(const std::optional<fs::path>& out) {
  if (out) return *out;
  if (const char* env = std::getenv("HAPTICS_OUT"); env && *env) return env;
  throw ValidationError("no output directory: pass --out or set HAPTICS_OUT");
}

void claim_outputs(const fs::path& dir, std::initializer_list<const char*> files, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_directory(dir, ec))
    throw IoError("output path '" + dir.string() + "' is not a directory");
  if (!force)
    for (const char* f : files)
      if (fs::exists(dir / f, ec))
        throw ConfigError("'" + (dir / f).string() + "' exists; pass --force to overwrite");
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Round-trippable and locale-free, so reruns are byte-identical.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

json sim_run(const SimRunOptions& options, const SystemConfig& config) {
  const Scene scene = Scene::from_json_file(options.scene);
  const auto samples = read_trajectory_csv(options.trajectory);
  if (samples.empty()) throw ValidationError(options.trajectory.string() + ": no samples");
  claim_outputs(options.out, {"frames.bin", "commands.csv", "maps.csv", "peak_map.csv", "peak_map.pgm", "summary.json"},
                options.force);

  RigConfig rc = config.rig;
  rc.controller.mode = options.mode;
  rc.controller.rotation_enabled = false;  // the live sliding scene renders translations only
  rc.seed = config.seed;
  rc.record_commands = true;
  rc.record_frames = true;
  Rig rig(rc);
  HapticRenderer renderer(scene, config.pad, config.renderer);

  const double t0 = samples.front().timestamp;
  const auto end_ms = static_cast<std::int64_t>(std::ceil((samples.back().timestamp - t0) * 1e3 - 1e-9));
  std::size_t next = 0;
  const FrameSource source = [&](std::int64_t now) {
    const double t = t0 + static_cast<double>(now) / 1e3;
    while (next < samples.size() && samples[next].timestamp <= t + 1e-9) renderer.observe(samples[next++]);
    return renderer.last_sample() ? renderer.compose(0, t) : idle_frame();
  };

  std::ofstream maps(options.out / "maps.csv");
  if (!maps) throw IoError("cannot write maps.csv");
  maps << "time_s";
  for (int r = 0; r < kSensorSide; ++r)
    for (int c = 0; c < kSensorSide; ++c) maps << ",m" << r << c;
  maps << '\n';

  const double fs_reading = rc.sensor.full_scale();
  std::size_t written = 0, in_contact = 0;
  PressureGrid peak = PressureGrid::Zero();
  double peak_time = 0.0;
  while (rig.now_ms() < end_ms) {
    const auto& s = rig.tick(source);
    if (s.time_ms % rc.frame_period_ms != 0) continue;
    maps << fmt(static_cast<double>(s.time_ms) / 1e3);
    for (int r = 0; r < kSensorSide; ++r)
      for (int c = 0; c < kSensorSide; ++c) maps << ',' << fmt(s.map.values(r, c));
    maps << '\n';
    ++written;
    const auto blocks = block_means(s.map.values, rc.emulator.geometry);
    if (*std::max_element(blocks.begin(), blocks.end()) > 0.1 * fs_reading) ++in_contact;
    if (s.map.values.sum() > peak.sum()) {
      peak = s.map.values;
      peak_time = static_cast<double>(s.time_ms) / 1e3;
    }
  }
  if (!maps) throw IoError("write failed for maps.csv");
  maps.close();

  std::ofstream frames(options.out / "frames.bin", std::ios::binary);
  if (!frames) throw IoError("cannot write frames.bin");
  for (const auto& f : rig.frame_log()) frames.write(reinterpret_cast<const char*>(f.data()), f.size());
  if (!frames) throw IoError("write failed for frames.bin");
  frames.close();
  write_command_log(options.out / "commands.csv", rig.command_log());
  const auto clamp = export_map(upsample_bicubic(peak, 10), options.out / "peak_map", 1.25 * fs_reading);

  const auto& rx = rig.receiver().counters();
  const auto& ctl = rig.controller().counters();
  json summary = {{"mode", to_string(options.mode)},
                  {"seed", config.seed},
                  {"duration_ms", end_ms},
                  {"frames", rig.frame_log().size()},
                  {"maps", written},
                  {"maps_in_contact", in_contact},
                  {"peak_map_time_s", peak_time},
                  {"peak_map_clamped", clamp.clamped},
                  {"receiver", {{"accepted", rx.accepted}, {"stale", rx.stale}, {"duplicates", rx.duplicate},
                                {"corrupt", rx.bad_length + rx.bad_magic + rx.bad_version + rx.bad_crc + rx.bad_payload}}},
                  {"controller", {{"frames", ctl.frames}, {"rejected", ctl.rejected},
                                  {"watchdog_trips", ctl.watchdog_trips}}}};
  write_json(options.out / "summary.json", summary);
  return summary;
}

json characterize_sweep(const SweepPlan& plan, const BenchSetup& setup, const fs::path& out, bool force) {
  plan.validate();
  claim_outputs(out, {"bode.csv", "sweep.json"}, force);
  const auto run = run_sweep(plan, setup);
  run.bode.write_csv(out / "bode.csv");
  json j = {{"points", run.bode.freqs.size()},
            {"fmin_hz", plan.fmin},
            {"fmax_hz", plan.fmax},
            {"cycles", plan.cycles},
            {"bandwidth_hz", run.bode.bandwidth ? json(*run.bode.bandwidth) : json(nullptr)}};
  write_json(out / "sweep.json", j);
  return j;
}

json characterize_sweep_import(const fs::path& path, const fs::path& out, bool force) {
  const auto table = csv::read(path, {"freq_hz", "amplitude"});
  std::vector<double> f, a;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    f.push_back(table.rows[i][0]);
    a.push_back(table.rows[i][1]);
    if (!(f.back() > 0.0) || !(a.back() > 0.0))
      throw ValidationError(path.string() + ":" + std::to_string(table.lines[i]) +
                            ": frequency and amplitude must be positive");
    if (i > 0 && !(f[i] > f[i - 1]))
      throw ValidationError(path.string() + ":" + std::to_string(table.lines[i]) + ": frequencies must increase");
  }
  if (f.size() < 2) throw ValidationError(path.string() + ": need at least two frequencies");
  claim_outputs(out, {"bode.csv", "sweep.json"}, force);
  const auto b = bode(f, a);
  b.write_csv(out / "bode.csv");
  json j = {{"points", f.size()},
            {"source", "import"},
            {"bandwidth_hz", b.bandwidth ? json(*b.bandwidth) : json(nullptr)}};
  write_json(out / "sweep.json", j);
  return j;
}

namespace {

json step_json(const StepMetrics& m) {
  return {{"rise_ms", m.rise * 1e3}, {"fall_ms", m.fall * 1e3}, {"steady", m.steady}};
}

json durability_json(const DurabilityReport& r) {
  return {{"cycles", r.peak_force.size()},
          {"baseline_peak_n", r.peak_force.size() > 1 ? r.peak_force[1] : 0.0},
          {"max_drift", r.max_drift},
          {"final_drift", r.final_drift}};
}

void write_peaks(const fs::path& path, const DurabilityReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "cycle,peak_force_n,peak_pressure_pa\n";
  for (std::size_t i = 0; i < r.peak_force.size(); ++i)
    out << i + 1 << ',' << fmt(r.peak_force[i]) << ',' << fmt(i < r.peak_pressure.size() ? r.peak_pressure[i] : 0.0)
        << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

json characterize_step(const BenchSetup& setup, const fs::path& out, bool force) {
  claim_outputs(out, {"step.csv", "step.json"}, force);
  const auto run = run_step(setup);
  run.trajectory.write_csv(out / "step.csv");
  json j = step_json(run.metrics);
  j["on_s"] = run.on;
  j["off_s"] = run.off;
  write_json(out / "step.json", j);
  return j;
}

json characterize_step_import(const fs::path& path, const fs::path& out, bool force) {
  const auto rec = LabRecording::from_csv(path);
  claim_outputs(out, {"step.json"}, force);
  json j = step_json(step_metrics_from_recording(rec));
  j["source"] = "import";
  write_json(out / "step.json", j);
  return j;
}

json characterize_durability(const DurabilityPlan& plan, const BenchSetup& setup, const fs::path& out, bool force) {
  claim_outputs(out, {"durability.csv", "durability.json"}, force);
  const auto r = durability_run(plan, setup);
  write_peaks(out / "durability.csv", r);
  json j = durability_json(r);
  write_json(out / "durability.json", j);
  return j;
}

json characterize_durability_import(const fs::path& path, double period, const fs::path& out, bool force) {
  const auto rec = LabRecording::from_csv(path);
  claim_outputs(out, {"durability.csv", "durability.json"}, force);
  const auto r = durability_from_recording(rec, period);
  write_peaks(out / "durability.csv", r);
  json j = durability_json(r);
  j["source"] = "import";
  write_json(out / "durability.json", j);
  return j;
}

json study_run(TaskKind kind, std::uint64_t seed, const std::string& participant, const SystemConfig& config,
               const fs::path& out, bool force) {
  claim_outputs(out, {"trials.jsonl", "commands.csv", "analysis.json", "confusion.csv"}, force);
  const TaskSpec task = config.task_for(kind);
  RigConfig base = config.rig;
  base.record_commands = true;
  IdealObserverResponder responder(task, observer_config_for(base));
  const auto run = run_study(task, seed, participant, base, responder);
  write_jsonl(out / "trials.jsonl", run.records);
  write_command_log(out / "commands.csv", run.commands);
  const auto analysis = analyze(run.records, task);
  analysis.write_confusion_csv(out / "confusion.csv");
  json j = analysis.to_json();
  j["seed"] = seed;
  j["trials"] = run.records.size();
  write_json(out / "analysis.json", j);
  return j;
}

json study_analyze(const fs::path& in, const std::optional<fs::path>& out, bool force) {
  const auto records = read_jsonl(in);
  const auto analysis = analyze(records);
  json j = analysis.to_json();
  j["trials"] = records.size();
  if (out) {
    claim_outputs(*out, {"analysis.json", "confusion.csv"}, force);
    analysis.write_confusion_csv(*out / "confusion.csv");
    write_json(*out / "analysis.json", j);
  }
  return j;
}

}  // namespace fabtip::app

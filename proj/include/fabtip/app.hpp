#pragma once

// Command implementations behind the CLI. Each writes its files into an
// output directory and returns a JSON summary for stdout.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>

#include "fabtip/characterization.hpp"
#include "fabtip/config.hpp"

namespace fabtip::app {

/// `--out` if given, else $HAPTICS_OUT; ValidationError when neither is set.
std::filesystem::path output_dir(const std::optional<std::filesystem::path>& out);

/// Creates `dir` and refuses (ConfigError) to touch any existing `files` unless `force`.
void claim_outputs(const std::filesystem::path& dir, std::initializer_list<const char*> files, bool force);

struct SimRunOptions {
  std::filesystem::path scene;
  std::filesystem::path trajectory;
  RenderMode mode = RenderMode::ContactConfig;
  std::filesystem::path out;
  bool force = false;
};

/// Render -> wire -> controller -> emulator -> sensor over the trajectory.
/// Writes frames.bin (raw datagrams), commands.csv, maps.csv (one 6x6 map per
/// frame slot), peak_map.{csv,pgm} and summary.json.
nlohmann::json sim_run(const SimRunOptions& options, const SystemConfig& config);

nlohmann::json characterize_sweep(const SweepPlan& plan, const BenchSetup& setup, const std::filesystem::path& out,
                                  bool force);
/// Lab sweep: `freq_hz,amplitude` rows.
nlohmann::json characterize_sweep_import(const std::filesystem::path& csv, const std::filesystem::path& out,
                                         bool force);

nlohmann::json characterize_step(const BenchSetup& setup, const std::filesystem::path& out, bool force);
nlohmann::json characterize_step_import(const std::filesystem::path& csv, const std::filesystem::path& out,
                                        bool force);

nlohmann::json characterize_durability(const DurabilityPlan& plan, const BenchSetup& setup,
                                       const std::filesystem::path& out, bool force);
nlohmann::json characterize_durability_import(const std::filesystem::path& csv, double period,
                                              const std::filesystem::path& out, bool force);

/// Full observer-driven session. Writes trials.jsonl, commands.csv,
/// analysis.json and confusion.csv.
nlohmann::json study_run(TaskKind task, std::uint64_t seed, const std::string& participant,
                         const SystemConfig& config, const std::filesystem::path& out, bool force);

/// Analysis of a JSONL log; writes analysis.json and confusion.csv when `out` is set.
nlohmann::json study_analyze(const std::filesystem::path& in, const std::optional<std::filesystem::path>& out,
                             bool force);

}  // namespace fabtip::app

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fabtip/rendering.hpp"
#include "fabtip/rig.hpp"
#include "fabtip/stats.hpp"

namespace fabtip {

enum class TaskKind { Patterns, Sliding, Vibro };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// Contact patterns presented in the contact-configuration task, id = index + 1.
struct PatternSet {
  std::vector<ChamberSet> masks;

  /// Four singles, four edge pairs (front, back, left, right) and all four.
  static PatternSet defaults();
  /// JSON: {"patterns": {"1": [1], "2": [2], ...}} mapping id to chamber ids.
  static PatternSet from_json_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct TaskSpec {
  TaskKind kind = TaskKind::Patterns;
  int repetitions = 5;
  double isi = 2.0;        // s
  double vibro_on = 2.0;   // s
  double vibro_off = 2.0;  // s
  PatternSet patterns = PatternSet::defaults();

  static TaskSpec make(TaskKind kind);
  int stimulus_count() const;
  double chance() const { return 1.0 / stimulus_count(); }
  void validate() const;
};

/// Display name of a stimulus id (1-based) within a task.
std::string stimulus_name(const TaskSpec& task, int id);

/// Sliding stimulus ids 1..6 map to left, right, up, down, cw, ccw.
SlideDirection sliding_stimulus(int id);
/// Vibro stimulus ids 1..3 map to stone, fabric, wood.
Material vibro_stimulus(int id);

struct Trial {
  int index = 0;  // 0-based position in the schedule
  int stimulus = 0;
};

/// Each stimulus exactly `repetitions` times in a seeded Fisher-Yates order.
std::vector<Trial> schedule(const TaskSpec& task, std::uint64_t seed);

/// Rig settings for a task: controller mode, rotation decoding for sliding.
RigConfig rig_config_for(const TaskSpec& task, RigConfig base);

/// Frame content that realises one stimulus from `onset_ms` on.
class StimulusPresenter {
 public:
  StimulusPresenter(const TaskSpec& task, int stimulus, std::int64_t onset_ms);
  HapticFrame frame_at(std::int64_t now_ms) const;

 private:
  TaskSpec task_;
  int stimulus_;
  std::int64_t onset_ms_;
};

inline constexpr double kPresentedDepthMm = 5.0;
inline constexpr double kPresentedSpeedMmS = 20.0;
inline constexpr double kPresentedAngularRadS = 1.0;

struct ObserverConfig {
  double full_scale = SensorConfig{}.full_scale();
  std::int64_t patterns_window_ms = 500;
  std::int64_t sliding_window_ms = 1000;
  std::int64_t vibro_window_ms = 2000;
  /// Must match the controller's; sliding templates come from its schedules.
  TranslationStyle translation_style = TranslationStyle::ChamberPairs;

  std::int64_t window_ms(TaskKind kind) const;
};

/// One sensed map on the stream, time relative to stimulus onset.
struct ObservedMap {
  std::int64_t time_ms = 0;
  PressureGrid map = PressureGrid::Zero();
};

/// Observer settings that track a rig configuration.
ObserverConfig observer_config_for(const RigConfig& rig);

/// Decodes the presented stimulus id from the sensed stream; empty = abstain.
std::optional<int> ideal_observer(std::span<const ObservedMap> stream, const TaskSpec& task,
                                  const ObserverConfig& config = {});

class Responder {
 public:
  virtual ~Responder() = default;
  virtual void begin(const Trial& trial, std::int64_t onset_ms) = 0;
  /// Called after every tick while the stimulus runs. A value ends the trial;
  /// 0 records an abstention.
  virtual std::optional<int> observe(const RigSample& sample) = 0;
};

/// Closed-loop stand-in for a participant.
class IdealObserverResponder final : public Responder {
 public:
  IdealObserverResponder(TaskSpec task, ObserverConfig config = {}, std::int64_t latency_ms = 0);
  void begin(const Trial& trial, std::int64_t onset_ms) override;
  std::optional<int> observe(const RigSample& sample) override;

 private:
  TaskSpec task_;
  ObserverConfig config_;
  std::int64_t latency_ms_;
  std::int64_t onset_ms_ = 0;
  std::vector<ObservedMap> stream_;
  std::optional<int> decision_;
  std::int64_t decided_at_ = 0;
};

/// Answers after a fixed latency with a fixed id, or the presented one when `answer` is empty.
class FixedResponder final : public Responder {
 public:
  explicit FixedResponder(std::int64_t latency_ms, std::optional<int> answer = {});
  void begin(const Trial& trial, std::int64_t onset_ms) override;
  std::optional<int> observe(const RigSample& sample) override;

 private:
  std::int64_t latency_ms_;
  std::optional<int> answer_;
  int stimulus_ = 0;
  std::int64_t onset_ms_ = 0;
};

struct TrialRecord {
  TaskKind task = TaskKind::Patterns;
  std::string participant;
  int trial_index = 0;
  int stimulus_id = 0;
  int response_id = 0;  // 0 = abstained
  double response_time = 0.0;  // s, onset to response
  double onset_time = 0.0;     // s on the session clock
  double response_timestamp = 0.0;

  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& j);
};

std::vector<TrialRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const TrialRecord> records);
void append_jsonl(const std::filesystem::path& path, const TrialRecord& record);

/// Presents `trial` until the responder answers, then runs the inter-stimulus
/// interval with idle frames. Throws AnalysisError if `timeout_ms` elapses first.
TrialRecord run_trial(Rig& rig, const TaskSpec& task, const Trial& trial, Responder& responder,
                      const std::string& participant, std::optional<std::int64_t> timeout_ms = {});

struct StudyRun {
  std::vector<TrialRecord> records;
  std::vector<ValveCommand> commands;
};

/// Whole session: schedule, rig, and every trial in order.
StudyRun run_study(const TaskSpec& task, std::uint64_t seed, const std::string& participant, const RigConfig& base,
                   Responder& responder, std::optional<std::int64_t> timeout_ms = {});

struct Analysis {
  TaskKind task = TaskKind::Patterns;
  int classes = 0;
  Eigen::MatrixXi confusion;     // rows presented, cols reported
  std::vector<int> abstentions;  // per presented class
  std::vector<double> class_accuracy;
  double overall_accuracy = 0.0;
  std::vector<std::string> participants;
  std::vector<double> participant_accuracy;
  double accuracy_mean = 0.0;
  double accuracy_sd = 0.0;
  double chance = 0.0;
  double rt_mean = 0.0;
  double rt_sd = 0.0;
  std::optional<stats::TestResult> accuracy_vs_chance;

  nlohmann::json to_json() const;
  void write_confusion_csv(const std::filesystem::path& path) const;
};

/// Confusion matrix and accuracy/RT statistics for one task's records.
/// Throws ValidationError for mixed tasks, AnalysisError for absent classes.
Analysis analyze(std::span<const TrialRecord> records, const TaskSpec& task);
Analysis analyze(std::span<const TrialRecord> records);

}  // namespace fabtip

#include "fabtip/psychophysics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "fabtip/errors.hpp"

namespace fabtip {

using nlohmann::json;

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Patterns: return "patterns";
    case TaskKind::Sliding: return "sliding";
    case TaskKind::Vibro: return "vibro";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (auto k : {TaskKind::Patterns, TaskKind::Sliding, TaskKind::Vibro})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown task '" + std::string(name) + "' (expected patterns, sliding or vibro)");
}

PatternSet PatternSet::defaults() {
  return {{chambers({1}), chambers({2}), chambers({3}), chambers({4}), chambers({1, 2}), chambers({3, 4}),
           chambers({1, 3}), chambers({2, 4}), chambers({1, 2, 3, 4})}};
}

PatternSet PatternSet::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pattern set '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (!j.contains("patterns") || !j["patterns"].is_object())
    throw ValidationError(path.string() + ": expected an object 'patterns'");
  std::map<int, ChamberSet> by_id;
  for (const auto& [key, value] : j["patterns"].items()) {
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": pattern id '" + key + "' is not an integer");
    }
    if (!value.is_array() || value.empty())
      throw ValidationError(path.string() + ": pattern " + key + " needs a non-empty chamber list");
    ChamberSet mask;
    for (const auto& c : value) {
      if (!c.is_number_integer() || c.get<int>() < 1 || c.get<int>() > 4)
        throw ValidationError(path.string() + ": pattern " + key + " has a chamber outside 1..4");
      mask.set(c.get<int>() - 1);
    }
    by_id[id] = mask;
  }
  PatternSet set;
  int expect = 1;
  for (const auto& [id, mask] : by_id) {
    if (id != expect) throw ValidationError(path.string() + ": pattern ids must run 1..n without gaps");
    set.masks.push_back(mask);
    ++expect;
  }
  return set;
}

json PatternSet::to_json() const {
  json patterns = json::object();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    json ids = json::array();
    for (int c = 0; c < 4; ++c)
      if (masks[i].test(c)) ids.push_back(c + 1);
    patterns[std::to_string(i + 1)] = ids;
  }
  return {{"patterns", patterns}};
}

TaskSpec TaskSpec::make(TaskKind kind) {
  TaskSpec t;
  t.kind = kind;
  return t;
}

int TaskSpec::stimulus_count() const {
  switch (kind) {
    case TaskKind::Patterns: return static_cast<int>(patterns.masks.size());
    case TaskKind::Sliding: return 6;
    case TaskKind::Vibro: return 3;
  }
  return 0;
}

void TaskSpec::validate() const {
  if (repetitions < 1) throw ValidationError("repetitions must be at least 1");
  if (!(isi >= 0.0) || !(vibro_on > 0.0) || !(vibro_off >= 0.0)) throw ValidationError("task timing out of range");
  if (kind == TaskKind::Patterns) {
    if (patterns.masks.size() != 9) throw ValidationError("the pattern task uses nine patterns");
    std::set<unsigned long> seen;
    for (const auto& m : patterns.masks) {
      if (m.none()) throw ValidationError("empty contact pattern");
      if (!seen.insert(m.to_ulong()).second) throw ValidationError("duplicate contact pattern");
    }
  }
}

SlideDirection sliding_stimulus(int id) {
  static constexpr SlideDirection kOrder[] = {SlideDirection::Left, SlideDirection::Right,     SlideDirection::Up,
                                              SlideDirection::Down, SlideDirection::Clockwise, SlideDirection::CounterClockwise};
  if (id < 1 || id > 6) throw ValidationError("sliding stimulus id must lie in 1..6");
  return kOrder[id - 1];
}

Material vibro_stimulus(int id) {
  if (id < 1 || id > 3) throw ValidationError("vibro stimulus id must lie in 1..3");
  return static_cast<Material>(id);
}

std::string stimulus_name(const TaskSpec& task, int id) {
  if (id < 1 || id > task.stimulus_count())
    throw ValidationError("stimulus id " + std::to_string(id) + " outside 1.." + std::to_string(task.stimulus_count()));
  switch (task.kind) {
    case TaskKind::Patterns: {
      std::string name;
      for (int c = 0; c < 4; ++c)
        if (task.patterns.masks[id - 1].test(c)) name += (name.empty() ? "" : "+") + std::to_string(c + 1);
      return name;
    }
    case TaskKind::Sliding: return std::string(to_string(sliding_stimulus(id)));
    case TaskKind::Vibro: return std::string(to_string(vibro_stimulus(id)));
  }
  return {};
}

namespace {

// Unbiased draw from [0, bound) on the raw 64-bit engine output, so the
// shuffle does not depend on the standard library's distribution code.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

}  // namespace

std::vector<Trial> schedule(const TaskSpec& task, std::uint64_t seed) {
  task.validate();
  std::vector<int> ids;
  for (int s = 1; s <= task.stimulus_count(); ++s)
    for (int r = 0; r < task.repetitions; ++r) ids.push_back(s);
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[bounded(rng, i)]);
  std::vector<Trial> trials(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) trials[i] = {static_cast<int>(i), ids[i]};
  return trials;
}

RigConfig rig_config_for(const TaskSpec& task, RigConfig base) {
  switch (task.kind) {
    case TaskKind::Patterns: base.controller.mode = RenderMode::ContactConfig; break;
    case TaskKind::Sliding:
      base.controller.mode = RenderMode::Sliding;
      base.controller.rotation_enabled = true;
      break;
    case TaskKind::Vibro: base.controller.mode = RenderMode::Vibro; break;
  }
  return base;
}

StimulusPresenter::StimulusPresenter(const TaskSpec& task, int stimulus, std::int64_t onset_ms)
    : task_(task), stimulus_(stimulus), onset_ms_(onset_ms) {
  stimulus_name(task_, stimulus_);  // range check
}

HapticFrame StimulusPresenter::frame_at(std::int64_t now_ms) const {
  HapticFrame f;
  if (now_ms < onset_ms_) return f;
  const auto depth = static_cast<float>(kPresentedDepthMm);
  switch (task_.kind) {
    case TaskKind::Patterns: {
      const auto& mask = task_.patterns.masks[stimulus_ - 1];
      for (int c = 0; c < 4; ++c) f.indentation_mm[c] = mask.test(c) ? depth : 0.0f;
      break;
    }
    case TaskKind::Sliding: {
      f.indentation_mm.fill(depth);
      const auto speed = static_cast<float>(kPresentedSpeedMmS);
      const auto omega = static_cast<float>(kPresentedAngularRadS);
      switch (sliding_stimulus(stimulus_)) {
        case SlideDirection::Left: f.velocity_mm_s[0] = -speed; break;
        case SlideDirection::Right: f.velocity_mm_s[0] = speed; break;
        case SlideDirection::Up: f.velocity_mm_s[1] = speed; break;
        case SlideDirection::Down: f.velocity_mm_s[1] = -speed; break;
        case SlideDirection::Clockwise: f.angular_velocity_rad_s = -omega; break;
        case SlideDirection::CounterClockwise: f.angular_velocity_rad_s = omega; break;
        case SlideDirection::None: break;
      }
      break;
    }
    case TaskKind::Vibro: {
      const auto on = static_cast<std::int64_t>(std::llround(task_.vibro_on * 1e3));
      const auto off = static_cast<std::int64_t>(std::llround(task_.vibro_off * 1e3));
      if ((now_ms - onset_ms_) % (on + off) < on) {
        f.indentation_mm.fill(depth);
        f.material_id.fill(static_cast<std::uint8_t>(stimulus_));
      }
      break;
    }
  }
  return f;
}

std::int64_t ObserverConfig::window_ms(TaskKind kind) const {
  switch (kind) {
    case TaskKind::Patterns: return patterns_window_ms;
    case TaskKind::Sliding: return sliding_window_ms;
    case TaskKind::Vibro: return vibro_window_ms;
  }
  return 0;
}

ObserverConfig observer_config_for(const RigConfig& rig) {
  ObserverConfig c;
  c.full_scale = rig.sensor.full_scale();
  c.translation_style = rig.controller.translation_style;
  return c;
}

namespace {

std::optional<int> decode_pattern(std::span<const ObservedMap> stream, const TaskSpec& task, const ObserverConfig& cfg) {
  std::array<double, 4> sum{};
  for (const auto& m : stream) {
    const auto b = block_means(m.map);
    for (int c = 0; c < 4; ++c) sum[c] += b[c];
  }
  ChamberSet mask;
  for (int c = 0; c < 4; ++c)
    if (sum[c] / static_cast<double>(stream.size()) > 0.5 * cfg.full_scale) mask.set(c);
  if (mask.none()) return std::nullopt;
  int best = 0;
  std::size_t best_distance = 5;
  for (std::size_t i = 0; i < task.patterns.masks.size(); ++i) {
    const std::size_t d = (task.patterns.masks[i] ^ mask).count();
    if (d < best_distance) {
      best_distance = d;
      best = static_cast<int>(i) + 1;
    }
  }
  return best;
}

std::optional<int> decode_sliding(std::span<const ObservedMap> stream, const ObserverConfig& cfg) {
  std::array<std::optional<double>, 4> onset;
  for (const auto& m : stream) {
    const auto b = block_means(m.map);
    for (int c = 0; c < 4; ++c)
      if (!onset[c] && b[c] > 0.5 * cfg.full_scale) onset[c] = static_cast<double>(m.time_ms) / 1e3;
  }
  double first = std::numeric_limits<double>::infinity();
  for (const auto& o : onset)
    if (o) first = std::min(first, *o);
  if (!std::isfinite(first)) return std::nullopt;

  constexpr double kMissing = 1e6;
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int id = 1; id <= 6; ++id) {
    const auto sched = sliding_schedule(sliding_stimulus(id), cfg.translation_style);
    std::array<std::optional<double>, 4> expected;
    for (const auto& e : sched.events)
      for (int c = 0; c < 4; ++c)
        if (e.chambers.test(c) && !expected[c]) expected[c] = e.onset;
    double cost = 0.0;
    for (int c = 0; c < 4; ++c) {
      if (onset[c].has_value() != expected[c].has_value())
        cost += kMissing;
      else if (onset[c])
        cost += std::pow(*onset[c] - first - *expected[c], 2);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = id;
    }
  }
  return best;
}

std::optional<int> decode_vibro(std::span<const ObservedMap> stream, const ObserverConfig& cfg) {
  if (stream.size() < 2) return std::nullopt;
  std::vector<double> total(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) total[i] = stream[i].map.sum();
  const double m = stats::mean(total);
  const double cells = kSensorSide * kSensorSide;
  if (m < 0.05 * cells * cfg.full_scale) return std::nullopt;
  const double sd = stats::stddev(total);
  if (!(sd > 0.0)) return std::nullopt;
  // Schmitt trigger around the mean so noise does not add crossings.
  const double band = 0.25 * sd;
  int state = total[0] >= m ? 1 : -1;
  int transitions = 0;
  for (double v : total) {
    if (state < 0 && v > m + band) {
      state = 1;
      ++transitions;
    } else if (state > 0 && v < m - band) {
      state = -1;
      ++transitions;
    }
  }
  const double span_s = static_cast<double>(stream.back().time_ms - stream.front().time_ms + 1) / 1e3;
  const double f = transitions / (2.0 * span_s);
  if (f <= 0.0) return std::nullopt;
  int best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int id = 1; id <= 3; ++id) {
    const double d = std::abs(std::log(f / material_frequency(vibro_stimulus(id))));
    if (d < best_distance) {
      best_distance = d;
      best = id;
    }
  }
  return best;
}

}  // namespace

std::optional<int> ideal_observer(std::span<const ObservedMap> stream, const TaskSpec& task,
                                  const ObserverConfig& config) {
  if (stream.empty()) return std::nullopt;
  switch (task.kind) {
    case TaskKind::Patterns: return decode_pattern(stream, task, config);
    case TaskKind::Sliding: return decode_sliding(stream, config);
    case TaskKind::Vibro: return decode_vibro(stream, config);
  }
  return std::nullopt;
}

IdealObserverResponder::IdealObserverResponder(TaskSpec task, ObserverConfig config, std::int64_t latency_ms)
    : task_(std::move(task)), config_(config), latency_ms_(latency_ms) {
  if (latency_ms_ < 0) throw ConfigError("responder latency must be non-negative");
}

void IdealObserverResponder::begin(const Trial&, std::int64_t onset_ms) {
  onset_ms_ = onset_ms;
  stream_.clear();
  decision_.reset();
}

std::optional<int> IdealObserverResponder::observe(const RigSample& sample) {
  const std::int64_t rel = sample.time_ms - onset_ms_;
  const std::int64_t window = config_.window_ms(task_.kind);
  if (!decision_) {
    stream_.push_back({rel, sample.map.values});
    if (rel >= window) {
      decision_ = ideal_observer(stream_, task_, config_).value_or(0);
      decided_at_ = rel;
    }
  }
  if (decision_ && rel >= decided_at_ + latency_ms_) return decision_;
  return std::nullopt;
}

FixedResponder::FixedResponder(std::int64_t latency_ms, std::optional<int> answer)
    : latency_ms_(latency_ms), answer_(answer) {
  if (latency_ms_ < 1) throw ConfigError("responder latency must be at least one tick");
}

void FixedResponder::begin(const Trial& trial, std::int64_t onset_ms) {
  stimulus_ = trial.stimulus;
  onset_ms_ = onset_ms;
}

std::optional<int> FixedResponder::observe(const RigSample& sample) {
  if (sample.time_ms - onset_ms_ >= latency_ms_) return answer_.value_or(stimulus_);
  return std::nullopt;
}

json TrialRecord::to_json() const {
  return {{"task", to_string(task)},           {"participant", participant},
          {"trial", trial_index},              {"stimulus", stimulus_id},
          {"response", response_id},           {"rt_s", response_time},
          {"onset_s", onset_time},             {"response_s", response_timestamp}};
}

TrialRecord TrialRecord::from_json(const json& j) {
  TrialRecord r;
  try {
    r.task = parse_task_kind(j.at("task").get<std::string>());
    r.participant = j.at("participant").get<std::string>();
    r.trial_index = j.at("trial").get<int>();
    r.stimulus_id = j.at("stimulus").get<int>();
    r.response_id = j.at("response").get<int>();
    r.response_time = j.at("rt_s").get<double>();
    r.onset_time = j.value("onset_s", 0.0);
    r.response_timestamp = j.value("response_s", r.onset_time + r.response_time);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("trial record: ") + e.what());
  }
  const int k = TaskSpec::make(r.task).stimulus_count();
  if (r.stimulus_id < 1 || r.stimulus_id > k) throw ValidationError("trial record: stimulus id out of range");
  if (r.response_id < 0 || r.response_id > k) throw ValidationError("trial record: response id out of range");
  if (!(r.response_time > 0.0)) throw ValidationError("trial record: response time must be positive");
  return r;
}

std::vector<TrialRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(TrialRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const TrialRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void append_jsonl(const std::filesystem::path& path, const TrialRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to '" + path.string() + "'");
  out << record.to_json().dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrialRecord run_trial(Rig& rig, const TaskSpec& task, const Trial& trial, Responder& responder,
                      const std::string& participant, std::optional<std::int64_t> timeout_ms) {
  // Stimuli start on a frame slot so the first frame carries them.
  const std::int64_t period = rig.config().frame_period_ms;
  const FrameSource idle = [](std::int64_t) { return idle_frame(); };
  while (rig.now_ms() % period != 0) rig.tick(idle);

  const std::int64_t onset = rig.now_ms();
  const StimulusPresenter presenter(task, trial.stimulus, onset);
  const FrameSource stimulus = [&](std::int64_t t) { return presenter.frame_at(t); };
  responder.begin(trial, onset);

  std::optional<int> response;
  while (!response) {
    const auto& sample = rig.tick(stimulus);
    response = responder.observe(sample);
    if (!response && timeout_ms && sample.time_ms - onset >= *timeout_ms)
      throw AnalysisError("responder timed out on trial " + std::to_string(trial.index + 1));
  }
  const std::int64_t answered = rig.now_ms();

  const auto isi = static_cast<std::int64_t>(std::llround(task.isi * 1e3));
  for (std::int64_t k = 0; k < isi; ++k) rig.tick(idle);

  TrialRecord r;
  r.task = task.kind;
  r.participant = participant;
  r.trial_index = trial.index;
  r.stimulus_id = trial.stimulus;
  r.response_id = *response;
  r.onset_time = static_cast<double>(onset) / 1e3;
  r.response_timestamp = static_cast<double>(answered) / 1e3;
  r.response_time = static_cast<double>(answered - onset) / 1e3;
  return r;
}

StudyRun run_study(const TaskSpec& task, std::uint64_t seed, const std::string& participant, const RigConfig& base,
                   Responder& responder, std::optional<std::int64_t> timeout_ms) {
  const auto trials = schedule(task, seed);
  RigConfig cfg = rig_config_for(task, base);
  cfg.seed = seed;
  Rig rig(cfg);
  StudyRun run;
  for (const auto& t : trials) run.records.push_back(run_trial(rig, task, t, responder, participant, timeout_ms));
  run.commands = rig.command_log();
  return run;
}

Analysis analyze(std::span<const TrialRecord> records, const TaskSpec& task) {
  const int k = task.stimulus_count();
  Analysis a;
  a.task = task.kind;
  a.classes = k;
  a.chance = 1.0 / k;
  a.confusion = Eigen::MatrixXi::Zero(k, k);
  a.abstentions.assign(k, 0);

  std::vector<int> presented(k, 0), correct(k, 0);
  std::map<std::string, std::pair<int, int>> by_participant;  // correct, total
  std::vector<double> rts;
  for (const auto& r : records) {
    if (r.task != task.kind)
      throw ValidationError("mixed-task log: found " + std::string(to_string(r.task)) + " records in a " +
                            std::string(to_string(task.kind)) + " analysis");
    if (r.stimulus_id < 1 || r.stimulus_id > k || r.response_id < 0 || r.response_id > k)
      throw ValidationError("trial record ids outside 1.." + std::to_string(k));
    const int s = r.stimulus_id - 1;
    ++presented[s];
    if (r.response_id == 0)
      ++a.abstentions[s];
    else
      ++a.confusion(s, r.response_id - 1);
    const bool hit = r.response_id == r.stimulus_id;
    correct[s] += hit;
    auto& p = by_participant[r.participant];
    p.first += hit;
    ++p.second;
    rts.push_back(r.response_time);
  }

  std::string missing;
  for (int s = 0; s < k; ++s)
    if (presented[s] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(s + 1);
  if (!missing.empty()) throw AnalysisError("no trials for stimulus id(s) " + missing);

  int hits = 0;
  for (int s = 0; s < k; ++s) {
    a.class_accuracy.push_back(static_cast<double>(correct[s]) / presented[s]);
    hits += correct[s];
  }
  a.overall_accuracy = static_cast<double>(hits) / static_cast<double>(records.size());

  for (const auto& [id, p] : by_participant) {
    a.participants.push_back(id);
    a.participant_accuracy.push_back(static_cast<double>(p.first) / p.second);
  }
  a.accuracy_mean = stats::mean(a.participant_accuracy);
  a.accuracy_sd = a.participant_accuracy.size() > 1 ? stats::stddev(a.participant_accuracy) : 0.0;
  if (a.participant_accuracy.size() > 1 && a.accuracy_sd > 0.0)
    a.accuracy_vs_chance = stats::one_sample_t(a.participant_accuracy, a.chance);
  a.rt_mean = stats::mean(rts);
  a.rt_sd = rts.size() > 1 ? stats::stddev(rts) : 0.0;
  return a;
}

Analysis analyze(std::span<const TrialRecord> records) {
  if (records.empty()) throw AnalysisError("no trial records");
  return analyze(records, TaskSpec::make(records.front().task));
}

json Analysis::to_json() const {
  json matrix = json::array();
  for (int i = 0; i < confusion.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < confusion.cols(); ++j) row.push_back(confusion(i, j));
    matrix.push_back(row);
  }
  json participants_json = json::array();
  for (std::size_t i = 0; i < participants.size(); ++i)
    participants_json.push_back({{"id", participants[i]}, {"accuracy", participant_accuracy[i]}});
  json j = {{"task", to_string(task)},
            {"classes", classes},
            {"confusion", matrix},
            {"abstentions", abstentions},
            {"class_accuracy", class_accuracy},
            {"overall_accuracy", overall_accuracy},
            {"accuracy_mean", accuracy_mean},
            {"accuracy_sd", accuracy_sd},
            {"participants", participants_json},
            {"chance", chance},
            {"rt_mean_s", rt_mean},
            {"rt_sd_s", rt_sd}};
  if (accuracy_vs_chance)
    j["accuracy_vs_chance"] = {{"t", accuracy_vs_chance->statistic}, {"p", accuracy_vs_chance->p_value}};
  else
    j["accuracy_vs_chance"] = nullptr;
  return j;
}

void Analysis::write_confusion_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "presented";
  for (int j = 0; j < classes; ++j) out << ',' << j + 1;
  out << ",abstained\n";
  for (int i = 0; i < classes; ++i) {
    out << i + 1;
    for (int j = 0; j < classes; ++j) out << ',' << confusion(i, j);
    out << ',' << abstentions[i] << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace fabtip

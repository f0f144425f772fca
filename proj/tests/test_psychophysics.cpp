#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <nlohmann/json.hpp>
#include <random>

#include "fabtip/errors.hpp"
#include "fabtip/psychophysics.hpp"

using namespace fabtip;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TrialRecord record(TaskKind task, const std::string& who, int stimulus, int response, double rt = 1.0) {
  TrialRecord r;
  r.task = task;
  r.participant = who;
  r.stimulus_id = stimulus;
  r.response_id = response;
  r.response_time = rt;
  return r;
}

int present_once(TaskKind kind, int stimulus, double noise_sigma, std::uint64_t seed) {
  auto task = TaskSpec::make(kind);
  RigConfig base;
  base.sensor.noise_sigma = noise_sigma;
  base.seed = seed;
  Rig rig(rig_config_for(task, base));
  IdealObserverResponder observer(task, observer_config_for(rig.config()));
  return run_trial(rig, task, {0, stimulus}, observer, "p", 20000).response_id;
}

}  // namespace

TEST_CASE("task specs") {
  CHECK(TaskSpec::make(TaskKind::Patterns).stimulus_count() == 9);
  CHECK(TaskSpec::make(TaskKind::Sliding).stimulus_count() == 6);
  CHECK(TaskSpec::make(TaskKind::Vibro).stimulus_count() == 3);
  CHECK(TaskSpec::make(TaskKind::Patterns).chance() == doctest::Approx(1.0 / 9));
  CHECK(TaskSpec::make(TaskKind::Sliding).chance() == doctest::Approx(1.0 / 6));
  CHECK(TaskSpec::make(TaskKind::Vibro).chance() == doctest::Approx(1.0 / 3));
  CHECK(parse_task_kind("vibro") == TaskKind::Vibro);
  CHECK_THROWS_AS(parse_task_kind("texture"), ValidationError);
  auto bad = TaskSpec::make(TaskKind::Vibro);
  bad.repetitions = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  CHECK(sliding_stimulus(1) == SlideDirection::Left);
  CHECK(sliding_stimulus(6) == SlideDirection::CounterClockwise);
  CHECK(vibro_stimulus(2) == Material::Fabric);
  CHECK_THROWS(sliding_stimulus(7));
}

TEST_CASE("default pattern set and pattern files") {
  auto p = PatternSet::defaults();
  REQUIRE(p.masks.size() == 9);
  CHECK(p.masks[0] == chambers({1}));
  CHECK(p.masks[4] == chambers({1, 2}));
  CHECK(p.masks[8] == chambers({1, 2, 3, 4}));
  auto file = PatternSet::from_json_file(FABTIP_DEMO_DATA "/patterns.json");
  CHECK(file.masks.size() == 9);

  auto dir = std::filesystem::temp_directory_path() / "fabtip_patterns_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "gap.json") << R"({"patterns":{"1":[1],"3":[2]}})";
  std::ofstream(dir / "range.json") << R"({"patterns":{"1":[5]}})";
  CHECK_THROWS_AS(PatternSet::from_json_file(dir / "gap.json"), ValidationError);
  CHECK_THROWS_AS(PatternSet::from_json_file(dir / "range.json"), ValidationError);
  std::ofstream(dir / "round.json") << p.to_json().dump();
  CHECK(PatternSet::from_json_file(dir / "round.json").masks == p.masks);
  std::filesystem::remove_all(dir);
}

TEST_CASE("schedule balance and determinism") {
  auto task = TaskSpec::make(TaskKind::Patterns);
  auto a = schedule(task, 7);
  REQUIRE(a.size() == 45);
  std::map<int, int> counts;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].index == static_cast<int>(i));
    ++counts[a[i].stimulus];
  }
  CHECK(counts.size() == 9);
  for (auto [id, n] : counts) CHECK(n == 5);

  auto b = schedule(task, 7), c = schedule(task, 8);
  auto stimuli = [](const std::vector<Trial>& t) {
    std::vector<int> s;
    for (auto x : t) s.push_back(x.stimulus);
    return s;
  };
  CHECK(stimuli(a) == stimuli(b));
  CHECK(stimuli(a) != stimuli(c));
  CHECK(schedule(TaskSpec::make(TaskKind::Sliding), 1).size() == 30);
  CHECK(schedule(TaskSpec::make(TaskKind::Vibro), 1).size() == 15);
}

TEST_CASE("fixed responder timing") {
  auto task = TaskSpec::make(TaskKind::Patterns);
  Rig rig(rig_config_for(task, RigConfig{}));
  FixedResponder responder(100);
  auto r = run_trial(rig, task, {0, 3}, responder, "p1");
  CHECK(std::abs(r.response_time - 0.100) <= 0.001);
  CHECK(r.response_id == 3);
  CHECK(r.onset_time == 0.0);
  // Response plus the 2 s interval with idle frames.
  CHECK(rig.now_ms() == 100 + 2000);

  auto r2 = run_trial(rig, task, {1, 5}, responder, "p1");
  CHECK(r2.onset_time == doctest::Approx(2.100));
  CHECK(static_cast<std::int64_t>(std::llround(r2.onset_time * 1e3)) % 20 == 0);

  FixedResponder wrong(50, 1);
  CHECK(run_trial(rig, task, {2, 4}, wrong, "p1").response_id == 1);
  CHECK_THROWS_AS(FixedResponder(0), ConfigError);
}

TEST_CASE("timeout is opt-in") {
  auto task = TaskSpec::make(TaskKind::Vibro);
  Rig rig(rig_config_for(task, RigConfig{}));
  FixedResponder slow(5000);
  CHECK_THROWS_AS(run_trial(rig, task, {0, 1}, slow, "p", 1000), AnalysisError);
}

TEST_CASE("closed loop without noise recovers every stimulus") {
  for (auto kind : {TaskKind::Patterns, TaskKind::Sliding, TaskKind::Vibro}) {
    const int k = TaskSpec::make(kind).stimulus_count();
    for (int id = 1; id <= k; ++id) {
      CAPTURE(to_string(kind));
      CAPTURE(id);
      CHECK(present_once(kind, id, 0.0, 1) == id);
    }
  }
}

TEST_CASE("closed loop with 5% sensor noise") {
  const double sigma = 0.05 * SensorConfig{}.full_scale();
  for (auto kind : {TaskKind::Patterns, TaskKind::Sliding, TaskKind::Vibro}) {
    const int k = TaskSpec::make(kind).stimulus_count();
    int correct = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
      for (int id = 1; id <= k; ++id, ++total) correct += present_once(kind, id, sigma, seed) == id;
    CHECK(correct >= 0.9 * total);
  }
}

TEST_CASE("observer abstains on an all-off stream") {
  std::vector<ObservedMap> stream(2000);
  for (std::size_t i = 0; i < stream.size(); ++i) stream[i].time_ms = static_cast<std::int64_t>(i);
  for (auto kind : {TaskKind::Patterns, TaskKind::Sliding, TaskKind::Vibro})
    CHECK_FALSE(ideal_observer(stream, TaskSpec::make(kind)));
}

TEST_CASE("observer reads a synthetic 30 Hz stream as fabric") {
  std::vector<ObservedMap> stream(2000);
  const double fs = SensorConfig{}.full_scale();
  for (std::size_t i = 0; i < stream.size(); ++i) {
    stream[i].time_ms = static_cast<std::int64_t>(i);
    const bool high = (i * 30 / 500) % 2 == 0;  // 30 Hz square wave at 1 kHz
    stream[i].map.setConstant(high ? 0.8 * fs : 0.2 * fs);
  }
  CHECK(ideal_observer(stream, TaskSpec::make(TaskKind::Vibro)) == 2);
}

TEST_CASE("analysis") {
  auto patterns = TaskSpec::make(TaskKind::Patterns);
  std::vector<TrialRecord> all_correct;
  for (int id = 1; id <= 9; ++id) all_correct.push_back(record(TaskKind::Patterns, "a", id, id));
  auto a = analyze(all_correct, patterns);
  CHECK(a.confusion == Eigen::MatrixXi::Identity(9, 9));
  CHECK(a.overall_accuracy == 1.0);
  CHECK(a.chance == doctest::Approx(1.0 / 9));
  CHECK_FALSE(a.accuracy_vs_chance);

  // Two participants at 0.9 and 1.0.
  auto vibro = TaskSpec::make(TaskKind::Vibro);
  std::vector<TrialRecord> two;
  for (int i = 0; i < 10; ++i) two.push_back(record(TaskKind::Vibro, "p1", 1 + i % 3, i == 0 ? 2 : 1 + i % 3));
  for (int i = 0; i < 10; ++i) two.push_back(record(TaskKind::Vibro, "p2", 1 + i % 3, 1 + i % 3));
  auto b = analyze(two, vibro);
  CHECK(b.accuracy_mean == doctest::Approx(0.95));
  CHECK(b.accuracy_sd == doctest::Approx(0.0707107).epsilon(1e-5));
  CHECK(b.participants == std::vector<std::string>{"p1", "p2"});
  REQUIRE(b.accuracy_vs_chance);
  CHECK(b.accuracy_vs_chance->statistic > 0);

  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> pick(1, 9);
  std::vector<TrialRecord> random;
  for (int i = 0; i < 9000; ++i) random.push_back(record(TaskKind::Patterns, "r", 1 + i % 9, pick(rng)));
  CHECK(std::abs(analyze(random, patterns).overall_accuracy - 0.111) <= 0.02);

  // Abstentions are counted apart from the matrix.
  auto with_abstain = all_correct;
  with_abstain.push_back(record(TaskKind::Patterns, "a", 4, 0));
  auto c = analyze(with_abstain, patterns);
  CHECK(c.confusion.sum() == 9);
  CHECK(c.abstentions[3] == 1);
  CHECK(c.class_accuracy[3] == doctest::Approx(0.5));

  std::vector<TrialRecord> missing(all_correct.begin(), all_correct.end() - 2);
  try {
    analyze(missing, patterns);
    FAIL("expected AnalysisError");
  } catch (const AnalysisError& e) {
    CHECK(std::string(e.what()).find("8, 9") != std::string::npos);
  }
  auto mixed = all_correct;
  mixed.push_back(record(TaskKind::Vibro, "a", 1, 1));
  CHECK_THROWS_AS(analyze(mixed), ValidationError);
}

TEST_CASE("jsonl round trip and the bundled log") {
  auto dir = std::filesystem::temp_directory_path() / "fabtip_jsonl_test";
  std::filesystem::create_directories(dir);
  std::vector<TrialRecord> rs{record(TaskKind::Sliding, "x", 2, 2, 0.5), record(TaskKind::Sliding, "x", 5, 6, 1.25)};
  write_jsonl(dir / "t.jsonl", rs);
  append_jsonl(dir / "t.jsonl", record(TaskKind::Sliding, "y", 1, 1, 2.0));
  auto back = read_jsonl(dir / "t.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[1].response_id == 6);
  CHECK(back[1].response_time == 1.25);
  CHECK(back[2].participant == "y");
  std::ofstream(dir / "bad.jsonl") << "{\"task\":\"sliding\"}\n";
  CHECK_THROWS_AS(read_jsonl(dir / "bad.jsonl"), ValidationError);

  auto log = read_jsonl(FABTIP_DEMO_DATA "/patterns_log.jsonl");
  CHECK(log.size() == 135);
  auto a = analyze(log);
  a.write_confusion_csv(dir / "confusion.csv");
  CHECK(slurp(dir / "confusion.csv") == slurp(FABTIP_DEMO_DATA "/patterns_expected_confusion.csv"));
  std::filesystem::remove_all(dir);
}

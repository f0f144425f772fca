#include "fabtip/session.hpp"

#include <cmath>

#include "fabtip/errors.hpp"

namespace fabtip {

using nlohmann::json;

SessionCore::SessionCore(std::string id, TaskSpec task, std::uint64_t seed, std::string participant,
                         const SystemConfig& config)
    : id_(std::move(id)),
      task_(std::move(task)),
      seed_(seed),
      participant_(std::move(participant)),
      trials_(schedule(task_, seed_)),
      rig_([&] {
        RigConfig rc = rig_config_for(task_, config.rig);
        rc.seed = seed_;
        return rc;
      }()),
      stream_period_ms_(std::max<std::int64_t>(1, 1000 / config.service.stream_hz)),
      isi_ms_(std::llround(task_.isi * 1e3)) {
  if (!config.service.log_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config.service.log_dir, ec);
    if (ec) throw IoError("cannot create log directory '" + config.service.log_dir.string() + "'");
    log_path_ = config.service.log_dir / (id_ + ".jsonl");
  }
  emit(snapshot());
}

std::string SessionCore::status() const {
  if (closed_) return "closed";
  if (presenter_) return "active";
  if (next_index_ == trials_.size()) return "complete";
  if (rig_.now_ms() < isi_end_ms_) return "isi";
  return "idle";
}

json SessionCore::snapshot() const {
  const auto& s = rig_.last();
  // Valve activity since the previous stream event; a 100 Hz drive aliases
  // away in the instantaneous valve states at the stream rate.
  json open_fraction = json::array();
  for (int c = 0; c < kChambers; ++c)
    open_fraction.push_back(window_ticks_ ? static_cast<double>(window_open_[c]) / static_cast<double>(window_ticks_)
                                          : static_cast<double>(s.command.open[c]));
  json pressures = json::array(), valves = json::array(), map = json::array();
  for (int c = 0; c < kChambers; ++c) {
    pressures.push_back(s.pressures[c] / 1e3);
    valves.push_back(s.command.open[c]);
  }
  for (int r = 0; r < kSensorSide; ++r) {
    json row = json::array();
    for (int c = 0; c < kSensorSide; ++c) row.push_back(s.map.values(r, c));
    map.push_back(row);
  }
  return {{"type", "state"},
          {"t_ms", rig_.now_ms()},
          {"status", status()},
          {"trial", presenter_ ? json(next_index_ + 1) : json(nullptr)},
          {"trials_completed", records_.size()},
          {"pressures_kpa", pressures},
          {"valves", valves},
          {"pump_duty", {s.command.duty[0], s.command.duty[1]}},
          {"valve_toggles", window_toggles_},
          {"valve_open_fraction", open_fraction},
          {"map", map}};
}

void SessionCore::emit(json event) {
  event["session"] = id_;
  if (!event.contains("t_ms")) event["t_ms"] = rig_.now_ms();
  events_.push_back(event.dump());
  if (events_.size() > kEventBacklog) {
    events_.pop_front();
    ++first_event_;
  }
}

std::pair<std::vector<std::string>, std::uint64_t> SessionCore::events_since(std::uint64_t cursor) const {
  std::vector<std::string> out;
  std::uint64_t i = std::max(cursor, first_event_);
  for (; i < first_event_ + events_.size(); ++i) out.push_back(events_[i - first_event_]);
  return {std::move(out), i};
}

void SessionCore::advance(std::int64_t ms) {
  if (closed_) throw ConflictError("session " + id_ + " is closed");
  if (ms < 0) throw ValidationError("cannot advance by a negative time");
  const FrameSource idle = [](std::int64_t) { return idle_frame(); };
  const FrameSource stimulus = [this](std::int64_t t) { return presenter_->frame_at(t); };
  for (std::int64_t k = 0; k < ms; ++k) {
    const auto& s = rig_.tick(presenter_ ? stimulus : idle);
    for (int c = 0; c < kChambers; ++c) {
      window_toggles_[c] += s.command.open[c] != last_open_[c];
      window_open_[c] += s.command.open[c];
    }
    last_open_ = s.command.open;
    ++window_ticks_;
    if (s.time_ms % stream_period_ms_ == 0) {
      emit(snapshot());
      window_toggles_.fill(0);
      window_open_.fill(0);
      window_ticks_ = 0;
    }
  }
}

json SessionCore::next_trial() {
  if (closed_) throw ConflictError("session " + id_ + " is closed");
  if (presenter_) throw ConflictError("trial " + std::to_string(next_index_ + 1) + " is still running");
  if (next_index_ == trials_.size()) return {{"status", "complete"}, {"trials_completed", records_.size()}};
  if (rig_.now_ms() < isi_end_ms_)
    throw ConflictError("inter-stimulus interval running for another " + std::to_string(isi_end_ms_ - rig_.now_ms()) +
                        " ms");
  const Trial& t = trials_[next_index_];
  onset_ms_ = rig_.now_ms();
  presenter_.emplace(task_, t.stimulus, onset_ms_);
  json j = {{"status", "started"},
            {"trial", next_index_ + 1},
            {"trials_total", trials_.size()},
            {"stimulus", t.stimulus},
            {"stimulus_name", stimulus_name(task_, t.stimulus)},
            {"onset_ms", onset_ms_}};
  json event = j;
  event["type"] = "trial_started";
  emit(event);
  return j;
}

json SessionCore::submit_response(const json& body) {
  if (!body.is_object() || !body.contains("id") || !body["id"].is_number_integer())
    throw ValidationError("response body must be {\"id\": <integer>}");
  if (closed_) throw ConflictError("session " + id_ + " is closed");
  if (!presenter_) throw ConflictError("no stimulus is active");
  const int response = body["id"].get<int>();
  if (response < 1 || response > task_.stimulus_count())
    throw ValidationError("response id " + std::to_string(response) + " outside 1.." +
                          std::to_string(task_.stimulus_count()));
  const std::int64_t now = rig_.now_ms();
  if (now <= onset_ms_) throw ConflictError("no time has elapsed since stimulus onset");

  const Trial& t = trials_[next_index_];
  TrialRecord r;
  r.task = task_.kind;
  r.participant = participant_;
  r.trial_index = t.index;
  r.stimulus_id = t.stimulus;
  r.response_id = response;
  r.onset_time = static_cast<double>(onset_ms_) / 1e3;
  r.response_timestamp = static_cast<double>(now) / 1e3;
  r.response_time = static_cast<double>(now - onset_ms_) / 1e3;
  if (!log_path_.empty()) append_jsonl(log_path_, r);

  records_.push_back(r);
  presenter_.reset();
  ++next_index_;
  isi_end_ms_ = now + isi_ms_;
  json j = r.to_json();
  json event = {{"type", "response"}, {"record", j}};
  emit(event);
  return j;
}

json SessionCore::state() const {
  json j = snapshot();
  j.erase("type");
  j.erase("map");
  const auto& rx = rig_.receiver().counters();
  const auto& ctl = rig_.controller().counters();
  j["id"] = id_;
  j["task"] = to_string(task_.kind);
  j["participant"] = participant_;
  j["seed"] = seed_;
  j["trials_total"] = trials_.size();
  j["trial_index"] = next_index_;
  j["onset_ms"] = presenter_ ? json(onset_ms_) : json(nullptr);
  j["isi_remaining_ms"] = std::max<std::int64_t>(0, isi_end_ms_ - rig_.now_ms());
  j["counters"] = {{"frames", rx.accepted},         {"stale", rx.stale},
                   {"duplicates", rx.duplicate},     {"rejected", ctl.rejected},
                   {"watchdog_trips", ctl.watchdog_trips}};
  return j;
}

json SessionCore::results() const {
  json records = json::array();
  for (const auto& r : records_) records.push_back(r.to_json());
  json j = {{"id", id_}, {"task", to_string(task_.kind)}, {"trials_completed", records_.size()},
            {"trials_total", trials_.size()}, {"records", records}};
  try {
    j["analysis"] = analyze(records_, task_).to_json();
  } catch (const AnalysisError& e) {
    j["analysis"] = nullptr;
    j["analysis_error"] = e.what();
  }
  return j;
}

void SessionCore::close() {
  if (closed_) return;
  presenter_.reset();
  closed_ = true;
  emit({{"type", "closed"}});
}

Session::Session(std::unique_ptr<SessionCore> core, bool realtime)
    : core_(std::move(core)), realtime_(realtime), started_(std::chrono::steady_clock::now()) {
  worker_ = std::thread([this] { run(); });
}

Session::~Session() { stop(); }

void Session::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void Session::post(std::function<void()> job) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) throw NotFoundError("session is closed");
    queue_.push_back(std::move(job));
  }
  wake_.notify_one();
}

void Session::catch_up() {
  if (!realtime_ || core_->closed()) return;
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started_).count();
  if (elapsed > core_->now_ms()) core_->advance(elapsed - core_->now_ms());
}

void Session::run() {
  using namespace std::chrono_literals;
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lock(mutex_);
      if (realtime_)
        wake_.wait_for(lock, 10ms, [this] { return stopping_ || !queue_.empty(); });
      else
        wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) {
        if (stopping_) return;
      } else {
        job = std::move(queue_.front());
        queue_.pop_front();
      }
    }
    catch_up();
    if (job) job();
  }
}

SessionManager::SessionManager(SystemConfig config) : config_(std::move(config)) {}

SessionManager::~SessionManager() {
  std::lock_guard lock(mutex_);
  for (auto& [id, s] : sessions_) s->stop();
}

json SessionManager::create(const json& body) {
  if (!body.is_object()) throw ValidationError("session body must be a JSON object");
  if (!body.contains("task") || !body["task"].is_string()) throw ValidationError("'task' must be a string");
  const TaskKind kind = parse_task_kind(body["task"].get<std::string>());
  std::uint64_t seed = config_.seed;
  if (body.contains("seed")) {
    const auto& v = body["seed"];
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ValidationError("'seed' must be a non-negative integer");
    seed = body["seed"].get<std::uint64_t>();
  }
  std::string participant = "P01";
  if (body.contains("participant")) {
    if (!body["participant"].is_string() || body["participant"].get<std::string>().empty())
      throw ValidationError("'participant' must be a non-empty string");
    participant = body["participant"].get<std::string>();
  }

  std::lock_guard lock(mutex_);
  std::string id;
  if (body.contains("id")) {
    if (!body["id"].is_string()) throw ValidationError("'id' must be a string");
    id = body["id"].get<std::string>();
    if (id.empty() || id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_") !=
                          std::string::npos)
      throw ValidationError("session id may only contain letters, digits, '-' and '_'");
    if (sessions_.count(id)) throw ConflictError("session '" + id + "' already exists");
  } else {
    do id = "s" + std::to_string(++counter_);
    while (sessions_.count(id));
  }
  const TaskSpec task = config_.task_for(kind);
  auto core = std::make_unique<SessionCore>(id, task, seed, participant, config_);
  const auto total = schedule(task, seed).size();
  sessions_[id] = std::make_shared<Session>(std::move(core), config_.service.realtime);
  return {{"id", id},
          {"task", to_string(kind)},
          {"seed", seed},
          {"participant", participant},
          {"trials_total", total},
          {"status", "idle"},
          {"clock", config_.service.realtime ? "realtime" : "simulated"}};
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  return it->second;
}

json SessionManager::list() const {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  json out = json::array();
  for (auto& s : all) out.push_back(s->call([](SessionCore& c) { return c.state(); }));
  return {{"sessions", out}};
}

json SessionManager::state(const std::string& id) {
  return find(id)->call([](SessionCore& c) { return c.state(); });
}

json SessionManager::next(const std::string& id) {
  return find(id)->call([](SessionCore& c) { return c.next_trial(); });
}

json SessionManager::respond(const std::string& id, const json& body) {
  return find(id)->call([&body](SessionCore& c) { return c.submit_response(body); });
}

json SessionManager::advance(const std::string& id, const json& body) {
  if (config_.service.realtime) throw ConflictError("the service runs on the real-time clock");
  if (!body.is_object() || !body.contains("ms") || !body["ms"].is_number_integer() || body["ms"].get<long long>() < 0)
    throw ValidationError("advance body must be {\"ms\": <non-negative integer>}");
  const auto ms = body["ms"].get<std::int64_t>();
  return find(id)->call([ms](SessionCore& c) {
    c.advance(ms);
    return c.state();
  });
}

json SessionManager::results(const std::string& id) {
  return find(id)->call([](SessionCore& c) { return c.results(); });
}

json SessionManager::close(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
    s = it->second;
    sessions_.erase(it);
  }
  json j = s->call([](SessionCore& c) {
    c.close();
    return json{{"id", c.state()["id"]}, {"status", "closed"}, {"trials_completed", c.records().size()}};
  });
  return j;
}

}  // namespace fabtip

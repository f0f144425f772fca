#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fabtip/config.hpp"
#include "fabtip/psychophysics.hpp"
#include "fabtip/rig.hpp"

namespace fabtip {

/// One experiment session on its own simulated clock. Not thread-safe; the
/// owning Session serializes access.
class SessionCore {
 public:
  SessionCore(std::string id, TaskSpec task, std::uint64_t seed, std::string participant, const SystemConfig& config);

  nlohmann::json next_trial();
  nlohmann::json submit_response(const nlohmann::json& body);
  /// Runs the clock forward `ms` ticks, emitting stream events on the way.
  void advance(std::int64_t ms);
  nlohmann::json state() const;
  nlohmann::json results() const;
  void close();

  /// Serialized events with index >= `cursor`, and the cursor after them.
  std::pair<std::vector<std::string>, std::uint64_t> events_since(std::uint64_t cursor) const;

  std::int64_t now_ms() const { return rig_.now_ms(); }
  bool closed() const { return closed_; }
  const std::vector<TrialRecord>& records() const { return records_; }

 private:
  void emit(nlohmann::json event);
  nlohmann::json snapshot() const;
  std::string status() const;

  std::string id_;
  TaskSpec task_;
  std::uint64_t seed_;
  std::string participant_;
  std::vector<Trial> trials_;
  Rig rig_;
  std::filesystem::path log_path_;
  std::int64_t stream_period_ms_;

  std::size_t next_index_ = 0;
  std::optional<StimulusPresenter> presenter_;
  std::int64_t onset_ms_ = 0;
  std::int64_t isi_end_ms_ = 0;
  std::int64_t isi_ms_;
  std::vector<TrialRecord> records_;
  bool closed_ = false;

  std::array<bool, kChambers> last_open_{};
  std::array<int, kChambers> window_toggles_{};
  std::array<int, kChambers> window_open_{};
  int window_ticks_ = 0;

  static constexpr std::size_t kEventBacklog = 4096;
  std::deque<std::string> events_;
  std::uint64_t first_event_ = 0;  // index of events_.front()
};

/// A SessionCore behind a single worker thread. Callers hand it closures and
/// wait for the result, so the core is only ever touched by its worker.
class Session {
 public:
  Session(std::unique_ptr<SessionCore> core, bool realtime);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  template <typename F>
  auto call(F&& f) -> decltype(f(std::declval<SessionCore&>())) {
    using R = decltype(f(std::declval<SessionCore&>()));
    auto task = std::make_shared<std::packaged_task<R()>>([this, fn = std::forward<F>(f)]() mutable { return fn(*core_); });
    auto result = task->get_future();
    post([task] { (*task)(); });
    return result.get();
  }

  /// Stops the worker after the queue drains. Idempotent.
  void stop();

 private:
  void post(std::function<void()> job);
  void run();
  void catch_up();

  std::unique_ptr<SessionCore> core_;
  bool realtime_;
  std::chrono::steady_clock::time_point started_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread worker_;
};

/// Registry of live sessions; the JSON-in/JSON-out surface of the service.
class SessionManager {
 public:
  explicit SessionManager(SystemConfig config);
  ~SessionManager();

  /// Body: {"task": "patterns", "seed": 7, "participant": "P01", "id": optional}.
  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json list() const;
  nlohmann::json state(const std::string& id);
  nlohmann::json next(const std::string& id);
  /// Body: {"id": response id}.
  nlohmann::json respond(const std::string& id, const nlohmann::json& body);
  /// Body: {"ms": ticks}. Simulated clock only.
  nlohmann::json advance(const std::string& id, const nlohmann::json& body);
  nlohmann::json results(const std::string& id);
  nlohmann::json close(const std::string& id);

  /// Throws NotFoundError for unknown ids.
  std::shared_ptr<Session> find(const std::string& id) const;

  const SystemConfig& config() const { return config_; }

 private:
  SystemConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

}  // namespace fabtip

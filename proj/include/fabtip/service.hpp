#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "fabtip/session.hpp"

namespace fabtip {

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

/// REST routing without the transport:
///   GET    /health
///   GET    /sessions
///   POST   /sessions                 {"task", "seed", "participant", "id"?}
///   GET    /sessions/{id}
///   DELETE /sessions/{id}
///   POST   /sessions/{id}/next
///   POST   /sessions/{id}/response   {"id"}
///   POST   /sessions/{id}/advance    {"ms"}   (simulated clock)
///   GET    /sessions/{id}/results
/// Errors come back as {"error", "kind"} with 400 / 404 / 405 / 409 / 422.
HttpReply route(SessionManager& manager, std::string_view method, std::string_view target, std::string_view body);

/// Session id of a `/sessions/{id}/live` target, or empty.
std::string live_target(std::string_view target);

/// HTTP + WebSocket front end on Boost.Beast. WebSocket clients on
/// /sessions/{id}/live receive the session's JSON events at the stream rate.
class HttpService {
 public:
  /// Binds immediately; port 0 picks an ephemeral port.
  HttpService(SessionManager& manager, const ServiceConfig& config);
  ~HttpService();

  unsigned short port() const;
  /// Serves on `threads` background threads.
  void start(int threads = 4);
  void stop();
  /// Serves on the calling thread until SIGINT or SIGTERM.
  void run_until_signal();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fabtip

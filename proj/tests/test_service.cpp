#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "fabtip/errors.hpp"
#include "fabtip/service.hpp"

using namespace fabtip;
using nlohmann::json;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

SystemConfig quiet() {
  SystemConfig c;
  c.rig.sensor.noise_sigma = 0.0;
  c.service.port = 0;
  return c;
}

struct Reply {
  int status = 0;
  json body;
  http::response<http::string_body> raw;
};

Reply request(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "") {
  net::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req(verb, target, 11);
  req.set(http::field::host, "127.0.0.1");
  if (!body.empty()) {
    req.set(http::field::content_type, "application/json");
    req.body() = body;
  }
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  Reply r;
  http::read(stream, buffer, r.raw);
  r.status = static_cast<int>(r.raw.result_int());
  if (!r.raw.body().empty()) r.body = json::parse(r.raw.body());
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return r;
}

class LiveClient {
 public:
  LiveClient(unsigned short port, const std::string& id) : resolver_(ioc_), ws_(ioc_) {
    net::connect(ws_.next_layer(), resolver_.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/sessions/" + id + "/live");
  }

  /// Next event, or empty once the server closed the stream.
  std::optional<json> next() {
    beast::flat_buffer buffer;
    beast::error_code ec;
    ws_.read(buffer, ec);
    if (ec) {
      last_error_ = ec;
      return std::nullopt;
    }
    return json::parse(beast::buffers_to_string(buffer.data()));
  }

  /// Reads until an event of `type` arrives.
  std::vector<json> until(const std::string& type) {
    std::vector<json> seen;
    while (auto e = next()) {
      seen.push_back(*e);
      if ((*e)["type"] == type) break;
    }
    return seen;
  }

  beast::error_code last_error() const { return last_error_; }

 private:
  net::io_context ioc_;
  tcp::resolver resolver_;
  websocket::stream<tcp::socket> ws_;
  beast::error_code last_error_;
};

}  // namespace

TEST_CASE("router") {
  SessionManager m(quiet());
  CHECK(route(m, "GET", "/health", "").status == 200);
  auto created = route(m, "POST", "/sessions", R"({"task":"patterns","seed":7})");
  CHECK(created.status == 201);
  CHECK(created.body["trials_total"] == 45);
  const std::string id = created.body["id"];
  CHECK(route(m, "POST", "/sessions", R"({"task":"taste"})").status == 400);
  CHECK(route(m, "POST", "/sessions", R"({"task":)").status == 400);
  CHECK(route(m, "POST", "/sessions", R"({"task":"vibro","id":")" + id + "\"}").status == 409);
  CHECK(route(m, "GET", "/sessions/zzz", "").status == 404);
  CHECK(route(m, "GET", "/nowhere", "").status == 404);
  CHECK(route(m, "PUT", "/sessions", "").status == 405);
  CHECK(route(m, "GET", "/sessions/" + id + "/next", "").status == 405);
  CHECK(route(m, "POST", "/sessions/" + id + "/next", "").status == 200);
  CHECK(route(m, "POST", "/sessions/" + id + "/next", "").body["kind"] == "conflict");
  CHECK(route(m, "POST", "/sessions/" + id + "/advance", R"({"ms":120})").status == 200);
  CHECK(route(m, "POST", "/sessions/" + id + "/response", R"({"id":10})").status == 400);
  auto ok = route(m, "POST", "/sessions/" + id + "/response", R"({"id":3})");
  CHECK(ok.status == 200);
  CHECK(ok.body["rt_s"].get<double>() == doctest::Approx(0.12));
  CHECK(route(m, "GET", "/sessions/" + id + "/results?x=1", "").status == 200);
  CHECK(route(m, "DELETE", "/sessions/" + id, "").status == 200);
  CHECK(route(m, "DELETE", "/sessions/" + id, "").status == 404);
  CHECK(live_target("/sessions/s9/live") == "s9");
  CHECK(live_target("/sessions/s9") == "");
}

TEST_CASE("http and websocket end to end") {
  auto cfg = quiet();
  cfg.task.repetitions = 1;
  auto logs = std::filesystem::temp_directory_path() / "fabtip_service_logs";
  std::filesystem::remove_all(logs);
  cfg.service.log_dir = logs;
  SessionManager manager(cfg);
  HttpService service(manager, cfg.service);
  service.start(2);
  const auto port = service.port();
  REQUIRE(port != 0);

  CHECK(request(port, http::verb::get, "/health").body["ok"] == true);
  auto pre = request(port, http::verb::options, "/sessions");
  CHECK(pre.status == 204);
  CHECK(pre.raw[http::field::access_control_allow_origin] == "*");

  auto created = request(port, http::verb::post, "/sessions", R"({"task":"vibro","seed":4,"participant":"P07"})");
  REQUIRE(created.status == 201);
  const std::string id = created.body["id"];
  CHECK(created.body["trials_total"] == 3);

  LiveClient live(port, id);
  request(port, http::verb::post, "/sessions/" + id + "/advance", R"({"ms":500})");
  auto idle = live.until("state");
  std::vector<json> stream = idle;
  for (int i = 0; i < 10; ++i) stream.push_back(*live.next());
  for (const auto& e : stream) {
    CHECK(e["session"] == id);
    CHECK(e["status"] == "idle");
    for (auto& p : e["pressures_kpa"]) CHECK(p == 0.0);
  }

  int completed = 0;
  for (int k = 0; k < 3; ++k) {
    auto next = request(port, http::verb::post, "/sessions/" + id + "/next");
    REQUIRE(next.status == 200);
    CHECK(next.body["trial"] == k + 1);
    request(port, http::verb::post, "/sessions/" + id + "/advance", R"({"ms":400})");
    auto r = request(port, http::verb::post, "/sessions/" + id + "/response",
                     "{\"id\":" + std::to_string(next.body["stimulus"].get<int>()) + "}");
    REQUIRE(r.status == 200);
    CHECK(r.body["rt_s"].get<double>() == doctest::Approx(0.4));
    ++completed;
    auto events = live.until("response");
    CHECK(events.back()["record"]["trial"] == k);
    request(port, http::verb::post, "/sessions/" + id + "/advance", R"({"ms":2000})");
  }
  CHECK(request(port, http::verb::post, "/sessions/" + id + "/next").body["status"] == "complete");

  auto results = request(port, http::verb::get, "/sessions/" + id + "/results");
  CHECK(results.body["records"].size() == static_cast<std::size_t>(completed));
  CHECK(results.body["analysis"]["overall_accuracy"] == 1.0);
  CHECK(read_jsonl(logs / (id + ".jsonl")).size() == static_cast<std::size_t>(completed));

  CHECK(request(port, http::verb::delete_, "/sessions/" + id).status == 200);
  auto tail = live.until("closed");
  REQUIRE_FALSE(tail.empty());
  CHECK(tail.back()["type"] == "closed");
  std::int64_t last_t = -1;
  for (const auto& e : tail) {
    CHECK(e["t_ms"].get<std::int64_t>() >= last_t);
    last_t = e["t_ms"];
  }
  CHECK_FALSE(live.next());
  CHECK(live.last_error() == websocket::error::closed);

  CHECK_THROWS(LiveClient(port, "missing"));
  service.stop();
  std::filesystem::remove_all(logs);
}

TEST_CASE("stream events arrive in clock order") {
  auto cfg = quiet();
  SessionManager manager(cfg);
  HttpService service(manager, cfg.service);
  service.start(2);
  const std::string id = request(service.port(), http::verb::post, "/sessions", R"({"task":"sliding"})").body["id"];
  LiveClient live(service.port(), id);
  request(service.port(), http::verb::post, "/sessions/" + id + "/next");
  request(service.port(), http::verb::post, "/sessions/" + id + "/advance", R"({"ms":3000})");
  request(service.port(), http::verb::delete_, "/sessions/" + id);
  auto events = live.until("closed");
  CHECK(events.size() >= 60);
  std::int64_t last_t = -1;
  bool started = false;
  for (const auto& e : events) {
    CHECK(e["t_ms"].get<std::int64_t>() >= last_t);
    last_t = e["t_ms"];
    if (e["type"] == "trial_started") started = true;
    if (started && e["type"] == "state") CHECK(e["status"] == "active");
  }
  CHECK(started);
  service.stop();
}

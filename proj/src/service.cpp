#include "fabtip/service.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/version.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <thread>
#include <vector>

#include "fabtip/errors.hpp"

namespace fabtip {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

std::vector<std::string_view> segments(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < target.size()) {
    while (i < target.size() && target[i] == '/') ++i;
    std::size_t j = target.find('/', i);
    if (j == std::string_view::npos) j = target.size();
    if (j > i) out.push_back(target.substr(i, j - i));
    i = j;
  }
  return out;
}

HttpReply error(int status, std::string_view kind, const std::string& message) {
  return {status, {{"error", message}, {"kind", kind}}};
}

json parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed JSON body: ") + e.what());
  }
}

}  // namespace

std::string live_target(std::string_view target) {
  auto s = segments(target);
  if (s.size() == 3 && s[0] == "sessions" && s[2] == "live") return std::string(s[1]);
  return {};
}

HttpReply route(SessionManager& m, std::string_view method, std::string_view target, std::string_view body) {
  const auto s = segments(target);
  try {
    if (s.size() == 1 && s[0] == "health") {
      if (method == "GET") return {200, {{"ok", true}}};
    } else if (s.size() == 1 && s[0] == "sessions") {
      if (method == "GET") return {200, m.list()};
      if (method == "POST") return {201, m.create(parse_body(body))};
    } else if (s.size() == 2 && s[0] == "sessions") {
      const std::string id(s[1]);
      if (method == "GET") return {200, m.state(id)};
      if (method == "DELETE") return {200, m.close(id)};
    } else if (s.size() == 3 && s[0] == "sessions") {
      const std::string id(s[1]);
      if (s[2] == "next" && method == "POST") return {200, m.next(id)};
      if (s[2] == "response" && method == "POST") return {200, m.respond(id, parse_body(body))};
      if (s[2] == "advance" && method == "POST") return {200, m.advance(id, parse_body(body))};
      if (s[2] == "results" && method == "GET") return {200, m.results(id)};
      if (s[2] == "next" || s[2] == "response" || s[2] == "advance" || s[2] == "results" || s[2] == "live")
        return error(405, "method", std::string(method) + " not allowed on " + std::string(target));
      return error(404, "not_found", "no route " + std::string(target));
    } else {
      return error(404, "not_found", "no route " + std::string(target));
    }
    return error(405, "method", std::string(method) + " not allowed on " + std::string(target));
  } catch (const NotFoundError& e) {
    return error(404, "not_found", e.what());
  } catch (const ConflictError& e) {
    return error(409, "conflict", e.what());
  } catch (const AnalysisError& e) {
    return error(422, "analysis", e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, "validation", e.what());
  } catch (const std::domain_error& e) {
    return error(400, "validation", e.what());
  } catch (const IoError& e) {
    return error(500, "io", e.what());
  }
}

namespace {

class LiveStream : public std::enable_shared_from_this<LiveStream> {
 public:
  LiveStream(tcp::socket&& socket, std::shared_ptr<Session> session, std::chrono::milliseconds period)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(std::move(session)), period_(period) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&LiveStream::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    read();
    poll();
  }

  // Reads only to notice the client closing.
  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->done_ = true;
        self->timer_.cancel();
        return;
      }
      self->in_.consume(self->in_.size());
      self->read();
    });
  }

  void poll() {
    if (done_) return;
    bool closed = false;
    try {
      auto [events, cursor] = session_->call([c = cursor_, &closed](SessionCore& core) {
        closed = core.closed();
        return core.events_since(c);
      });
      cursor_ = cursor;
      for (auto& e : events) out_.push_back(std::move(e));
    } catch (const std::exception&) {
      closed = true;
    }
    closing_ = closed;
    write();
  }

  void write() {
    if (done_) return;
    if (!out_.empty()) {
      ws_.text(true);
      ws_.async_write(net::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
          self->done_ = true;
          return;
        }
        self->out_.pop_front();
        self->write();
      });
      return;
    }
    if (closing_) {
      done_ = true;
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
      return;
    }
    timer_.expires_after(period_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->poll();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  std::shared_ptr<Session> session_;
  std::chrono::milliseconds period_;
  beast::flat_buffer in_;
  std::deque<std::string> out_;
  std::uint64_t cursor_ = 0;
  bool closing_ = false;
  bool done_ = false;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket&& socket, SessionManager& manager, std::chrono::milliseconds period)
      : stream_(std::move(socket)), manager_(manager), period_(period) {}

  void run() { net::dispatch(stream_.get_executor(), beast::bind_front_handler(&Connection::read, shared_from_this())); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;

    if (websocket::is_upgrade(req_)) {
      const std::string id = live_target(target());
      std::shared_ptr<Session> session;
      HttpReply refusal;
      if (id.empty()) {
        refusal = {404, {{"error", "no stream at " + std::string(req_.target())}, {"kind", "not_found"}}};
      } else {
        try {
          session = manager_.find(id);
        } catch (const NotFoundError& e) {
          refusal = {404, {{"error", e.what()}, {"kind", "not_found"}}};
        }
      }
      if (session) {
        stream_.expires_never();
        std::make_shared<LiveStream>(stream_.release_socket(), std::move(session), period_)->run(std::move(req_));
        return;
      }
      send(std::move(refusal), false);
      return;
    }

    if (req_.method() == http::verb::options) {
      send({204, nullptr}, req_.keep_alive());
      return;
    }
    send(route(manager_, std::string(req_.method_string()), target(), req_.body()), req_.keep_alive());
  }

  std::string_view target() const { return {req_.target().data(), req_.target().size()}; }

  void send(HttpReply reply, bool keep_alive) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status),
                                                                   req_.version());
    res->set(http::field::server, "fabtip");
    res->set(http::field::access_control_allow_origin, "*");
    res->set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
    res->set(http::field::access_control_allow_headers, "Content-Type");
    if (!reply.body.is_null()) {
      res->set(http::field::content_type, "application/json");
      res->body() = reply.body.dump();
    }
    res->keep_alive(keep_alive);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  SessionManager& manager_;
  std::chrono::milliseconds period_;
};

}  // namespace

struct HttpService::Impl {
  Impl(SessionManager& m, const ServiceConfig& config)
      : manager(m), period(1000 / config.stream_hz), acceptor(ioc) {
    beast::error_code ec;
    const auto address = net::ip::make_address(config.host, ec);
    if (ec) throw ConfigError("bad service host '" + config.host + "'");
    const tcp::endpoint endpoint(address, config.port);
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw IoError("cannot listen on " + config.host + ":" + std::to_string(config.port) + ": " + ec.message());
    accept();
  }

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), manager, period)->run();
      accept();
    });
  }

  SessionManager& manager;
  std::chrono::milliseconds period;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
};

HttpService::HttpService(SessionManager& manager, const ServiceConfig& config)
    : impl_(std::make_unique<Impl>(manager, config)) {}

HttpService::~HttpService() { stop(); }

unsigned short HttpService::port() const { return impl_->acceptor.local_endpoint().port(); }

void HttpService::start(int threads) {
  for (int i = 0; i < threads; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void HttpService::stop() {
  impl_->ioc.stop();
  for (auto& t : impl_->threads)
    if (t.joinable()) t.join();
  impl_->threads.clear();
}

void HttpService::run_until_signal() {
  net::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
  signals.async_wait([this](beast::error_code, int) { impl_->ioc.stop(); });
  impl_->ioc.run();
}

}  // namespace fabtip

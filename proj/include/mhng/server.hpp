#pragma once

// Network front end for SessionHost.
//
// WebSocket mode: one port serves HTTP GET /stimuli/<dataset>_<i>.png, GET
// /health, and WebSocket upgrades on /ws (one text frame per wire message).
// TCP mode: raw TCP, each frame a 4-byte big-endian length then UTF-8 JSON.
// Everything runs on one io_context; SessionHost serializes per session.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mhng/png.hpp"
#include "mhng/session.hpp"
#include "mhng/stimulus.hpp"

namespace mhng {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

enum class Transport { websocket, tcp };

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  Transport transport = Transport::websocket;
  int patch_size = kDefaultPatchSize;
};

/// Encodes a 4-byte big-endian length prefix followed by the payload.
inline std::string encode_length_prefixed(const std::string& payload) {
  require(payload.size() <= 0xffffffffu, "frame too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out(4, '\0');
  out[0] = static_cast<char>((n >> 24) & 0xff);
  out[1] = static_cast<char>((n >> 16) & 0xff);
  out[2] = static_cast<char>((n >> 8) & 0xff);
  out[3] = static_cast<char>(n & 0xff);
  return out + payload;
}

inline std::uint32_t decode_length_prefix(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

inline constexpr std::uint32_t kMaxFrameBytes = 1u << 20;

namespace detail {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  virtual ~Connection() = default;
  virtual void send(std::string frame) = 0;
};

/// (session, participant) -> live connection.
class Router {
 public:
  void bind(const std::string& session, const std::string& participant, const std::shared_ptr<Connection>& c) {
    std::lock_guard lock(mutex_);
    routes_[{session, participant}] = c;
  }
  void deliver(const std::vector<Outbound>& out, const WireMessage& request, const std::shared_ptr<Connection>& origin) {
    for (const auto& o : out) {
      std::shared_ptr<Connection> c;
      {
        std::lock_guard lock(mutex_);
        auto it = routes_.find({request.session_id, o.recipient});
        if (it != routes_.end()) c = it->second.lock();
      }
      if (!c && o.recipient == request.sender) c = origin;
      if (c) c->send(serialize_frame(o.message));
    }
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, std::weak_ptr<Connection>> routes_;
};

struct Shared {
  SessionHost& host;
  Router router;
  ServerOptions options;
  std::mutex png_mutex;
  std::map<std::string, std::string> png_cache;

  explicit Shared(SessionHost& h, ServerOptions o) : host(h), options(std::move(o)) {}

  void on_frame(const std::string& text, const std::shared_ptr<Connection>& conn) {
    WireMessage msg;
    try {
      msg = parse_frame(text);
    } catch (const ProtocolError& e) {
      Json body;
      body["code"] = e.code();
      body["message"] = e.what();
      conn->send(serialize_frame({"", 0, "Error", "server", body}));
      return;
    }
    if (!msg.sender.empty() && host.has(msg.session_id)) router.bind(msg.session_id, msg.sender, conn);
    router.deliver(host.submit(msg), msg, conn);
  }

  /// PNG for "<dataset>_<index>.png" from any hosted session's manifests.
  std::optional<std::string> stimulus_png(const std::string& name, const std::vector<StimulusSet>& sets) {
    {
      std::lock_guard lock(png_mutex);
      if (auto it = png_cache.find(name); it != png_cache.end()) return it->second;
    }
    for (const auto& set : sets)
      for (std::size_t i = 0; i < set.size(); ++i)
        if (patch_filename(set.id, i) == name) {
          const auto bytes = encode_png(render_patch(set.stimuli[i].color, options.patch_size));
          std::string png(bytes.begin(), bytes.end());
          std::lock_guard lock(png_mutex);
          png_cache[name] = png;
          return png;
        }
    return std::nullopt;
  }
};

class WsConnection : public Connection {
 public:
  WsConnection(tcp::socket socket, Shared& shared) : ws_(std::move(socket)), shared_(shared) {}

  void start(http::request<http::string_body> req) {
    ws_.text(true);
    ws_.async_accept(req, [self = shared(), this](beast::error_code ec) {
      if (!ec) read();
    });
  }

  void send(std::string frame) override {
    net::post(ws_.get_executor(), [self = shared(), this, f = std::move(frame)]() mutable {
      queue_.push_back(std::move(f));
      if (queue_.size() == 1) write();
    });
  }

 private:
  std::shared_ptr<WsConnection> shared() { return std::static_pointer_cast<WsConnection>(shared_from_this()); }

  void read() {
    ws_.async_read(buffer_, [self = shared(), this](beast::error_code ec, std::size_t) {
      if (ec) return;
      const std::string text = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      shared_.on_frame(text, shared_from_this());
      read();
    });
  }

  void write() {
    ws_.async_write(net::buffer(queue_.front()), [self = shared(), this](beast::error_code ec, std::size_t) {
      if (ec) return;
      queue_.pop_front();
      if (!queue_.empty()) write();
    });
  }

  websocket::stream<tcp::socket> ws_;
  Shared& shared_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Shared& shared, std::function<std::vector<StimulusSet>()> sets)
      : socket_(std::move(socket)), shared_(shared), sets_(std::move(sets)) {}

  void start() { read(); }

 private:
  void read() {
    req_ = {};
    http::async_read(socket_, buffer_, req_, [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (websocket::is_upgrade(req_)) {
        if (req_.target() == "/ws") {
          std::make_shared<WsConnection>(std::move(socket_), shared_)->start(std::move(req_));
          return;
        }
      }
      respond();
    });
  }

  void respond() {
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(req_.keep_alive());
    const std::string target(req_.target());
    const std::string prefix = "/stimuli/";
    if (req_.method() != http::verb::get) {
      res->result(http::status::method_not_allowed);
      res->set(http::field::content_type, "text/plain");
      res->body() = "GET only\n";
    } else if (target == "/health") {
      res->result(http::status::ok);
      res->set(http::field::content_type, "application/json");
      res->body() = R"({"status":"ok"})";
    } else if (target.rfind(prefix, 0) == 0) {
      const auto png = shared_.stimulus_png(target.substr(prefix.size()), sets_());
      if (png) {
        res->result(http::status::ok);
        res->set(http::field::content_type, "image/png");
        res->body() = *png;
      } else {
        res->result(http::status::not_found);
        res->set(http::field::content_type, "text/plain");
        res->body() = "no such stimulus\n";
      }
    } else {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    }
    res->prepare_payload();
    http::async_write(socket_, *res, [self = shared_from_this(), this, res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->keep_alive()) read();
      else socket_.shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  tcp::socket socket_;
  Shared& shared_;
  std::function<std::vector<StimulusSet>()> sets_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

class TcpConnection : public Connection {
 public:
  TcpConnection(tcp::socket socket, Shared& shared) : socket_(std::move(socket)), shared_(shared) {}

  void start() { read_header(); }

  void send(std::string frame) override {
    net::post(socket_.get_executor(), [self = shared(), this, f = encode_length_prefixed(frame)]() mutable {
      queue_.push_back(std::move(f));
      if (queue_.size() == 1) write();
    });
  }

 private:
  std::shared_ptr<TcpConnection> shared() { return std::static_pointer_cast<TcpConnection>(shared_from_this()); }

  void read_header() {
    net::async_read(socket_, net::buffer(header_), [self = shared(), this](beast::error_code ec, std::size_t) {
      if (ec) return;
      const auto n = decode_length_prefix(header_.data());
      if (n > kMaxFrameBytes) {
        socket_.close(ec);
        return;
      }
      body_.assign(n, '\0');
      net::async_read(socket_, net::buffer(body_), [self, this](beast::error_code ec2, std::size_t) {
        if (ec2) return;
        shared_.on_frame(body_, shared_from_this());
        read_header();
      });
    });
  }

  void write() {
    net::async_write(socket_, net::buffer(queue_.front()), [self = shared(), this](beast::error_code ec, std::size_t) {
      if (ec) return;
      queue_.pop_front();
      if (!queue_.empty()) write();
    });
  }

  tcp::socket socket_;
  Shared& shared_;
  std::array<unsigned char, 4> header_{};
  std::string body_;
  std::deque<std::string> queue_;
};

}  // namespace detail

class GameServer {
 public:
  /// `session_ids` lists the hosted sessions whose datasets are served as PNGs.
  GameServer(net::io_context& io, SessionHost& host, ServerOptions options, std::vector<std::string> session_ids = {})
      : io_(io), acceptor_(io), shared_(host, options), session_ids_(std::move(session_ids)) {
    const tcp::endpoint ep(net::ip::make_address(options.address), options.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() { accept(); }

  void stop() {
    beast::error_code ec;
    acceptor_.close(ec);
  }

 private:
  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      if (shared_.options.transport == Transport::tcp) {
        std::make_shared<detail::TcpConnection>(std::move(socket), shared_)->start();
      } else {
        std::make_shared<detail::HttpConnection>(std::move(socket), shared_, [this] {
          std::vector<StimulusSet> sets;
          for (const auto& id : session_ids_)
            if (shared_.host.has(id))
              for (auto& d : shared_.host.datasets(id)) sets.push_back(std::move(d));
          return sets;
        })->start();
      }
      accept();
    });
  }

  net::io_context& io_;
  tcp::acceptor acceptor_;
  detail::Shared shared_;
  std::vector<std::string> session_ids_;
};

}  // namespace mhng

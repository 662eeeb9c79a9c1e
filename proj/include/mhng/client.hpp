#pragma once

// Blocking clients for the game server: used by tests and by headless
// scripted participants.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <memory>
#include <string>

#include "mhng/participant.hpp"
#include "mhng/server.hpp"
#include "mhng/session.hpp"

namespace mhng {

class FrameClient {
 public:
  virtual ~FrameClient() = default;
  virtual void send_text(const std::string& text) = 0;
  virtual std::string receive_text() = 0;
  virtual void close() = 0;

  void send(const WireMessage& m) { send_text(serialize_frame(m)); }
  WireMessage receive() { return parse_frame(receive_text()); }
};

class TcpFrameClient : public FrameClient {
 public:
  TcpFrameClient(const std::string& host, unsigned short port) : socket_(io_) {
    tcp::resolver resolver(io_);
    net::connect(socket_, resolver.resolve(host, std::to_string(port)));
  }

  void send_text(const std::string& text) override { net::write(socket_, net::buffer(encode_length_prefixed(text))); }

  std::string receive_text() override {
    std::array<unsigned char, 4> header{};
    net::read(socket_, net::buffer(header));
    const auto n = decode_length_prefix(header.data());
    require(n <= kMaxFrameBytes, "frame too large");
    std::string body(n, '\0');
    net::read(socket_, net::buffer(body));
    return body;
  }

  void close() override {
    beast::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 private:
  net::io_context io_;
  tcp::socket socket_;
};

class WsFrameClient : public FrameClient {
 public:
  WsFrameClient(const std::string& host, unsigned short port, const std::string& path = "/ws") : ws_(io_) {
    tcp::resolver resolver(io_);
    net::connect(ws_.next_layer(), resolver.resolve(host, std::to_string(port)));
    ws_.handshake(host + ":" + std::to_string(port), path);
    ws_.text(true);
  }

  void send_text(const std::string& text) override { ws_.write(net::buffer(text)); }

  std::string receive_text() override {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return beast::buffers_to_string(buffer.data());
  }

  void close() override {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

 private:
  net::io_context io_;
  websocket::stream<tcp::socket> ws_;
};

struct HttpResponse {
  unsigned status = 0;
  std::string content_type;
  std::string body;
};

inline HttpResponse http_get(const std::string& host, unsigned short port, const std::string& target) {
  net::io_context io;
  tcp::resolver resolver(io);
  beast::tcp_stream stream(io);
  stream.connect(resolver.resolve(host, std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, host);
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result_int(), std::string(res[http::field::content_type]), res.body()};
}

/// Joins and plays until SessionComplete. Returns the number of frames received.
inline std::size_t play_session(FrameClient& conn, ParticipantClient& client) {
  conn.send(client.join());
  std::size_t received = 0;
  while (!client.complete()) {
    const auto m = conn.receive();
    ++received;
    if (m.type == "Error") throw ProtocolError(m.body.value("code", std::string("error")), m.body.value("message", std::string()));
    for (const auto& reply : client.on_server(m)) conn.send(reply);
  }
  return received;
}

}  // namespace mhng

#include <catch_amalgamated.hpp>

#include <future>
#include <thread>

#include "mhng/client.hpp"
#include "mhng/png.hpp"
#include "mhng/server.hpp"

using namespace mhng;

namespace {

std::vector<StimulusSet> manifests() {
  return {sample_stimuli(builtin_spec("hard"), 3, 1, "hard"), sample_stimuli(builtin_spec("easy"), 3, 2, "easy")};
}

GameConfig config() {
  GameConfig cfg;
  cfg.stimuli_per_dataset = 3;
  cfg.rounds = 2;
  cfg.seed = 5;
  return cfg;
}

/// Server on a free port with its io_context running on a background thread.
struct Running {
  net::io_context io;
  SessionHost host;
  std::unique_ptr<GameServer> server;
  std::thread thread;

  explicit Running(Transport transport) {
    host.create("s1", config(), manifests());
    ServerOptions opt;
    opt.port = 0;
    opt.transport = transport;
    opt.patch_size = 32;
    server = std::make_unique<GameServer>(io, host, opt, std::vector<std::string>{"s1"});
    server->start();
    thread = std::thread([this] { io.run(); });
  }
  ~Running() {
    net::post(io, [this] { server->stop(); });
    io.stop();
    thread.join();
  }
  unsigned short port() const { return server->port(); }
};

template <class Client>
void play_two(Running& srv) {
  ModelParticipant a(MhModel{}, 1), b(MhModel{}, 2);
  ParticipantClient ca("s1", "P1", a), cb("s1", "P2", b);
  auto run = [&](ParticipantClient& c) {
    Client conn("127.0.0.1", srv.port());
    play_session(conn, c);
    conn.close();
  };
  auto fa = std::async(std::launch::async, run, std::ref(ca));
  auto fb = std::async(std::launch::async, run, std::ref(cb));
  fa.get();
  fb.get();
  CHECK(ca.complete());
  CHECK(cb.complete());
  CHECK(ca.errors().empty());
  const auto state = srv.host.snapshot("s1");
  CHECK(state.phase == Phase::complete);
  CHECK(state.trial_counter == 24);
  const auto replay = replay_log(srv.host.events("s1"));
  CHECK_FALSE(replay.error);
  CHECK(replay.hash == state_hash(state));
}

}  // namespace

TEST_CASE("length-prefixed framing is big-endian") {
  const auto f = encode_length_prefixed(std::string(258, 'x'));
  REQUIRE(f.size() == 262);
  CHECK(f[0] == 0);
  CHECK(f[2] == 1);
  CHECK(f[3] == 2);
  CHECK(decode_length_prefix(reinterpret_cast<const unsigned char*>(f.data())) == 258);
}

TEST_CASE("HTTP serves stimulus PNGs and health") {
  Running srv(Transport::websocket);
  const auto png = http_get("127.0.0.1", srv.port(), "/stimuli/easy_2.png");
  CHECK(png.status == 200);
  CHECK(png.content_type == "image/png");
  const auto expect = encode_png(render_patch(manifests()[1].stimuli[2].color, 32));
  CHECK(png.body == std::string(expect.begin(), expect.end()));

  const auto health = http_get("127.0.0.1", srv.port(), "/health");
  CHECK(health.status == 200);
  CHECK(Json::parse(health.body)["status"] == "ok");
  CHECK(http_get("127.0.0.1", srv.port(), "/stimuli/easy_3.png").status == 404);
  CHECK(http_get("127.0.0.1", srv.port(), "/elsewhere").status == 404);
}

TEST_CASE("two participants complete a session over WebSocket") {
  Running srv(Transport::websocket);
  play_two<WsFrameClient>(srv);
}

TEST_CASE("two participants complete a session over length-prefixed TCP") {
  Running srv(Transport::tcp);
  play_two<TcpFrameClient>(srv);
}

TEST_CASE("malformed and misaddressed frames get Error replies") {
  Running srv(Transport::websocket);
  WsFrameClient conn("127.0.0.1", srv.port());
  conn.send_text("{oops");
  auto m = conn.receive();
  CHECK(m.type == "Error");
  CHECK(m.body["code"] == "bad_frame");
  conn.send({"nope", 1, "Join", "P1", Json::object()});
  m = conn.receive();
  CHECK(m.body["code"] == "unknown_session");
  conn.send({"s1", 1, "Join", "P1", Json::object()});
  CHECK(conn.receive().type == "Ack");
  CHECK(conn.receive().type == "Welcome");
  conn.close();
}

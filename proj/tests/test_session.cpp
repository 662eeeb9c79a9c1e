#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mhng/analysis.hpp"
#include "mhng/participant.hpp"
#include "mhng/session.hpp"

using namespace mhng;

namespace {

std::int64_t fixed_clock() { return 1000; }

std::vector<StimulusSet> manifests(std::size_t n = 15) {
  return {sample_stimuli(builtin_spec("hard"), n, 1, "hard"), sample_stimuli(builtin_spec("easy"), n, 2, "easy")};
}

GameConfig small_config() {
  GameConfig cfg;
  cfg.stimuli_per_dataset = 3;
  cfg.rounds = 1;
  cfg.datasets = {"hard"};
  cfg.seed = 4;
  return cfg;
}

WireMessage frame(const std::string& sender, std::uint64_t seq, const std::string& type, Json body = Json::object()) {
  return {"s1", seq, type, sender, std::move(body)};
}

Json labels(std::initializer_list<const char*> ls) {
  Json a = Json::array();
  for (auto l : ls) a.push_back(l);
  return a;
}

const WireMessage* find_type(const Transition& t, const std::string& type, const std::string& to = {}) {
  for (const auto& o : t.outbound)
    if (o.message.type == type && (to.empty() || o.recipient == to)) return &o.message;
  return nullptr;
}

/// Both joined and categorized; returns the state in NamingTurn.
SessionState ready_session() {
  auto s = create_session("s1", small_config(), manifests(3));
  s = handle_message(s, frame("P1", 1, "Join")).state;
  s = handle_message(s, frame("P2", 1, "Join")).state;
  for (const char* p : {"P1", "P2"}) {
    Json body;
    body["labels"] = labels({"A", "B", "A"});
    s = handle_message(s, frame(p, 2, "SubmitInitialCategorization", body)).state;
  }
  REQUIRE(s.phase == Phase::naming_turn);
  return s;
}

/// Drives two participants against a host until no frames remain.
void drive(SessionHost& host, const std::string& sid, std::array<Participant*, 2> players) {
  std::array<ParticipantClient, 2> clients{ParticipantClient(sid, "P1", *players[0]), ParticipantClient(sid, "P2", *players[1])};
  std::deque<WireMessage> pending{clients[0].join(), clients[1].join()};
  while (!pending.empty()) {
    auto msg = pending.front();
    pending.pop_front();
    for (auto& o : host.submit(msg)) {
      REQUIRE(o.message.type != "Error");
      for (auto& r : clients[o.recipient == "P1" ? 0 : 1].on_server(o.message)) pending.push_back(r);
    }
  }
}

}  // namespace

TEST_CASE("wire frames round-trip and malformed frames are rejected") {
  Json body;
  body["label"] = "C";
  const WireMessage m{"s1", 3, "ProposeName", "P1", body};
  const auto text = serialize_frame(m);
  CHECK(Json::parse(text)["schema"] == kWireSchema);
  CHECK(parse_frame(text) == m);
  CHECK_THROWS_AS(parse_frame("{not json"), ProtocolError);
  CHECK_THROWS_AS(parse_frame(R"({"schema":"other/2","session_id":"s","sequence":1,"type":"Join","sender":"a","body":{}})"),
                  ProtocolError);
  CHECK_THROWS_AS(parse_frame(R"({"schema":"mhng.wire/1","sequence":1,"type":"Join","sender":"a","body":{}})"), ProtocolError);
  CHECK(client_message_types().count("TurnAdvance"));
  CHECK(server_message_types().count("EditWarning"));
}

TEST_CASE("sessions need matching manifests and unique ids") {
  auto cfg = small_config();
  CHECK_THROWS_AS(create_session("s", cfg, manifests(4)), ValidationError);
  cfg.datasets = {"medium"};
  CHECK_THROWS_AS(create_session("s", cfg, manifests(3)), ValidationError);
  CHECK_THROWS_AS(create_session("", small_config(), manifests(3)), ValidationError);
  SessionHost host;
  host.create("s1", small_config(), manifests(3));
  CHECK(host.has("s1"));
  CHECK_THROWS_AS(host.create("s1", small_config(), manifests(3)), ValidationError);
  const auto out = host.submit(frame("P1", 1, "Join"));
  CHECK(out.front().message.type == "Ack");
  const auto unknown = host.submit({"nope", 1, "Join", "P1", Json::object()});
  CHECK(unknown.front().message.body["code"] == "unknown_session");
}

TEST_CASE("lobby admits two participants and then announces the dataset") {
  auto s = create_session("s1", small_config(), manifests(3));
  auto t = handle_message(s, frame("P1", 1, "Join"));
  REQUIRE(t.accepted);
  CHECK(find_type(t, "Welcome", "P1"));
  t = handle_message(t.state, frame("P2", 1, "Join"));
  CHECK(t.state.phase == Phase::initialization);
  const auto* set = find_type(t, "StimulusSet", "P2");
  REQUIRE(set);
  CHECK(set->body["images"][0] == "/stimuli/hard_0.png");
  CHECK(stimulus_set_from_json(set->body["manifest"]).stimuli == t.state.datasets[0].stimuli);

  const auto full = handle_message(t.state, frame("P3", 1, "Join"));
  CHECK_FALSE(full.accepted);
  CHECK(find_type(full, "Error")->body["code"] == "session_full");
}

TEST_CASE("out-of-turn and malformed frames leave state untouched") {
  const auto s = ready_session();
  const auto h = state_hash(s);
  const std::string listener = s.participants[s.listener()].id;
  const std::string speaker = s.participants[s.speaker()].id;

  Json prop;
  prop["label"] = "B";
  prop["category"] = "A";
  const auto wrong = handle_message(s, frame(listener, 3, "ProposeName", prop));
  CHECK_FALSE(wrong.accepted);
  CHECK(find_type(wrong, "Error")->body["code"] == "out_of_turn");
  CHECK(find_type(wrong, "Error")->sequence == 0);
  CHECK(state_hash(wrong.state) == h);

  const auto early = handle_message(s, frame(listener, 3, "Decision", Json{{"accept", true}}));
  CHECK(find_type(early, "Error")->body["code"] == "out_of_turn");

  const auto no_cat = handle_message(s, frame(speaker, 3, "ProposeName", Json{{"label", "B"}}));
  CHECK(find_type(no_cat, "Error")->body["code"] == "invalid_body");
  const auto bad_label = handle_message(s, frame(speaker, 3, "ProposeName", Json{{"label", "Z"}, {"category", "A"}}));
  CHECK(find_type(bad_label, "Error")->body["code"] == "invalid_body");
  const auto stranger = handle_message(s, frame("P9", 1, "ProposeName", prop));
  CHECK(find_type(stranger, "Error")->body["code"] == "unknown_participant");
  const auto server_type = handle_message(s, frame(speaker, 3, "Welcome"));
  CHECK(find_type(server_type, "Error")->body["code"] == "bad_frame");
  CHECK(state_hash(s) == h);

  // A rejected frame does not consume its sequence number.
  const auto ok = handle_message(s, frame(speaker, 3, "ProposeName", prop));
  CHECK(ok.accepted);
  CHECK(ok.state.phase == Phase::await_decision);
}

TEST_CASE("duplicates are acknowledged, gaps are refused, rejoin resumes") {
  const auto s = ready_session();
  const auto h = state_hash(s);
  const auto dup = handle_message(s, frame("P1", 2, "SubmitInitialCategorization", Json{{"labels", labels({"A", "A", "A"})}}));
  CHECK_FALSE(dup.accepted);
  CHECK(find_type(dup, "Ack")->body["duplicate"] == true);
  CHECK(state_hash(dup.state) == h);

  const auto gap = handle_message(s, frame("P1", 5, "TurnAdvance"));
  CHECK(find_type(gap, "Error")->body["code"] == "sequence_gap");
  CHECK(find_type(gap, "Error")->body["expected_sequence"] == 3);

  const auto resumed = handle_message(s, frame("P2", 1, "Join"));
  CHECK_FALSE(resumed.accepted);
  const auto* w = find_type(resumed, "Welcome");
  REQUIRE(w);
  CHECK(w->body["resumed"] == true);
  CHECK(w->body["last_sequence"] == 2);
  CHECK(find_type(resumed, "ShowStimulus"));
  CHECK(state_hash(resumed.state) == h);
}

TEST_CASE("a full turn: propose, decide, edit warning, advance") {
  auto s = ready_session();
  const int sp = s.speaker(), li = s.listener();
  const std::string speaker = s.participants[sp].id, listener = s.participants[li].id;
  const auto stim = s.turn().stimulus;

  auto t = handle_message(s, frame(speaker, 3, "ProposeName", Json{{"label", "E"}, {"category", "C"}}));
  CHECK(t.state.participants[sp].categories[stim] == 2);
  const auto* offer = find_type(t, "ProposeName", listener);
  REQUIRE(offer);
  CHECK(offer->body["label"] == "E");

  t = handle_message(t.state, frame(listener, 3, "Decision", Json{{"accept", true}}));
  CHECK(t.state.phase == Phase::await_edit);
  CHECK(t.state.participants[li].signs[stim] == 4);
  CHECK(t.state.participants[sp].signs[stim] == 4);
  CHECK(find_type(t, "Decision", speaker)->body["accept"] == true);
  for (const auto& e : t.events) CHECK(e.kind != "trial");

  // Speaker may edit another stimulus without a warning.
  t = handle_message(t.state, frame(speaker, 4, "EditCategorization", Json{{"stimulus", (stim + 1) % 3}, {"label", "D"}}));
  CHECK(t.accepted);
  CHECK_FALSE(find_type(t, "EditWarning"));

  t = handle_message(t.state, frame(listener, 4, "EditCategorization", Json{{"stimulus", stim}, {"label", "D"}}));
  CHECK(find_type(t, "EditWarning", listener));
  t = handle_message(t.state, frame(listener, 5, "TurnAdvance"));
  REQUIRE(t.accepted);
  const auto trial = std::find_if(t.events.begin(), t.events.end(), [](const auto& e) { return e.kind == "trial"; });
  REQUIRE(trial != t.events.end());
  const auto rec = trial_record_from_json(trial->payload);
  CHECK(rec.decision == 1);
  CHECK(rec.speaker_sign == 4);
  CHECK(rec.post_edit == 3);
  CHECK(rec.listener_signs == std::vector<int>{0, 1, 0});  // snapshot before the accept
  CHECK(t.state.phase == Phase::naming_turn);
  CHECK(t.state.trial_counter == 1);
  CHECK(find_type(t, "ShowStimulus"));
}

TEST_CASE("scripted edits produce warnings and post-edit labels") {
  ReplayParticipant::Script script;
  script.categorizations = {{0, 1, 0}};
  script.proposals = {{1, 0}, {1, 1}, {2, 0}};
  script.decisions = {true, false, true};
  script.edits = {std::optional<CategoryIndex>(3), std::nullopt, std::nullopt};
  ReplayParticipant a(script), b(script);
  const auto res = run_scripted_session("s1", small_config(), manifests(3), {&a, &b}, {"P1", "P2"}, fixed_clock);
  CHECK(res.state.phase == Phase::complete);
  CHECK(res.trials.size() == 6);
  CHECK(res.edit_warnings == 2);
  const auto edited = std::count_if(res.trials.begin(), res.trials.end(), [](const auto& t) { return t.post_edit.has_value(); });
  CHECK(edited == 2);

  ReplayParticipant short_a({{{0, 1, 0}}, {}, {}, {}}), short_b(script);
  CHECK_THROWS_AS(run_scripted_session("s1", small_config(), manifests(3), {&short_a, &short_b}), ProtocolError);
}

TEST_CASE("a full two-dataset session: 45 decisions each, replayable, inferable") {
  ModelParticipant p1(MhModel{}, 1), p2(MhModel{}, 2);
  GameConfig cfg;
  cfg.seed = 9;
  const auto res = run_scripted_session("full", cfg, manifests(), {&p1, &p2}, {"P1", "P2"}, fixed_clock);
  CHECK(res.state.phase == Phase::complete);
  REQUIRE(res.trials.size() == 180);
  for (const auto& p : res.state.participants) {
    CHECK(p.decisions.at("hard") == 45);
    CHECK(p.decisions.at("easy") == 45);
  }
  for (std::size_t i = 0; i < res.events.size(); ++i) CHECK(res.events[i].sequence == i + 1);
  for (std::size_t i = 0; i < res.trials.size(); ++i) CHECK(res.trials[i].trial_index == i);

  const auto replay = replay_log(res.events);
  CHECK_FALSE(replay.error);
  CHECK(replay.hash == state_hash(res.state));
  CHECK(replay.trials == res.trials);

  const auto inferred = infer_decisions(collect_session_log(res.events));
  CHECK(inferred.records.size() == 180);
  CHECK(inferred.warnings.empty());
}

TEST_CASE("replay reports gaps, truncation and divergence") {
  ReplayParticipant::Script script;
  script.categorizations = {{0, 1, 0}};
  script.proposals = {{1, 0}, {1, 1}, {2, 0}};
  script.decisions = {true, false, true};
  ReplayParticipant a(script), b(script);
  const auto res = run_scripted_session("s1", small_config(), manifests(3), {&a, &b}, {"P1", "P2"}, fixed_clock);
  REQUIRE_FALSE(replay_log(res.events).error);

  auto gap = res.events;
  gap.erase(gap.begin() + 5);
  const auto g = replay_log(gap);
  REQUIRE(g.error);
  CHECK(g.error->find("sequence gap: missing 6..6") != std::string::npos);

  auto truncated = res.events;
  truncated.pop_back();
  CHECK(replay_log(truncated).error);

  auto tampered = res.events;
  for (auto& e : tampered)
    if (e.kind == "trial") {
      e.payload["decision"] = 1 - e.payload["decision"].get<int>();
      break;
    }
  const auto d = replay_log(tampered);
  REQUIRE(d.error);
  CHECK(d.error->find("differs on replay") != std::string::npos);

  std::stringstream text;
  for (const auto& e : res.events) append_event(text, e);
  std::string body = text.str();
  body.resize(body.size() - 20);
  std::stringstream cut(body);
  const auto c = replay_log(cut);
  REQUIRE(c.error);
  CHECK(c.error->find("log truncated or corrupt") != std::string::npos);
}

TEST_CASE("the host persists an append-only log that replays to the same state") {
  const auto dir = std::filesystem::temp_directory_path() / "mhng_session_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  SessionHost host(dir.string(), fixed_clock);
  host.create("s1", small_config(), manifests(3));
  ModelParticipant p1(MhModel{}, 3), p2(MhModel{}, 4);
  drive(host, "s1", {&p1, &p2});
  const auto state = host.snapshot("s1");
  CHECK(state.phase == Phase::complete);

  std::ifstream in(dir / "s1.jsonl");
  const auto read = read_events(in);
  CHECK_FALSE(read.error);
  CHECK(read.records.size() == host.events("s1").size());
  for (const auto& r : read.records) CHECK(r.timestamp_ms == 1000);
  in.clear();
  in.seekg(0);
  const auto replay = replay_log(in);
  CHECK_FALSE(replay.error);
  CHECK(replay.hash == state_hash(state));
  std::filesystem::remove_all(dir);
}

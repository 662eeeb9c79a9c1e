#pragma once

// Live two-participant session: wire protocol, the pure turn-taking state
// machine, persistence and log replay.
//
// Frames are JSON documents {schema, session_id, sequence, type, sender, body}.
// Client sequence numbers are per sender, start at 1 and advance only when
// the server acknowledges; a rejected frame leaves the session untouched, so
// the client retries with the same number.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mhng/common.hpp"
#include "mhng/engine.hpp"
#include "mhng/event_log.hpp"
#include "mhng/inter_gm.hpp"
#include "mhng/stimulus.hpp"

namespace mhng {

inline constexpr const char* kWireSchema = "mhng.wire/1";
inline constexpr int kLabelCount = 5;

// --- wire messages -------------------------------------------------------------

struct WireMessage {
  std::string session_id;
  std::uint64_t sequence = 0;
  std::string type;
  std::string sender;  // participant id on client frames, "server" on replies
  Json body = Json::object();

  bool operator==(const WireMessage&) const = default;
};

inline const std::set<std::string>& client_message_types() {
  static const std::set<std::string> t{"Join", "SubmitInitialCategorization", "ProposeName", "Decision",
                                       "EditCategorization", "TurnAdvance"};
  return t;
}

inline const std::set<std::string>& server_message_types() {
  static const std::set<std::string> t{"Welcome", "Ack", "Error", "StimulusSet", "ShowStimulus", "ProposeName",
                                       "Decision", "EditWarning", "TurnAdvance", "SessionComplete"};
  return t;
}

inline Json to_json(const WireMessage& m) {
  Json j;
  j["schema"] = kWireSchema;
  j["session_id"] = m.session_id;
  j["sequence"] = m.sequence;
  j["type"] = m.type;
  j["sender"] = m.sender;
  j["body"] = m.body;
  return j;
}

inline WireMessage wire_from_json(const Json& j) {
  if (!j.is_object()) throw ProtocolError("bad_frame", "frame is not an object");
  try {
    if (j.contains("schema") && j.at("schema").get<std::string>() != kWireSchema)
      throw ProtocolError("bad_frame", "unsupported schema " + j.at("schema").get<std::string>());
    WireMessage m;
    m.session_id = j.at("session_id").get<std::string>();
    m.sequence = j.at("sequence").get<std::uint64_t>();
    m.type = j.at("type").get<std::string>();
    m.sender = j.value("sender", std::string());
    m.body = j.value("body", Json::object());
    if (!m.body.is_object()) throw ProtocolError("bad_frame", "body must be an object");
    if (!client_message_types().count(m.type) && !server_message_types().count(m.type))
      throw ProtocolError("bad_frame", "unknown message type " + m.type);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("bad_frame", std::string("malformed frame: ") + e.what());
  }
}

inline WireMessage parse_frame(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("bad_frame", std::string("frame is not JSON: ") + e.what());
  }
  return wire_from_json(j);
}

inline std::string serialize_frame(const WireMessage& m) { return to_json(m).dump(); }

// --- session state ----------------------------------------------------------------

enum class Phase { lobby, initialization, naming_turn, await_decision, await_edit, complete };

inline std::string phase_name(Phase p) {
  static constexpr const char* names[] = {"Lobby", "Initialization", "NamingTurn", "AwaitDecision", "AwaitEdit", "Complete"};
  return names[static_cast<int>(p)];
}

inline Phase phase_from_name(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Phase::complete); ++i)
    if (phase_name(static_cast<Phase>(i)) == s) return static_cast<Phase>(i);
  throw ValidationError("unknown phase " + s);
}

struct ParticipantState {
  std::string id;
  std::vector<CategoryIndex> categories;  // current categorization of the active dataset
  std::vector<SignIndex> signs;           // name memory; starts as the initial categorization
  bool submitted = false;
  std::uint64_t last_sequence = 0;
  std::map<std::string, std::size_t> decisions;  // per dataset

  bool operator==(const ParticipantState&) const = default;
};

struct SessionState {
  std::string session_id;
  GameConfig config;
  std::vector<StimulusSet> datasets;
  Hyperparams hyper = Hyperparams::defaults();
  Phase phase = Phase::lobby;
  std::vector<ParticipantState> participants;
  std::size_t dataset_index = 0;
  std::vector<Turn> schedule;
  std::size_t turn_index = 0;
  std::size_t trial_counter = 0;  // across the whole session
  std::optional<SignIndex> proposal;
  std::optional<TrialRecord> pending_trial;  // decided, finalized on TurnAdvance
  std::uint64_t server_sequence = 0;
  std::uint64_t log_sequence = 0;

  const StimulusSet& dataset() const { return datasets.at(dataset_index); }
  const Turn& turn() const { return schedule.at(turn_index); }
  int index_of(const std::string& participant) const {
    for (std::size_t i = 0; i < participants.size(); ++i)
      if (participants[i].id == participant) return static_cast<int>(i);
    return -1;
  }
  int speaker() const { return turn().speaker; }
  int listener() const { return 1 - turn().speaker; }
};

inline std::string labels_string(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += x < 0 ? '-' : static_cast<char>('A' + x);
  return s;
}

inline Json to_json(const SessionState& s) {
  Json j;
  j["session_id"] = s.session_id;
  j["config"] = to_json(s.config);
  Json ds = Json::array();
  for (const auto& d : s.datasets) ds.push_back(fnv1a(to_json(d).dump()));
  j["dataset_hashes"] = ds;
  j["phase"] = phase_name(s.phase);
  Json ps = Json::array();
  for (const auto& p : s.participants) {
    Json pj;
    pj["id"] = p.id;
    pj["categories"] = labels_string(p.categories);
    pj["signs"] = labels_string(p.signs);
    pj["submitted"] = p.submitted;
    pj["last_sequence"] = p.last_sequence;
    pj["decisions"] = p.decisions;
    ps.push_back(pj);
  }
  j["participants"] = ps;
  j["dataset_index"] = s.dataset_index;
  j["turn_index"] = s.turn_index;
  j["trial_counter"] = s.trial_counter;
  j["proposal"] = s.proposal ? Json(index_to_label(*s.proposal)) : Json();
  j["pending_trial"] = s.pending_trial ? to_json(*s.pending_trial) : Json();
  j["server_sequence"] = s.server_sequence;
  j["log_sequence"] = s.log_sequence;
  return j;
}

/// FNV-1a of the canonical state document; equal hashes mean equal sessions.
inline std::uint64_t state_hash(const SessionState& s) { return fnv1a(to_json(s).dump()); }

inline SessionHeader session_header(const SessionState& s) {
  SessionHeader h;
  h.session_id = s.session_id;
  h.source = "service";
  h.config = s.config;
  h.datasets = s.datasets;
  return h;
}

/// New session in Lobby. Datasets are matched to config.datasets by id.
inline SessionState create_session(const std::string& session_id, const GameConfig& config,
                                   const std::vector<StimulusSet>& manifests) {
  require(!session_id.empty(), "session id must not be empty");
  config.validate();
  SessionState s;
  s.session_id = session_id;
  s.config = config;
  for (const auto& name : config.datasets) {
    auto it = std::find_if(manifests.begin(), manifests.end(), [&](const StimulusSet& m) { return m.id == name; });
    require(it != manifests.end(), "no manifest for dataset '" + name + "'");
    require(it->size() == config.stimuli_per_dataset,
            "dataset '" + name + "' has " + std::to_string(it->size()) + " stimuli, config expects " +
                std::to_string(config.stimuli_per_dataset));
    s.datasets.push_back(*it);
  }
  return s;
}

// --- transitions -----------------------------------------------------------------

struct Outbound {
  std::string recipient;  // participant id
  WireMessage message;
};

struct Transition {
  SessionState state;
  std::vector<Outbound> outbound;
  std::vector<EventLogRecord> events;  // timestamps are stamped by the host
  bool accepted = false;
};

inline std::string stimulus_url(const std::string& dataset, std::size_t index) {
  return "/stimuli/" + dataset + "_" + std::to_string(index) + ".png";
}

namespace detail {

class Step {
 public:
  explicit Step(const SessionState& s) { t_.state = s; }

  SessionState& s() { return t_.state; }

  void send(const std::string& to, const std::string& type, Json body) {
    WireMessage m{t_.state.session_id, ++t_.state.server_sequence, type, "server", std::move(body)};
    t_.outbound.push_back({to, std::move(m)});
  }
  void broadcast(const std::string& type, const Json& body) {
    for (const auto& p : t_.state.participants) send(p.id, type, body);
  }
  void log(const std::string& kind, Json payload) {
    t_.events.push_back({0, t_.state.session_id, ++t_.state.log_sequence, kind, std::move(payload)});
  }
  Transition finish() && {
    t_.accepted = true;
    return std::move(t_);
  }

 private:
  Transition t_;
};

inline Transition reject(const SessionState& s, const WireMessage& msg, const std::string& code, const std::string& what) {
  Transition t;
  t.state = s;
  Json body;
  body["code"] = code;
  body["message"] = what;
  body["sequence"] = msg.sequence;
  const int who = s.index_of(msg.sender);
  body["expected_sequence"] = who >= 0 ? s.participants[who].last_sequence + 1 : 1;
  // The error reply does not consume a server sequence number: state is unchanged.
  t.outbound.push_back({msg.sender, {s.session_id, 0, "Error", "server", body}});
  return t;
}

inline Json dataset_body(const SessionState& s) {
  Json body;
  body["dataset"] = s.dataset().id;
  body["dataset_index"] = s.dataset_index;
  body["manifest"] = to_json(s.dataset());
  Json images = Json::array();
  for (std::size_t i = 0; i < s.dataset().size(); ++i) images.push_back(stimulus_url(s.dataset().id, i));
  body["images"] = images;
  return body;
}

inline Json show_body(const SessionState& s, int who) {
  const Turn& t = s.turn();
  Json body;
  body["dataset"] = s.dataset().id;
  body["index"] = t.stimulus;
  body["round"] = t.round;
  body["trial"] = s.turn_index;
  body["role"] = who == t.speaker ? "speaker" : "listener";
  body["image"] = stimulus_url(s.dataset().id, t.stimulus);
  return body;
}

inline Json proposal_body(const SessionState& s) {
  Json body;
  body["label"] = index_to_label(*s.proposal);
  body["index"] = s.turn().stimulus;
  return body;
}

inline void announce_dataset(Step& st) { st.broadcast("StimulusSet", dataset_body(st.s())); }

inline void show_turn(Step& st) {
  for (int who = 0; who < 2; ++who) st.send(st.s().participants[who].id, "ShowStimulus", show_body(st.s(), who));
}

/// A Join from a known participant re-sends what that participant needs to
/// continue; nothing in the session changes.
inline Transition resume(const SessionState& s, int who) {
  Transition t;
  t.state = s;
  const std::string& id = s.participants[who].id;
  auto send = [&](const std::string& type, Json body) { t.outbound.push_back({id, {s.session_id, 0, type, "server", std::move(body)}}); };
  Json w;
  w["participant"] = id;
  w["slot"] = who;
  w["phase"] = phase_name(s.phase);
  w["last_sequence"] = s.participants[who].last_sequence;
  w["resumed"] = true;
  send("Welcome", w);
  switch (s.phase) {
    case Phase::initialization:
      if (!s.participants[who].submitted) send("StimulusSet", dataset_body(s));
      break;
    case Phase::naming_turn: send("ShowStimulus", show_body(s, who)); break;
    case Phase::await_decision:
      send("ShowStimulus", show_body(s, who));
      if (who == s.listener()) send("ProposeName", proposal_body(s));
      break;
    case Phase::complete: send("SessionComplete", Json{{"trials", s.trial_counter}}); break;
    default: break;
  }
  return t;
}

inline std::vector<CategoryIndex> parse_labels(const Json& arr, std::size_t n) {
  if (!arr.is_array() || arr.size() != n)
    throw ProtocolError("invalid_body", "categorization must list exactly " + std::to_string(n) + " labels");
  std::vector<CategoryIndex> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw ProtocolError("invalid_body", "labels must be strings A-E");
    out.push_back(label_to_index(v.get<std::string>(), kLabelCount));
  }
  return out;
}

inline CategoryIndex parse_label(const Json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string())
    throw ProtocolError("invalid_body", std::string("missing label '") + key + "'");
  return label_to_index(body.at(key).get<std::string>(), kLabelCount);
}

inline Eigen::MatrixXd listener_theta(const ParticipantState& p, const Hyperparams& h) {
  return posterior_theta_mean(sign_category_counts(p.categories, p.signs, h.categories(), h.signs()), h.alpha);
}

}  // namespace detail

/// Pure transition. Invalid or out-of-turn frames produce an Error reply to
/// the sender and leave the state unchanged.
inline Transition handle_message(const SessionState& state, const WireMessage& msg) {
  using detail::reject;
  if (msg.session_id != state.session_id) return reject(state, msg, "unknown_session", "frame addressed to another session");
  if (!client_message_types().count(msg.type)) return reject(state, msg, "bad_frame", "not a client message: " + msg.type);

  int who = state.index_of(msg.sender);
  if (who < 0 && msg.type != "Join") return reject(state, msg, "unknown_participant", "join the session first");
  if (who >= 0 && msg.type == "Join") return detail::resume(state, who);
  if (who >= 0) {
    const auto last = state.participants[who].last_sequence;
    if (msg.sequence <= last) {
      Transition t;
      t.state = state;
      Json body;
      body["sequence"] = msg.sequence;
      body["duplicate"] = true;
      t.outbound.push_back({msg.sender, {state.session_id, 0, "Ack", "server", body}});
      return t;
    }
    if (msg.sequence != last + 1)
      return reject(state, msg, "sequence_gap",
                    "missing sequence " + std::to_string(last + 1) + ".." + std::to_string(msg.sequence - 1));
  } else if (msg.sequence != 1) {
    return reject(state, msg, "sequence_gap", "first frame must carry sequence 1");
  }

  try {
    detail::Step st(state);
    auto& s = st.s();
    const std::size_t n_stim = s.datasets.empty() ? 0 : s.dataset().size();

    if (msg.type == "Join") {
      if (msg.sender.empty()) throw ProtocolError("invalid_body", "sender must name the participant");
      if (s.phase != Phase::lobby) throw ProtocolError("session_full", "session already has two participants");
      ParticipantState p;
      p.id = msg.sender;
      s.participants.push_back(p);
      who = static_cast<int>(s.participants.size()) - 1;
    } else if (msg.type == "SubmitInitialCategorization") {
      if (s.phase != Phase::initialization) throw ProtocolError("out_of_turn", "not in the categorization phase");
      auto& p = s.participants[who];
      if (p.submitted) throw ProtocolError("out_of_turn", "categorization already submitted");
      if (msg.body.value("dataset", s.dataset().id) != s.dataset().id)
        throw ProtocolError("invalid_body", "categorization is for another dataset");
      p.categories = detail::parse_labels(msg.body.value("labels", Json()), n_stim);
      p.signs = p.categories;
      p.submitted = true;
    } else if (msg.type == "ProposeName") {
      if (s.phase != Phase::naming_turn || who != s.speaker())
        throw ProtocolError("out_of_turn", "only the speaker may propose, once per trial");
      const SignIndex name = detail::parse_label(msg.body, "label");
      const CategoryIndex cat = detail::parse_label(msg.body, "category");
      s.participants[who].categories[s.turn().stimulus] = cat;
      s.proposal = name;
    } else if (msg.type == "Decision") {
      if (s.phase != Phase::await_decision || who != s.listener())
        throw ProtocolError("out_of_turn", "only the listener may decide on a pending proposal");
      if (!msg.body.contains("accept") || !msg.body.at("accept").is_boolean())
        throw ProtocolError("invalid_body", "Decision needs boolean 'accept'");
    } else if (msg.type == "EditCategorization") {
      auto& p = s.participants[who];
      if (s.phase == Phase::complete) throw ProtocolError("out_of_turn", "session is complete");
      if (!p.submitted) throw ProtocolError("out_of_turn", "submit the initial categorization first");
      if (!msg.body.contains("stimulus") || !msg.body.at("stimulus").is_number_unsigned())
        throw ProtocolError("invalid_body", "EditCategorization needs 'stimulus'");
      const auto idx = msg.body.at("stimulus").get<std::size_t>();
      if (idx >= n_stim) throw ProtocolError("invalid_body", "stimulus index out of range");
      p.categories[idx] = detail::parse_label(msg.body, "label");
    } else if (msg.type == "TurnAdvance") {
      if (s.phase != Phase::await_edit || who != s.listener())
        throw ProtocolError("out_of_turn", "only the listener advances after deciding");
    }

    // Accepted: consume the sequence number, log the frame, acknowledge.
    s.participants[who].last_sequence = msg.sequence;
    st.log("message", to_json(msg));
    {
      Json ack;
      ack["sequence"] = msg.sequence;
      st.send(msg.sender, "Ack", ack);
    }

    if (msg.type == "Join") {
      Json w;
      w["participant"] = msg.sender;
      w["slot"] = who;
      w["phase"] = phase_name(s.phase);
      st.send(msg.sender, "Welcome", w);
      if (s.participants.size() == 2) {
        s.phase = Phase::initialization;
        s.schedule = build_schedule(s.dataset().size(), s.config.rounds, derive_seed(s.config.seed, s.dataset_index));
        detail::announce_dataset(st);
      }
    } else if (msg.type == "SubmitInitialCategorization") {
      if (std::all_of(s.participants.begin(), s.participants.end(), [](const auto& p) { return p.submitted; })) {
        s.phase = Phase::naming_turn;
        s.turn_index = 0;
        detail::show_turn(st);
      }
    } else if (msg.type == "ProposeName") {
      s.phase = Phase::await_decision;
      st.send(s.participants[s.listener()].id, "ProposeName", detail::proposal_body(s));
    } else if (msg.type == "Decision") {
      const bool accept = msg.body.at("accept").get<bool>();
      const Turn& t = s.turn();
      auto& sp = s.participants[s.speaker()];
      auto& li = s.participants[s.listener()];
      const SignIndex s_star = *s.proposal;
      TrialRecord rec;
      rec.trial_index = s.trial_counter;
      rec.round = t.round;
      rec.dataset_id = s.dataset().id;
      rec.stimulus_index = t.stimulus;
      rec.speaker_id = sp.id;
      rec.listener_id = li.id;
      rec.speaker_sign = s_star;
      rec.listener_sign = li.signs[t.stimulus];
      rec.listener_category = li.categories[t.stimulus];
      rec.listener_categories = li.categories;
      rec.listener_signs = li.signs;
      rec.r_mh = acceptance_terms(detail::listener_theta(li, s.hyper), rec.listener_category, s_star, rec.listener_sign).r_mh;
      rec.decision = accept ? 1 : 0;
      if (accept) {
        li.signs[t.stimulus] = s_star;
        sp.signs[t.stimulus] = s_star;
      }
      li.decisions[s.dataset().id] += 1;
      s.pending_trial = rec;
      s.proposal.reset();
      s.phase = Phase::await_edit;
      Json body;
      body["accept"] = accept;
      body["index"] = t.stimulus;
      body["label"] = index_to_label(s_star);
      st.send(sp.id, "Decision", body);
    } else if (msg.type == "EditCategorization") {
      const auto idx = msg.body.at("stimulus").get<std::size_t>();
      if (s.phase == Phase::await_edit && who == s.listener() && idx == s.turn().stimulus) {
        s.pending_trial->post_edit = s.participants[who].categories[idx];
        Json body;
        body["stimulus"] = idx;
        body["message"] = "you changed the category of the stimulus you just decided on";
        st.send(msg.sender, "EditWarning", body);
      }
    } else if (msg.type == "TurnAdvance") {
      st.log("trial", to_json(*s.pending_trial));
      s.pending_trial.reset();
      ++s.trial_counter;
      ++s.turn_index;
      Json adv;
      adv["trial"] = s.trial_counter;
      st.broadcast("TurnAdvance", adv);
      if (s.turn_index < s.schedule.size()) {
        s.phase = Phase::naming_turn;
        detail::show_turn(st);
      } else if (s.dataset_index + 1 < s.datasets.size()) {
        ++s.dataset_index;
        s.turn_index = 0;
        s.schedule = build_schedule(s.dataset().size(), s.config.rounds, derive_seed(s.config.seed, s.dataset_index));
        for (auto& p : s.participants) {
          p.submitted = false;
          p.categories.clear();
          p.signs.clear();
        }
        s.phase = Phase::initialization;
        detail::announce_dataset(st);
      } else {
        s.phase = Phase::complete;
        Json done;
        done["trials"] = s.trial_counter;
        st.broadcast("SessionComplete", done);
      }
    }
    return std::move(st).finish();
  } catch (const ProtocolError& e) {
    return reject(state, msg, e.code(), e.what());
  } catch (const ValidationError& e) {
    return reject(state, msg, "invalid_body", e.what());
  }
}

// --- replay ------------------------------------------------------------------------

struct ReplayResult {
  std::optional<SessionState> state;
  std::vector<TrialRecord> trials;  // only trials whose record was reached in order
  std::optional<std::string> error;
  std::uint64_t hash = 0;
};

/// Rebuilds one session from its log by re-running every accepted frame.
/// Gaps, divergent derived records, a truncated tail, or a session that never
/// reached Complete are reported; trials up to the failure point are kept.
inline ReplayResult replay_log(const std::vector<EventLogRecord>& records,
                               const std::optional<std::string>& session_id = std::nullopt) {
  ReplayResult out;
  std::optional<std::string> sid = session_id;
  std::uint64_t expected = 1;
  std::vector<EventLogRecord> derived;  // events the state machine produced but the log has not shown yet
  std::size_t derived_pos = 0;
  bool engine_export = false;
  auto fail = [&](std::string why) {
    out.error = std::move(why);
    if (out.state) out.hash = state_hash(*out.state);
    return out;
  };
  for (const auto& r : records) {
    if (!sid) sid = r.session_id;
    if (r.session_id != *sid) continue;
    if (r.sequence != expected) {
      if (r.sequence > expected)
        return fail("sequence gap: missing " + std::to_string(expected) + ".." + std::to_string(r.sequence - 1));
      return fail("sequence " + std::to_string(r.sequence) + " out of order (expected " + std::to_string(expected) + ")");
    }
    ++expected;
    if (r.kind == "session") {
      if (out.state) return fail("duplicate session header");
      const auto h = session_header_from_json(r.payload);
      out.state = create_session(h.session_id, h.config, h.datasets);
      out.state->log_sequence = r.sequence;
      engine_export = h.source == "engine";
      continue;
    }
    if (!out.state) return fail("log does not start with a session header");
    if (engine_export) {
      // Agent-vs-agent histories carry no frames; only ordering and records are checked.
      if (r.kind != "trial") return fail("unexpected '" + r.kind + "' record in an engine export");
      out.trials.push_back(trial_record_from_json(r.payload));
      out.state->log_sequence = r.sequence;
      continue;
    }
    if (r.kind == "message") {
      if (derived_pos != derived.size()) return fail("derived records missing before sequence " + std::to_string(r.sequence));
      WireMessage m;
      try {
        m = wire_from_json(r.payload);
      } catch (const ProtocolError& e) {
        return fail(std::string("sequence ") + std::to_string(r.sequence) + ": " + e.what());
      }
      auto t = handle_message(*out.state, m);
      if (!t.accepted) return fail("sequence " + std::to_string(r.sequence) + ": logged frame is rejected on replay");
      out.state = std::move(t.state);
      derived.assign(t.events.begin() + 1, t.events.end());
      derived_pos = 0;
    } else if (r.kind == "trial") {
      if (derived_pos >= derived.size() || derived[derived_pos].kind != "trial")
        return fail("unexpected trial record at sequence " + std::to_string(r.sequence));
      const TrialRecord logged = trial_record_from_json(r.payload);
      const TrialRecord replayed = trial_record_from_json(derived[derived_pos].payload);
      if (!(logged == replayed)) return fail("trial record at sequence " + std::to_string(r.sequence) + " differs on replay");
      out.trials.push_back(logged);
      ++derived_pos;
    } else {
      return fail("unknown record kind '" + r.kind + "'");
    }
  }
  if (!out.state) return fail("no session header");
  if (derived_pos != derived.size()) return fail("log truncated: derived records missing at the end");
  if (engine_export) {
    out.state->phase = Phase::complete;
    out.state->trial_counter = out.trials.size();
  }
  if (out.state->phase != Phase::complete) return fail("log ends before the session completed (" + phase_name(out.state->phase) + ")");
  out.hash = state_hash(*out.state);
  return out;
}

inline ReplayResult replay_log(std::istream& in, const std::optional<std::string>& session_id = std::nullopt) {
  auto read = read_events(in);
  auto out = replay_log(read.records, session_id);
  if (read.error) {
    const std::string what = "log truncated or corrupt at " + *read.error;
    out.error = out.error ? what + "; " + *out.error : what;
  }
  return out;
}

// --- host: serialized sessions with persistence -----------------------------------

using Clock = std::int64_t (*)();

inline std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

/// Owns sessions and their append-only logs. Each session has its own mutex,
/// so frames from its two clients are applied one at a time while distinct
/// sessions proceed independently.
class SessionHost {
 public:
  explicit SessionHost(std::string log_dir = {}, Clock clock = wall_clock_ms)
      : log_dir_(std::move(log_dir)), clock_(clock) {}

  void create(const std::string& session_id, const GameConfig& config, const std::vector<StimulusSet>& manifests) {
    auto slot = std::make_shared<Slot>();
    slot->state = create_session(session_id, config, manifests);
    {
      std::lock_guard lock(mutex_);
      if (sessions_.count(session_id)) throw ValidationError("session '" + session_id + "' already exists");
      sessions_[session_id] = slot;
    }
    if (!log_dir_.empty()) slot->log.open(log_dir_ + "/" + session_id + ".jsonl", std::ios::app);
    std::lock_guard lock(slot->mutex);
    slot->state.log_sequence = 1;
    persist(*slot, {clock_(), session_id, 1, "session", to_json(session_header(slot->state))});
  }

  bool has(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    return sessions_.count(session_id) > 0;
  }

  std::vector<Outbound> submit(const WireMessage& msg) {
    auto slot = find(msg.session_id);
    if (!slot) {
      Json body;
      body["code"] = "unknown_session";
      body["message"] = "no session '" + msg.session_id + "'";
      body["sequence"] = msg.sequence;
      return {{msg.sender, {msg.session_id, 0, "Error", "server", body}}};
    }
    std::lock_guard lock(slot->mutex);
    auto t = handle_message(slot->state, msg);
    for (auto& e : t.events) {
      e.timestamp_ms = clock_();
      persist(*slot, e);
    }
    slot->state = std::move(t.state);
    return std::move(t.outbound);
  }

  SessionState snapshot(const std::string& session_id) const {
    auto slot = find(session_id);
    require(slot != nullptr, "unknown session '" + session_id + "'");
    std::lock_guard lock(slot->mutex);
    return slot->state;
  }

  std::vector<EventLogRecord> events(const std::string& session_id) const {
    auto slot = find(session_id);
    require(slot != nullptr, "unknown session '" + session_id + "'");
    std::lock_guard lock(slot->mutex);
    return slot->events;
  }

  std::vector<StimulusSet> datasets(const std::string& session_id) const { return snapshot(session_id).datasets; }

 private:
  struct Slot {
    std::mutex mutex;
    SessionState state;
    std::vector<EventLogRecord> events;
    std::ofstream log;
  };

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  static void persist(Slot& slot, const EventLogRecord& e) {
    slot.events.push_back(e);
    if (slot.log.is_open()) append_event(slot.log, e);
  }

  std::string log_dir_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

}  // namespace mhng

#pragma once

// JSONL event log shared by live sessions, engine history exports and the
// analysis. One record per line:
//   {"ts": <ms>, "session_id": "...", "sequence": N, "kind": "session"|"message"|"trial", "payload": {...}}

#include <cstdint>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mhng/common.hpp"
#include "mhng/engine.hpp"
#include "mhng/stimulus.hpp"

namespace mhng {

using Json = nlohmann::ordered_json;

inline constexpr const char* kLogSchema = "mhng.log/1";

struct EventLogRecord {
  std::int64_t timestamp_ms = 0;
  std::string session_id;
  std::uint64_t sequence = 0;
  std::string kind;
  Json payload;
};

inline Json to_json(const EventLogRecord& r) {
  Json j;
  j["ts"] = r.timestamp_ms;
  j["session_id"] = r.session_id;
  j["sequence"] = r.sequence;
  j["kind"] = r.kind;
  j["payload"] = r.payload;
  return j;
}

inline EventLogRecord event_from_json(const Json& j) {
  try {
    return {j.at("ts").get<std::int64_t>(), j.at("session_id").get<std::string>(), j.at("sequence").get<std::uint64_t>(),
            j.at("kind").get<std::string>(), j.at("payload")};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed log record: ") + e.what());
  }
}

inline void append_event(std::ostream& out, const EventLogRecord& r) {
  out << to_json(r).dump() << '\n';
  out.flush();
}

struct LogReadResult {
  std::vector<EventLogRecord> records;
  std::optional<std::string> error;  // set when a line failed to parse; reading stops there
  std::size_t error_line = 0;
};

inline LogReadResult read_events(std::istream& in) {
  LogReadResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.records.push_back(event_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      out.error = "line " + std::to_string(lineno) + ": " + e.what();
      out.error_line = lineno;
      break;
    }
  }
  return out;
}

// --- session header -----------------------------------------------------------

inline Json to_json(const GameConfig& c) {
  Json j;
  j["stimuli_per_dataset"] = c.stimuli_per_dataset;
  j["rounds"] = c.rounds;
  j["datasets"] = c.datasets;
  j["seed"] = c.seed;
  return j;
}

inline GameConfig game_config_from_json(const Json& j) {
  try {
    GameConfig c;
    c.stimuli_per_dataset = j.value("stimuli_per_dataset", c.stimuli_per_dataset);
    c.rounds = j.value("rounds", c.rounds);
    if (j.contains("datasets")) c.datasets = j.at("datasets").get<std::vector<std::string>>();
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed game config: ") + e.what());
  }
}

/// Payload of the "session" record written once when a session is created.
struct SessionHeader {
  std::string session_id;
  std::string source = "service";  // "service" or "engine"
  GameConfig config;
  std::vector<StimulusSet> datasets;
  std::vector<std::string> participants;  // known up front for engine exports

  const StimulusSet* dataset(const std::string& id) const {
    for (const auto& d : datasets)
      if (d.id == id) return &d;
    return nullptr;
  }
};

inline Json to_json(const SessionHeader& h) {
  Json j;
  j["schema"] = kLogSchema;
  j["session_id"] = h.session_id;
  j["source"] = h.source;
  j["config"] = to_json(h.config);
  auto ds = Json::array();
  for (const auto& d : h.datasets) ds.push_back(to_json(d));
  j["datasets"] = ds;
  j["participants"] = h.participants;
  return j;
}

inline SessionHeader session_header_from_json(const Json& j) {
  try {
    require(j.at("schema").get<std::string>() == kLogSchema, "unsupported log schema");
    SessionHeader h;
    h.session_id = j.at("session_id").get<std::string>();
    h.source = j.value("source", std::string("service"));
    h.config = game_config_from_json(j.at("config"));
    for (const auto& d : j.at("datasets")) h.datasets.push_back(stimulus_set_from_json(d));
    h.participants = j.value("participants", std::vector<std::string>{});
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed session header: ") + e.what());
  }
}

// --- collected view for analysis -------------------------------------------------

struct LoggedTrial {
  std::string session_id;
  TrialRecord trial;
};

struct SessionLog {
  std::map<std::string, SessionHeader> sessions;
  std::vector<LoggedTrial> trials;
};

/// Headers and trial records from any mix of service logs and engine exports.
inline SessionLog collect_session_log(const std::vector<EventLogRecord>& records) {
  SessionLog log;
  for (const auto& r : records) {
    if (r.kind == "session") {
      auto h = session_header_from_json(r.payload);
      log.sessions[h.session_id] = std::move(h);
    } else if (r.kind == "trial") {
      log.trials.push_back({r.session_id, trial_record_from_json(r.payload)});
    }
  }
  return log;
}

/// Engine history as a log: one session header, then one record per exchange.
inline std::vector<EventLogRecord> export_history(const SessionHeader& header,
                                                  const std::vector<TrialRecord>& history) {
  std::vector<EventLogRecord> out;
  std::uint64_t seq = 1;
  out.push_back({0, header.session_id, seq++, "session", to_json(header)});
  for (const auto& t : history) out.push_back({0, header.session_id, seq++, "trial", to_json(t)});
  return out;
}

}  // namespace mhng

#pragma once

// Scripted participants and the client-side protocol adapter that lets them
// play live sessions, either in-process or over a socket.

#include <Eigen/Dense>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mhng/common.hpp"
#include "mhng/engine.hpp"
#include "mhng/inter_gm.hpp"
#include "mhng/session.hpp"
#include "mhng/stimulus.hpp"

namespace mhng {

struct Proposal {
  SignIndex name = 0;
  CategoryIndex category = 0;  // speaker's confirmed (or edited) category for the stimulus
};

class Participant {
 public:
  virtual ~Participant() = default;
  virtual std::vector<CategoryIndex> categorize(const StimulusSet& set) = 0;
  virtual Proposal propose(std::size_t stimulus) = 0;
  virtual bool decide(std::size_t stimulus, SignIndex proposed) = 0;
  /// Called after the listener's decision; a returned label is sent as an edit.
  virtual std::optional<CategoryIndex> edit_after_decision(std::size_t, bool) { return std::nullopt; }
  /// Both roles hear the outcome of every exchange they take part in.
  virtual void on_outcome(std::size_t, SignIndex, bool) {}
};

/// Categorizes like a Bayesian GMM, names by sampling P(s | theta, c) and
/// decides with an acceptance model evaluated on its own posterior-mean theta,
/// the same quantity the server records as r_mh.
class ModelParticipant : public Participant {
 public:
  ModelParticipant(AcceptanceModel model, std::uint64_t seed, Hyperparams hyper = Hyperparams::defaults())
      : model_(std::move(model)), hyper_(std::move(hyper)), seed_(seed), rng_(make_rng(seed)) {
    validate_model(model_);
  }

  std::vector<CategoryIndex> categorize(const StimulusSet& set) override {
    const auto xs = set.observations();
    const std::vector<SignIndex> one_sign(xs.size(), 0);
    GibbsOptions opt;
    opt.iterations = 200;
    opt.burn_in = 100;
    opt.seed = derive_seed(seed_, fnv1a(set.id));
    categories_ = gibbs_fit(xs, std::nullopt, one_sign, hyper_, opt).assignments;
    signs_ = categories_;
    return categories_;
  }

  Proposal propose(std::size_t n) override {
    const auto theta = theta_mean();
    return {speaker_propose(categories_.at(n), theta, hyper_.pi, rng_), categories_.at(n)};
  }

  bool decide(std::size_t n, SignIndex proposed) override {
    const auto terms = acceptance_terms(theta_mean(), categories_.at(n), proposed, signs_.at(n));
    last_r_mh_ = terms.r_mh;
    return bernoulli(rng_, model_acceptance(model_, terms.r_mh, terms.numerator, terms.denominator).probability);
  }

  void on_outcome(std::size_t n, SignIndex proposed, bool accepted) override {
    if (accepted) signs_.at(n) = proposed;
  }

  const std::vector<CategoryIndex>& categories() const { return categories_; }
  const std::vector<SignIndex>& signs() const { return signs_; }
  double last_r_mh() const { return last_r_mh_; }

 private:
  Eigen::MatrixXd theta_mean() const {
    return posterior_theta_mean(sign_category_counts(categories_, signs_, hyper_.categories(), hyper_.signs()),
                                hyper_.alpha);
  }

  AcceptanceModel model_;
  Hyperparams hyper_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<CategoryIndex> categories_;
  std::vector<SignIndex> signs_;
  double last_r_mh_ = 1.0;
};

/// Plays back fixed answers; used to drive exact protocol scenarios.
class ReplayParticipant : public Participant {
 public:
  struct Script {
    std::deque<std::vector<CategoryIndex>> categorizations;
    std::deque<Proposal> proposals;
    std::deque<bool> decisions;
    std::deque<std::optional<CategoryIndex>> edits;  // consumed per decision when non-empty
  };

  explicit ReplayParticipant(Script script) : script_(std::move(script)) {}

  std::vector<CategoryIndex> categorize(const StimulusSet&) override { return take(script_.categorizations); }
  Proposal propose(std::size_t) override { return take(script_.proposals); }
  bool decide(std::size_t, SignIndex) override { return take(script_.decisions); }
  std::optional<CategoryIndex> edit_after_decision(std::size_t, bool) override {
    return script_.edits.empty() ? std::nullopt : take(script_.edits);
  }

 private:
  template <class T>
  static T take(std::deque<T>& q) {
    if (q.empty()) throw ProtocolError("script_exhausted", "replay script has no more answers");
    T v = std::move(q.front());
    q.pop_front();
    return v;
  }

  Script script_;
};

/// Turns server frames into the participant's replies. Sequence numbers
/// advance per frame sent; the adapter assumes an in-order, reliable channel.
class ParticipantClient {
 public:
  ParticipantClient(std::string session_id, std::string participant_id, Participant& participant)
      : session_id_(std::move(session_id)), id_(std::move(participant_id)), participant_(participant) {}

  WireMessage join() { return frame("Join", Json::object()); }

  std::vector<WireMessage> on_server(const WireMessage& m) {
    std::vector<WireMessage> out;
    if (m.type == "Error") {
      errors_.push_back(m.body.value("code", std::string("error")) + ": " + m.body.value("message", std::string()));
    } else if (m.type == "StimulusSet") {
      current_ = stimulus_set_from_json(m.body.at("manifest"));
      Json body;
      body["dataset"] = current_->id;
      Json labels = Json::array();
      for (auto c : participant_.categorize(*current_)) labels.push_back(index_to_label(c));
      body["labels"] = labels;
      out.push_back(frame("SubmitInitialCategorization", body));
    } else if (m.type == "ShowStimulus") {
      if (m.body.at("role") == "speaker") {
        const auto p = participant_.propose(m.body.at("index").get<std::size_t>());
        Json body;
        body["label"] = index_to_label(p.name);
        body["category"] = index_to_label(p.category);
        out.push_back(frame("ProposeName", body));
      }
    } else if (m.type == "ProposeName") {
      const auto n = m.body.at("index").get<std::size_t>();
      const auto s = label_to_index(m.body.at("label").get<std::string>(), kLabelCount);
      const bool accept = participant_.decide(n, s);
      participant_.on_outcome(n, s, accept);
      Json body;
      body["accept"] = accept;
      out.push_back(frame("Decision", body));
      if (auto edit = participant_.edit_after_decision(n, accept)) {
        Json e;
        e["stimulus"] = n;
        e["label"] = index_to_label(*edit);
        out.push_back(frame("EditCategorization", e));
      }
      out.push_back(frame("TurnAdvance", Json::object()));
    } else if (m.type == "Decision") {
      participant_.on_outcome(m.body.at("index").get<std::size_t>(),
                              label_to_index(m.body.at("label").get<std::string>(), kLabelCount),
                              m.body.at("accept").get<bool>());
    } else if (m.type == "EditWarning") {
      ++warnings_;
    } else if (m.type == "SessionComplete") {
      complete_ = true;
    }
    return out;
  }

  const std::string& id() const { return id_; }
  bool complete() const { return complete_; }
  std::size_t warnings() const { return warnings_; }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  WireMessage frame(const std::string& type, Json body) {
    return {session_id_, ++sequence_, type, id_, std::move(body)};
  }

  std::string session_id_;
  std::string id_;
  Participant& participant_;
  std::uint64_t sequence_ = 0;
  std::optional<StimulusSet> current_;
  bool complete_ = false;
  std::size_t warnings_ = 0;
  std::vector<std::string> errors_;
};

struct ScriptedSessionResult {
  SessionState state;
  std::vector<EventLogRecord> events;  // header first
  std::vector<TrialRecord> trials;
  std::size_t edit_warnings = 0;
};

/// Runs a whole session in-process through SessionHost with two scripted
/// participants; errors from the state machine abort the run.
inline ScriptedSessionResult run_scripted_session(const std::string& session_id, const GameConfig& config,
                                                  const std::vector<StimulusSet>& manifests,
                                                  std::array<Participant*, 2> players,
                                                  std::array<std::string, 2> ids = {"P1", "P2"},
                                                  std::int64_t (*clock)() = wall_clock_ms) {
  SessionHost host({}, clock);
  host.create(session_id, config, manifests);
  std::array<ParticipantClient, 2> clients{ParticipantClient(session_id, ids[0], *players[0]),
                                           ParticipantClient(session_id, ids[1], *players[1])};
  std::deque<WireMessage> pending{clients[0].join(), clients[1].join()};
  while (!pending.empty()) {
    WireMessage msg = std::move(pending.front());
    pending.pop_front();
    for (auto& o : host.submit(msg)) {
      if (o.message.type == "Error")
        throw ProtocolError(o.message.body.value("code", std::string("error")),
                            "scripted session rejected " + msg.type + ": " + o.message.body.value("message", std::string()));
      auto& c = o.recipient == ids[0] ? clients[0] : clients[1];
      for (auto& reply : c.on_server(o.message)) pending.push_back(std::move(reply));
    }
  }
  ScriptedSessionResult out;
  out.state = host.snapshot(session_id);
  out.events = host.events(session_id);
  for (const auto& e : out.events)
    if (e.kind == "trial") out.trials.push_back(trial_record_from_json(e.payload));
  out.edit_warnings = clients[0].warnings() + clients[1].warnings();
  return out;
}

}  // namespace mhng

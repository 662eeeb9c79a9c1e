#pragma once

// Joint-attention naming game: acceptance rules, the turn schedule shared by
// simulated and live sessions, trial records, and the agent-vs-agent game.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <span>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

#include "mhng/common.hpp"
#include "mhng/inter_gm.hpp"
#include "mhng/stimulus.hpp"

namespace mhng {

// --- acceptance models --------------------------------------------------------

struct ConstantModel {
  double b_bar = 0.5;
};
struct MhModel {};
struct NumeratorModel {};
struct SubtractionModel {};
struct BinaryModel {};
/// Bern(z | a * r_mh + b); requires 0 <= b and a + b <= 1.
struct AffineMhModel {
  double a = 1.0;
  double b = 0.0;
};

using AcceptanceModel =
    std::variant<ConstantModel, MhModel, NumeratorModel, SubtractionModel, BinaryModel, AffineMhModel>;

inline void validate_model(const AcceptanceModel& m) {
  if (auto* c = std::get_if<ConstantModel>(&m)) require(c->b_bar >= 0.0 && c->b_bar <= 1.0, "Constant b_bar must lie in [0,1]");
  if (auto* f = std::get_if<AffineMhModel>(&m)) require(f->b >= 0.0 && f->a + f->b <= 1.0 + 1e-12, "AffineMH needs 0 <= b and a + b <= 1");
}

inline std::string model_name(const AcceptanceModel& m) {
  static constexpr const char* names[] = {"Constant", "MH", "Numerator", "Subtraction", "Binary", "AffineMH"};
  return names[m.index()];
}

/// Parses `mh`, `numerator`, `subtraction`, `binary`, `constant[:b]`, `affine:a,b`.
inline AcceptanceModel parse_model(const std::string& text) {
  std::string head = text, tail;
  if (auto pos = text.find(':'); pos != std::string::npos) {
    head = text.substr(0, pos);
    tail = text.substr(pos + 1);
  }
  std::transform(head.begin(), head.end(), head.begin(), [](unsigned char ch) { return std::tolower(ch); });
  AcceptanceModel m;
  try {
    if (head == "mh") m = MhModel{};
    else if (head == "numerator") m = NumeratorModel{};
    else if (head == "subtraction") m = SubtractionModel{};
    else if (head == "binary") m = BinaryModel{};
    else if (head == "constant") m = ConstantModel{tail.empty() ? 0.74 : std::stod(tail)};
    else if (head == "affine" || head == "affinemh") {
      const auto comma = tail.find(',');
      require(comma != std::string::npos, "affine model needs a,b");
      m = AffineMhModel{std::stod(tail.substr(0, comma)), std::stod(tail.substr(comma + 1))};
    } else {
      throw ValidationError("unknown acceptance model '" + text + "'");
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ValidationError*>(&e)) throw;
    throw ValidationError("malformed acceptance model '" + text + "'");
  }
  validate_model(m);
  return m;
}

/// min(1, numerator / denominator); a zero denominator yields 1.
inline double mh_ratio(double numerator, double denominator) {
  if (denominator <= 0.0) return 1.0;
  return std::min(1.0, numerator / denominator);
}

/// Listener's MH acceptance probability for the proposed sign.
inline double mh_acceptance(CategoryIndex c_li, const Eigen::MatrixXd& theta_li, SignIndex s_star, SignIndex s_li) {
  const double num = category_given_sign(c_li, s_star, theta_li);
  const double den = category_given_sign(c_li, s_li, theta_li);
  if (s_star == s_li) return 1.0;
  return mh_ratio(num, den);
}

struct Acceptance {
  double probability = 0.0;
  bool clamped = false;
};

inline Acceptance model_acceptance(const AcceptanceModel& model, double r_mh, double numerator, double denominator) {
  return std::visit(
      [&](const auto& m) -> Acceptance {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ConstantModel>) return {m.b_bar};
        else if constexpr (std::is_same_v<M, MhModel>) return {r_mh};
        else if constexpr (std::is_same_v<M, NumeratorModel>) return {numerator};
        else if constexpr (std::is_same_v<M, SubtractionModel>) return {(numerator - denominator) / 2.0 + 0.5};
        else if constexpr (std::is_same_v<M, BinaryModel>) return {r_mh <= 0.5 ? 0.1 : 0.9};
        else {
          const double p = m.a * r_mh + m.b;
          const double c = std::clamp(p, 0.0, 1.0);
          return {c, c != p};
        }
      },
      model);
}

/// s* ~ P(s | theta, c).
inline SignIndex speaker_propose(CategoryIndex c_sp, const Eigen::MatrixXd& theta_sp, const Eigen::VectorXd& pi,
                                 Rng& rng) {
  return sample_categorical(sign_posterior(c_sp, theta_sp, pi), rng);
}

/// Numerator, denominator and r_mh from posterior-mean theta of a labelling.
struct AcceptanceTerms {
  double numerator = 0.0;
  double denominator = 0.0;
  double r_mh = 1.0;
};

inline AcceptanceTerms acceptance_terms(const Eigen::MatrixXd& theta, CategoryIndex c_li, SignIndex s_star,
                                        SignIndex s_li) {
  AcceptanceTerms t;
  t.numerator = category_given_sign(c_li, s_star, theta);
  t.denominator = category_given_sign(c_li, s_li, theta);
  t.r_mh = s_star == s_li ? 1.0 : mh_ratio(t.numerator, t.denominator);
  return t;
}

inline Eigen::MatrixXi sign_category_counts(std::span<const CategoryIndex> c, std::span<const SignIndex> s,
                                            int categories, int signs) {
  require(c.size() == s.size(), "categories and signs must align");
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(signs, categories);
  for (std::size_t n = 0; n < c.size(); ++n) {
    require(c[n] >= 0 && c[n] < categories && s[n] >= 0 && s[n] < signs, "label out of range");
    counts(s[n], c[n]) += 1;
  }
  return counts;
}

// --- game configuration and schedule ----------------------------------------

struct GameConfig {
  std::size_t stimuli_per_dataset = kDefaultStimulusCount;
  int rounds = 3;
  std::vector<std::string> datasets{"hard", "easy"};
  std::uint64_t seed = 0;

  /// Listener decisions each participant makes per dataset.
  std::size_t decisions_per_participant() const { return stimuli_per_dataset * static_cast<std::size_t>(rounds); }

  void validate() const {
    require(stimuli_per_dataset >= 1, "stimuli_per_dataset must be positive");
    require(rounds >= 1, "rounds must be positive");
    require(!datasets.empty(), "at least one dataset required");
  }
};

struct Turn {
  int round = 0;
  std::size_t stimulus = 0;
  int speaker = 0;  // 0 or 1; the other participant listens
};

/// Each round gives each participant one speaking turn per stimulus, in an
/// independently shuffled order; speakers alternate 0,1,0,1,...
inline std::vector<Turn> build_schedule(std::size_t stimuli, int rounds, std::uint64_t seed) {
  require(stimuli >= 1 && rounds >= 1, "schedule needs stimuli and rounds");
  Rng rng = make_rng(seed);
  std::vector<Turn> turns;
  turns.reserve(stimuli * 2 * static_cast<std::size_t>(rounds));
  for (int r = 0; r < rounds; ++r) {
    std::array<std::vector<std::size_t>, 2> order;
    for (auto& o : order) {
      o.resize(stimuli);
      std::iota(o.begin(), o.end(), std::size_t{0});
      std::shuffle(o.begin(), o.end(), rng);
    }
    for (std::size_t i = 0; i < stimuli; ++i)
      for (int sp = 0; sp < 2; ++sp) turns.push_back({r, order[sp][i], sp});
  }
  return turns;
}

// --- trial records ------------------------------------------------------------

struct TrialRecord {
  std::size_t trial_index = 0;
  int round = 0;
  std::string dataset_id;
  std::size_t stimulus_index = 0;
  std::string speaker_id;
  std::string listener_id;
  SignIndex speaker_sign = 0;
  SignIndex listener_sign = 0;
  CategoryIndex listener_category = 0;
  double r_mh = 1.0;
  int decision = 0;
  std::optional<CategoryIndex> post_edit;
  // Listener's full labelling just before the decision; analysis refits theta from it.
  std::vector<CategoryIndex> listener_categories;
  std::vector<SignIndex> listener_signs;

  bool operator==(const TrialRecord&) const = default;
};

inline nlohmann::ordered_json to_json(const TrialRecord& t) {
  nlohmann::ordered_json j;
  j["trial_index"] = t.trial_index;
  j["round"] = t.round;
  j["dataset_id"] = t.dataset_id;
  j["stimulus_index"] = t.stimulus_index;
  j["speaker_id"] = t.speaker_id;
  j["listener_id"] = t.listener_id;
  j["speaker_sign"] = index_to_label(t.speaker_sign);
  j["listener_sign"] = index_to_label(t.listener_sign);
  j["listener_category"] = index_to_label(t.listener_category);
  j["r_mh"] = t.r_mh;
  j["decision"] = t.decision;
  j["post_edit"] = t.post_edit ? nlohmann::ordered_json(index_to_label(*t.post_edit)) : nlohmann::ordered_json();
  auto labels = [](const std::vector<int>& v) {
    std::string s;
    for (int x : v) s += x < 0 ? '-' : static_cast<char>('A' + x);
    return s;
  };
  j["listener_categories"] = labels(t.listener_categories);
  j["listener_signs"] = labels(t.listener_signs);
  return j;
}

template <class Json>
TrialRecord trial_record_from_json(const Json& j, int label_count = 26) {
  try {
    TrialRecord t;
    t.trial_index = j.at("trial_index").template get<std::size_t>();
    t.round = j.at("round").template get<int>();
    t.dataset_id = j.at("dataset_id").template get<std::string>();
    t.stimulus_index = j.at("stimulus_index").template get<std::size_t>();
    t.speaker_id = j.at("speaker_id").template get<std::string>();
    t.listener_id = j.at("listener_id").template get<std::string>();
    t.speaker_sign = label_to_index(j.at("speaker_sign").template get<std::string>(), label_count);
    t.listener_sign = label_to_index(j.at("listener_sign").template get<std::string>(), label_count);
    t.listener_category = label_to_index(j.at("listener_category").template get<std::string>(), label_count);
    t.r_mh = j.at("r_mh").template get<double>();
    t.decision = j.at("decision").template get<int>();
    require(t.decision == 0 || t.decision == 1, "decision must be 0 or 1");
    require(t.r_mh >= 0.0 && t.r_mh <= 1.0, "r_mh must lie in [0,1]");
    if (j.contains("post_edit") && !j.at("post_edit").is_null())
      t.post_edit = label_to_index(j.at("post_edit").template get<std::string>(), label_count);
    auto parse = [&](const std::string& s) {
      std::vector<int> v;
      for (char ch : s) v.push_back(ch == '-' ? -1 : label_to_index(std::string(1, ch), label_count));
      return v;
    };
    if (j.contains("listener_categories")) t.listener_categories = parse(j.at("listener_categories").template get<std::string>());
    if (j.contains("listener_signs")) t.listener_signs = parse(j.at("listener_signs").template get<std::string>());
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed trial record: ") + e.what());
  }
}

// --- agent-vs-agent game ------------------------------------------------------

enum class ParameterUpdate { sample, posterior_mean };
enum class RefreshCadence { per_exchange, per_round };

struct EngineOptions {
  Hyperparams hyper = Hyperparams::defaults();
  ParameterUpdate update = ParameterUpdate::sample;
  RefreshCadence cadence = RefreshCadence::per_exchange;
  std::array<std::string, 2> agent_ids{"agent-A", "agent-B"};
  /// An accepted sign becomes the shared value for both agents.
  bool speaker_adopts_on_accept = true;
};

/// Redraws (or sets to posterior means) theta and the Gaussians from the
/// agent's current labelling of `xs`.
inline void refresh_parameters(AgentState& agent, std::span<const Eigen::Vector3d> xs, const Hyperparams& h,
                               ParameterUpdate mode, Rng& rng) {
  const auto stats = SufficientStats::accumulate(xs, agent.assignments, agent.signs, h.categories(), h.signs());
  if (mode == ParameterUpdate::posterior_mean) {
    agent.theta = posterior_theta_mean(stats.sign_category_counts, h.alpha);
    agent.gauss.clear();
    for (int k = 0; k < h.categories(); ++k)
      agent.gauss.push_back(posterior_normal_wishart(h, stats.counts[k], stats.sums[k], stats.scatter[k]).mean());
    return;
  }
  agent.theta = posterior_theta(stats.sign_category_counts, h.alpha, rng).sample;
  agent.gauss = posterior_gauss(stats, h, rng).samples;
}

/// Random initial signs; categories from a plain Bayesian GMM sweep (one
/// shared sign, so theta acts as mixing weights); then one parameter draw.
inline AgentState initialize_agent(const StimulusSet& stimuli, const Hyperparams& h, std::uint64_t seed) {
  const auto xs = stimuli.observations();
  Rng rng = make_rng(derive_seed(seed, 0));
  const std::vector<SignIndex> one_sign(xs.size(), 0);
  GibbsOptions opt;
  opt.iterations = 200;
  opt.burn_in = 100;
  opt.seed = derive_seed(seed, 1);
  AgentState st = gibbs_fit(xs, std::nullopt, one_sign, h, opt);
  std::uniform_int_distribution<int> pick(0, h.signs() - 1);
  st.signs.resize(xs.size());
  for (auto& s : st.signs) s = pick(rng);
  refresh_parameters(st, xs, h, ParameterUpdate::sample, rng);
  return st;
}

struct GameResult {
  std::vector<TrialRecord> history;
  std::array<AgentState, 2> agents;
};

inline double sign_agreement(std::span<const SignIndex> a, std::span<const SignIndex> b) {
  require(a.size() == b.size(), "sign vectors must have equal length");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

inline double sign_agreement(const AgentState& a, const AgentState& b) { return sign_agreement(a.signs, b.signs); }

/// Plays `config.rounds` rounds of the game on one stimulus set. Pure in
/// (agents, stimuli, config, model, seed, options).
inline GameResult run_naming_game(std::array<AgentState, 2> agents, const StimulusSet& stimuli, const GameConfig& config,
                                  const AcceptanceModel& model, std::uint64_t seed, const EngineOptions& opt = {}) {
  config.validate();
  validate_model(model);
  require(stimuli.size() == config.stimuli_per_dataset, "stimulus set size does not match config");
  const auto xs = stimuli.observations();
  for (const auto& a : agents) {
    require(a.assignments.size() == xs.size() && a.signs.size() == xs.size(), "agent labelling does not match stimuli");
    require(a.sign_count() == opt.hyper.signs() && a.categories() == opt.hyper.categories(), "agent shape does not match hyperparameters");
  }
  Rng rng = make_rng(seed);
  const auto schedule = build_schedule(xs.size(), config.rounds, derive_seed(seed, 0x5eed));
  GameResult out;
  out.history.reserve(schedule.size());
  int last_round = 0;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const Turn& turn = schedule[t];
    if (opt.cadence == RefreshCadence::per_round && turn.round != last_round) {
      for (auto& a : agents) refresh_parameters(a, xs, opt.hyper, opt.update, rng);
      last_round = turn.round;
    }
    AgentState& sp = agents[turn.speaker];
    AgentState& li = agents[1 - turn.speaker];
    const std::size_t n = turn.stimulus;

    sp.assignments[n] = sample_category(xs[n], sp.signs[n], sp, rng).category;
    const SignIndex s_star = speaker_propose(sp.assignments[n], sp.theta, opt.hyper.pi, rng);
    li.assignments[n] = sample_category(xs[n], li.signs[n], li, rng).category;

    TrialRecord rec;
    rec.trial_index = t;
    rec.round = turn.round;
    rec.dataset_id = stimuli.id;
    rec.stimulus_index = n;
    rec.speaker_id = opt.agent_ids[turn.speaker];
    rec.listener_id = opt.agent_ids[1 - turn.speaker];
    rec.speaker_sign = s_star;
    rec.listener_sign = li.signs[n];
    rec.listener_category = li.assignments[n];
    rec.listener_categories = li.assignments;
    rec.listener_signs = li.signs;
    const auto terms = acceptance_terms(li.theta, li.assignments[n], s_star, li.signs[n]);
    rec.r_mh = terms.r_mh;
    const double p = model_acceptance(model, terms.r_mh, terms.numerator, terms.denominator).probability;
    rec.decision = bernoulli(rng, p) ? 1 : 0;
    if (rec.decision) {
      li.signs[n] = s_star;
      if (opt.speaker_adopts_on_accept) sp.signs[n] = s_star;
    }
    out.history.push_back(std::move(rec));

    if (opt.cadence == RefreshCadence::per_exchange)
      for (auto& a : agents) refresh_parameters(a, xs, opt.hyper, opt.update, rng);
  }
  out.agents = std::move(agents);
  return out;
}

}  // namespace mhng

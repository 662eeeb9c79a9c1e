// mhng: stimulus generation, simulation, live sessions, analysis and replay.

#include <CLI11.hpp>
#include <boost/asio/signal_set.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "mhng/analysis.hpp"
#include "mhng/engine.hpp"
#include "mhng/event_log.hpp"
#include "mhng/participant.hpp"
#include "mhng/png.hpp"
#include "mhng/server.hpp"
#include "mhng/session.hpp"
#include "mhng/stimulus.hpp"

namespace fs = std::filesystem;
using namespace mhng;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

std::vector<EventLogRecord> load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  auto r = read_events(in);
  if (r.error) throw ValidationError(path + ": " + *r.error);
  return r.records;
}

void write_file(const std::string& path, const std::string& text) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_log(const std::string& path, const std::vector<EventLogRecord>& events) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : events) append_event(out, e);
}

int gen_data(const std::string& dataset, std::size_t n, std::uint64_t seed, const std::string& out_dir, int patch) {
  const auto set = sample_stimuli(builtin_spec(dataset), n, seed, dataset);
  fs::create_directories(out_dir);
  write_manifest((fs::path(out_dir) / (dataset + ".json")).string(), set);
  for (std::size_t i = 0; i < set.size(); ++i)
    write_png((fs::path(out_dir) / patch_filename(dataset, i)).string(), render_patch(set.stimuli[i].color, patch));
  std::cout << "wrote " << set.size() << " stimuli to " << out_dir << "\n";
  return 0;
}

struct SimulateArgs {
  std::string model = "mh";
  std::vector<std::string> datasets{"hard", "easy"};
  int rounds = 3;
  std::size_t n = kDefaultStimulusCount;
  std::uint64_t seed = 0;
  int pairs = 1;
  std::string driver = "engine";
  std::string out;
};

int simulate(const SimulateArgs& a) {
  const auto model = parse_model(a.model);
  GameConfig cfg;
  cfg.stimuli_per_dataset = a.n;
  cfg.rounds = a.rounds;
  cfg.datasets = a.datasets;
  std::vector<EventLogRecord> events;
  std::size_t trials = 0;
  for (int pair = 0; pair < a.pairs; ++pair) {
    const std::uint64_t pair_seed = derive_seed(a.seed, static_cast<std::uint64_t>(pair));
    cfg.seed = pair_seed;
    std::vector<StimulusSet> sets;
    for (std::size_t d = 0; d < a.datasets.size(); ++d)
      sets.push_back(sample_stimuli(builtin_spec(a.datasets[d]), a.n, derive_seed(pair_seed, 100 + d), a.datasets[d]));
    const std::string sid = "sim-" + std::to_string(a.seed) + "-" + std::to_string(pair);
    if (a.driver == "session") {
      ModelParticipant p1(model, derive_seed(pair_seed, 1)), p2(model, derive_seed(pair_seed, 2));
      auto r = run_scripted_session(sid, cfg, sets, {&p1, &p2}, {"P1", "P2"});
      trials += r.trials.size();
      events.insert(events.end(), r.events.begin(), r.events.end());
    } else if (a.driver == "engine") {
      SessionHeader h;
      h.session_id = sid;
      h.source = "engine";
      h.config = cfg;
      h.datasets = sets;
      EngineOptions opt;
      h.participants = {opt.agent_ids[0], opt.agent_ids[1]};
      std::vector<TrialRecord> history;
      for (std::size_t d = 0; d < sets.size(); ++d) {
        std::array<AgentState, 2> agents{initialize_agent(sets[d], opt.hyper, derive_seed(pair_seed, 200 + 2 * d)),
                                         initialize_agent(sets[d], opt.hyper, derive_seed(pair_seed, 201 + 2 * d))};
        auto g = run_naming_game(agents, sets[d], cfg, model, derive_seed(pair_seed, 300 + d), opt);
        for (auto& t : g.history) {
          t.trial_index = history.size();
          history.push_back(std::move(t));
        }
        std::cout << sid << " " << sets[d].id << ": sign agreement " << sign_agreement(g.agents[0], g.agents[1]) << "\n";
      }
      trials += history.size();
      auto ev = export_history(h, history);
      events.insert(events.end(), ev.begin(), ev.end());
    } else {
      throw ValidationError("unknown driver '" + a.driver + "' (engine|session)");
    }
  }
  write_log(a.out, events);
  std::cout << "wrote " << trials << " trials to " << a.out << "\n";
  return 0;
}

/// {"sessions": [{"session_id", "seed", "rounds", "stimuli_per_dataset",
///   "datasets": [{"id", "manifest"} | {"id", "seed"}]}]}
std::vector<std::pair<std::string, std::pair<GameConfig, std::vector<StimulusSet>>>> read_session_config(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const auto j = Json::parse(in);
  std::vector<std::pair<std::string, std::pair<GameConfig, std::vector<StimulusSet>>>> out;
  for (const auto& s : j.at("sessions")) {
    GameConfig cfg;
    cfg.seed = s.value("seed", std::uint64_t{0});
    cfg.rounds = s.value("rounds", cfg.rounds);
    cfg.stimuli_per_dataset = s.value("stimuli_per_dataset", cfg.stimuli_per_dataset);
    cfg.datasets.clear();
    std::vector<StimulusSet> sets;
    for (const auto& d : s.at("datasets")) {
      const auto id = d.at("id").get<std::string>();
      cfg.datasets.push_back(id);
      if (d.contains("manifest")) {
        auto m = read_manifest((fs::path(path).parent_path() / d.at("manifest").get<std::string>()).string());
        m.id = id;
        sets.push_back(std::move(m));
      } else {
        sets.push_back(sample_stimuli(builtin_spec(d.value("spec", id)), cfg.stimuli_per_dataset,
                                      d.value("seed", std::uint64_t{0}), id));
      }
    }
    out.push_back({s.at("session_id").get<std::string>(), {cfg, sets}});
  }
  return out;
}

int serve(unsigned short port, const std::string& config_path, const std::string& log_dir, const std::string& transport) {
  if (!log_dir.empty()) fs::create_directories(log_dir);
  SessionHost host(log_dir);
  std::vector<std::string> ids;
  for (const auto& [sid, cs] : read_session_config(config_path)) {
    host.create(sid, cs.first, cs.second);
    ids.push_back(sid);
  }
  ServerOptions opt;
  opt.address = env_or("MHNG_ADDRESS", "0.0.0.0");
  opt.port = port;
  if (transport == "tcp") opt.transport = Transport::tcp;
  else if (transport != "ws") throw ValidationError("unknown transport '" + transport + "' (ws|tcp)");
  net::io_context io;
  GameServer server(io, host, opt, ids);
  server.start();
  net::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](auto, auto) { io.stop(); });
  std::cout << "listening on " << opt.address << ":" << server.port() << " (" << transport << "), " << ids.size()
            << " session(s)" << std::endl;
  io.run();
  return 0;
}

struct AnalyzeArgs {
  std::vector<std::string> logs;
  bool test1 = false;
  bool test2 = false;
  int replicates = 1000;
  int model_replicates = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string table;
  std::string plot_data;
  int gibbs_iterations = 2000;
};

int analyze(AnalyzeArgs a) {
  std::vector<EventLogRecord> records;
  for (const auto& path : a.logs) {
    auto r = load_log(path);
    records.insert(records.end(), r.begin(), r.end());
  }
  const auto log = collect_session_log(records);
  InferOptions io;
  io.seed = a.seed;
  io.iterations = a.gibbs_iterations;
  io.burn_in = std::min(500, a.gibbs_iterations / 4);
  const auto inferred = infer_decisions(log, io);
  for (const auto& w : inferred.warnings) std::cerr << "warning: " << w << "\n";
  if (inferred.records.empty()) {
    std::cerr << "error: no decisions in " << a.logs.size() << " log file(s)\n";
    return 2;
  }
  if (!a.test1 && !a.test2) a.test1 = a.test2 = true;
  const std::span<const DecisionRecord> recs(inferred.records);
  Json report;
  report["decisions"] = recs.size();
  report["participants"] = acceptance_rates(recs).size();
  report["skipped"] = inferred.skipped;
  if (a.test1) {
    const auto rows = test1_table(recs, a.replicates, a.seed);
    Json t1 = Json::array();
    for (const auto& row : rows) {
      Json j = to_json(row.report);
      j["participant_id"] = row.participant_id;
      t1.push_back(j);
    }
    report["test1"] = t1;
    const auto& all = rows.back().report;
    std::cout << "Test 1 (All): a=" << all.a_hat << " b=" << all.b_hat << " P'_a=" << format_p_value(all.p_a, a.replicates)
              << " P'_b=" << format_p_value(all.p_b, a.replicates) << " reject_a=" << all.reject_a
              << " reject_b=" << all.reject_b << "\n";
    if (!a.table.empty()) write_file(a.table, test1_csv(rows));
    if (!a.plot_data.empty()) {
      FitResult fit;
      fit.a = all.a_hat;
      fit.b = all.b_hat;
      write_file(a.plot_data, histogram_csv(acceptance_histogram(recs), fit));
    }
  }
  if (a.test2) {
    const auto t2 = pairwise_model_tests(recs, a.seed, a.model_replicates);
    report["test2"] = to_json(t2);
    std::cout << "Test 2 (All) p-values, row model > column model:\n";
    const auto& models = comparison_models();
    for (int m = 0; m < 5; ++m) {
      std::cout << "  " << model_name(models[m]);
      for (int mp = 0; mp < 5; ++mp) std::cout << "\t" << (m == mp ? std::string("-") : std::to_string(t2.pooled.p_values(m, mp)));
      std::cout << "\n";
    }
  }
  write_file(a.out, report.dump(2) + "\n");
  return 0;
}

int replay(const std::string& path, const std::string& session) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  auto read = read_events(in);
  std::vector<std::string> ids;
  if (!session.empty()) ids.push_back(session);
  else
    for (const auto& r : read.records)
      if (r.kind == "session" && std::find(ids.begin(), ids.end(), r.session_id) == ids.end()) ids.push_back(r.session_id);
  int status = read.error ? 1 : 0;
  if (read.error) std::cerr << "error: log truncated or corrupt at " << *read.error << "\n";
  for (const auto& id : ids) {
    const auto rep = replay_log(read.records, id);
    std::cout << id << ": trials=" << rep.trials.size();
    if (rep.state) std::cout << " phase=" << phase_name(rep.state->phase) << " hash=" << std::hex << rep.hash << std::dec;
    std::cout << "\n";
    if (rep.error) {
      std::cerr << "error: " << id << ": " << *rep.error << "\n";
      status = 1;
    }
  }
  if (ids.empty()) {
    std::cerr << "error: no sessions in " << path << "\n";
    status = 1;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metropolis-Hastings naming game: stimuli, simulation, live sessions and analysis"};
  app.require_subcommand(1);

  std::string dataset = "hard", out_dir;
  std::size_t n = kDefaultStimulusCount;
  std::uint64_t seed = 0;
  int patch = kDefaultPatchSize;
  auto* gen = app.add_subcommand("gen-data", "Sample a stimulus set; write its manifest and PNG patches");
  gen->add_option("--dataset", dataset, "hard | easy")->check(CLI::IsMember({"hard", "easy"}));
  gen->add_option("--n", n, "number of stimuli")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "sampling seed");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--patch-size", patch, "patch edge in pixels")->check(CLI::Range(16, 4096));

  SimulateArgs sim;
  auto* simc = app.add_subcommand("simulate", "Run scripted or agent games and write a JSONL log");
  simc->add_option("--model", sim.model, "mh | constant[:b] | numerator | subtraction | binary | affine:a,b");
  simc->add_option("--dataset", sim.datasets, "datasets in play order")->delimiter(',');
  simc->add_option("--rounds", sim.rounds, "rounds per dataset")->check(CLI::PositiveNumber);
  simc->add_option("--n", sim.n, "stimuli per dataset")->check(CLI::PositiveNumber);
  simc->add_option("--seed", sim.seed, "seed");
  simc->add_option("--pairs", sim.pairs, "independent pairs")->check(CLI::PositiveNumber);
  simc->add_option("--driver", sim.driver, "engine (agent pair) | session (scripted participants through the service)")
      ->check(CLI::IsMember({"engine", "session"}));
  simc->add_option("--out", sim.out, "log file")->required();

  unsigned short port = static_cast<unsigned short>(std::stoi(env_or("MHNG_PORT", "8080")));
  std::string session_config, log_dir = env_or("MHNG_LOG_DIR", "logs"), transport = env_or("MHNG_TRANSPORT", "ws");
  auto* srv = app.add_subcommand("serve", "Host live sessions over WebSocket (or raw TCP)");
  srv->add_option("--port", port, "listen port (env MHNG_PORT)");
  srv->add_option("--session-config", session_config, "session configuration JSON")->required()->check(CLI::ExistingFile);
  srv->add_option("--log-dir", log_dir, "event log directory (env MHNG_LOG_DIR)");
  srv->add_option("--transport", transport, "ws | tcp (env MHNG_TRANSPORT)")->check(CLI::IsMember({"ws", "tcp"}));

  AnalyzeArgs an;
  auto* anc = app.add_subcommand("analyze", "Hypothesis tests over session logs");
  anc->add_option("--log", an.logs, "log file(s)")->required()->check(CLI::ExistingFile);
  anc->add_flag("--test1", an.test1, "affine fit and randomization test");
  anc->add_flag("--test2", an.test2, "model precision and U tests");
  anc->add_option("--replicates", an.replicates, "randomization replicates")->check(CLI::PositiveNumber);
  anc->add_option("--model-replicates", an.model_replicates, "pseudo-experiments per model")->check(CLI::PositiveNumber);
  anc->add_option("--seed", an.seed, "seed");
  anc->add_option("--gibbs-iterations", an.gibbs_iterations, "theta samples per refit")->check(CLI::Range(10, 1000000));
  anc->add_option("--out", an.out, "report JSON")->required();
  anc->add_option("--table", an.table, "per-participant Test 1 CSV");
  anc->add_option("--plot-data", an.plot_data, "acceptance-rate histogram CSV");

  std::string replay_path, replay_session;
  auto* rep = app.add_subcommand("replay", "Rebuild sessions from a log and verify it");
  rep->add_option("--log", replay_path, "log file")->required()->check(CLI::ExistingFile);
  rep->add_option("--session", replay_session, "only this session");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(dataset, n, seed, out_dir, patch);
    if (*simc) return simulate(sim);
    if (*srv) return serve(port, session_config, log_dir, transport);
    if (*anc) return analyze(an);
    if (*rep) return replay(replay_path, replay_session);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

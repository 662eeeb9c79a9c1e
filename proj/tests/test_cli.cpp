#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mhng/event_log.hpp"

namespace fs = std::filesystem;
using mhng::Json;

namespace {

std::string cli() {
  const char* p = std::getenv("MHNG_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  const int rc = std::system((cli() + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("gen-data is deterministic in its seed") {
  TempDir d("mhng_cli_gen");
  REQUIRE(run("gen-data --dataset easy --n 4 --seed 3 --out " + d / "a") == 0);
  REQUIRE(run("gen-data --dataset easy --n 4 --seed 3 --out " + d / "b") == 0);
  CHECK(slurp(d / "a/easy.json") == slurp(d / "b/easy.json"));
  CHECK(slurp(d / "a/easy_3.png") == slurp(d / "b/easy_3.png"));
  CHECK(fs::exists(d / "a/easy_0.png"));
  CHECK(Json::parse(slurp(d / "a/easy.json"))["stimuli"].size() == 4);
}

TEST_CASE("bad arguments exit nonzero") {
  CHECK(run("gen-data --dataset medium --out /tmp/x") != 0);
  CHECK(run("simulate --bogus 1 --out /tmp/x") != 0);
  CHECK(run("") != 0);
}

TEST_CASE("analyze refuses a log with no decisions") {
  TempDir d("mhng_cli_empty");
  std::ofstream(d / "empty.jsonl").close();
  CHECK(run("analyze --log " + d / "empty.jsonl" + " --out " + d / "r.json") == 2);
}

TEST_CASE("simulate, replay and analyze a scripted MH session") {
  TempDir d("mhng_cli_sim");
  REQUIRE(run("simulate --model mh --driver session --seed 4 --pairs 2 --out " + d / "log.jsonl") == 0);
  CHECK(run("replay --log " + d / "log.jsonl") == 0);
  REQUIRE(run("analyze --log " + d / "log.jsonl" + " --test1 --replicates 200 --gibbs-iterations 200 --out " + d / "r.json" +
              " --table " + d / "t.csv" + " --plot-data " + d / "h.csv") == 0);
  const auto report = Json::parse(slurp(d / "r.json"));
  CHECK(report["decisions"] == 360);
  CHECK(report["participants"] == 4);
  const auto& all = report["test1"].back();
  CHECK(all["participant_id"] == "All");
  CHECK(all["reject_a"] == true);
  CHECK(slurp(d / "t.csv").rfind("participant,decisions,", 0) == 0);
  CHECK(slurp(d / "h.csv").rfind("r_lower,", 0) == 0);

  // A damaged log fails replay.
  std::string text = slurp(d / "log.jsonl");
  std::ofstream(d / "cut.jsonl") << text.substr(0, text.size() - 30);
  CHECK(run("replay --log " + d / "cut.jsonl") == 1);
}

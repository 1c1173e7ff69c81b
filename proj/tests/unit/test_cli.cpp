#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "corpuslens/cli.hpp"
#include "corpuslens/project.hpp"
#include "corpuslens/text.hpp"
#include "doctest.h"
#include "json.hpp"
#include "testkit.hpp"

using namespace corpuslens;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

class CliFixture {
 public:
  CliFixture() : dir_("cli") {
    testkit::copy_tree(fs::path(CORPUSLENS_SOURCE_DIR) / "tests/fixtures/e2e", dir_.path());
    fs::remove_all(dir_ / "workspace");
    config_ = (dir_ / "corpuslens.json").string();
  }

  Run run(std::vector<std::string> args) const {
    std::vector<std::string> full = {"corpuslens", "-c", config_};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  const testkit::TempDir& dir() const { return dir_; }

 private:
  testkit::TempDir dir_;
  std::string config_;
};

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (const auto& line : text::split(s, '\n')) n += line.empty() ? 0 : 1;
  return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("unknown subcommand is a usage error") {
  CliFixture f;
  const auto r = f.run({"bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("error: UsageError: unknown subcommand 'bogus'") != std::string::npos);
  CHECK(r.err.find("Usage:") != std::string::npos);
  CHECK(f.run({}).code == 2);
  CHECK(f.run({"kwic"}).code == 2);
  CHECK(f.run({"sweep", "--kmin", "two"}).code == 2);
  const auto help = f.run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("pattern") != std::string::npos);
}

TEST_CASE("pipeline errors exit 1 with the code name") {
  CliFixture f;
  const auto before = f.run({"kwic", "--node", "medal"});
  CHECK(before.code == 1);
  CHECK(before.err.rfind("error: MissingArtifact:", 0) == 0);
  REQUIRE(f.run({"ingest"}).code == 0);
  const auto absent = f.run({"colloc", "--node", "zzzz"});
  CHECK(absent.code == 1);
  CHECK(absent.err.rfind("error: NodeAbsent:", 0) == 0);
  const auto bad_k = f.run({"train", "--k", "0"});
  CHECK(bad_k.code == 1);
  CHECK(bad_k.err.rfind("error: InvalidConfig:", 0) == 0);
  const auto bad_lang = f.run({"--lang", "zh", "kwic", "--node", "medal"});
  CHECK(bad_lang.code == 1);
}

TEST_CASE("sweep writes one csv row per K") {
  CliFixture f;
  REQUIRE(f.run({"ingest"}).code == 0);
  REQUIRE(f.run({"filter"}).code == 0);
  const auto r = f.run({"--json", "sweep", "--kmin", "2", "--kmax", "20", "--metric", "umass"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["points"].size() == 19);
  const auto csv = text::read_file(f.dir() / "workspace" / j["csv"].get<std::string>());
  const auto lines = text::split(csv, '\n');
  CHECK(lines[0] == "K,score");
  CHECK(count_lines(csv) == 20);
  CHECK(lines[1].rfind("2,", 0) == 0);
  CHECK(lines[19].rfind("20,", 0) == 0);
  const auto best = j["best_k"].get<std::size_t>();
  CHECK(best >= 2);
  CHECK(best <= 20);
}

TEST_CASE("kwic prints one line per occurrence") {
  CliFixture f;
  REQUIRE(f.run({"ingest"}).code == 0);
  const auto r = f.run({"kwic", "--node", "medal", "--window", "5"});
  REQUIRE(r.code == 0);
  cli::Project project(cli::load_config(f.dir() / "corpuslens.json"));
  const auto freq = testkit::oracle_frequency(project.working_tokens(Lang::en), "medal");
  CHECK(count_lines(r.out) == freq);
  const auto j = nlohmann::json::parse(f.run({"--json", "kwic", "--node", "medal", "--window", "5"}).out);
  CHECK(j["total"].get<std::size_t>() == freq);
  CHECK(count_lines(r.out) > 10);
  CHECK(count_lines(f.run({"kwic", "--node", "medal", "--limit", "3"}).out) == 3);
}

TEST_CASE("full protocol through the cli") {
  CliFixture f;
  for (const auto& step : std::vector<std::vector<std::string>>{
           {"ingest"},
           {"filter"},
           {"train"},
           {"sweep", "--kmin", "2", "--kmax", "6"},
           {"merge", "--mapping", (f.dir() / "mapping_9to7.txt").string()},
           {"senses"},
           {"label", "--descriptions", (f.dir() / "descriptions.txt").string()},
           {"pattern", "--name", "gold_medal", "--node", "medal", "--scheme", "medal_verbs", "--slot", "V"},
       }) {
    const auto r = f.run(step);
    REQUIRE_MESSAGE(r.code == 0, step.front() << ": " << r.err);
  }
  const auto topics = nlohmann::json::parse(f.run({"--json", "topics"}).out);
  REQUIRE(topics.size() == 7);
  for (const auto& card : topics) {
    CHECK(card["keywords"].size() == 10);
    CHECK_FALSE(card["implication"].get<std::string>().empty());
  }
  const auto matches = nlohmann::json::parse(
      f.run({"--json", "pattern", "--name", "gold_medal", "--node", "medal", "--scheme", "medal_verbs", "--slot", "V"}).out);
  const auto id = matches["matches"][0]["id"].get<std::string>();
  CHECK(f.run({"annotate", "--match", id, "--label", "positive", "--annotator", "a1"}).code == 0);
  const auto unknown = f.run({"annotate", "--match", "nope@x:0-1", "--label", "positive", "--annotator", "a1"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.rfind("error: UnknownMatch:", 0) == 0);

  const auto report = f.run({"report"});
  REQUIRE(report.code == 0);
  CHECK(report.out.find("## Topics") != std::string::npos);
  CHECK(report.out.find("| Semantic Category | Frequency |") != std::string::npos);
  CHECK(report.out.find("| winning |") != std::string::npos);
  CHECK(report.out.find("## Prosody") != std::string::npos);
  CHECK(f.run({"report"}).out == report.out);
  const auto csv = f.run({"report", "--format", "csv", "--sections", "topics"});
  CHECK(csv.code == 0);
  CHECK(count_lines(csv.out) == 2 + 7 * 10);
}

TEST_CASE("installed binary reports exit codes") {
  CliFixture f;
  const std::string bin = CORPUSLENS_CLI_PATH;
  const auto quiet = " > /dev/null 2>&1";
  auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
  const auto cfg = (f.dir() / "corpuslens.json").string();
  CHECK(status(std::system((bin + " -c " + cfg + " bogus" + quiet).c_str())) == 2);
  CHECK(status(std::system((bin + " -c " + cfg + " kwic --node medal" + quiet).c_str())) == 1);
  CHECK(status(std::system((bin + " -c " + cfg + " ingest" + quiet).c_str())) == 0);
}

}  // TEST_SUITE

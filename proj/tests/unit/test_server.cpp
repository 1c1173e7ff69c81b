#include <chrono>
#include <filesystem>
#include <sstream>
#include <thread>

#include "corpuslens/cli.hpp"
#include "corpuslens/project.hpp"
#include "corpuslens/server.hpp"
#include "corpuslens/text.hpp"
#include "doctest.h"
#include "httplib.h"
#include "testkit.hpp"

using namespace corpuslens;
using namespace corpuslens::cli;
namespace fs = std::filesystem;

namespace {

// A trained, merged and sense-labelled copy of the e2e fixture with a live
// server on a free port.
class ServedProject {
 public:
  ServedProject() : dir_("api") {
    testkit::copy_tree(fs::path(CORPUSLENS_SOURCE_DIR) / "tests/fixtures/e2e", dir_.path());
    fs::remove_all(dir_ / "workspace");
    config_ = dir_ / "corpuslens.json";
    project_ = std::make_unique<Project>(load_config(config_));
    project_->ingest(std::nullopt, false, "ingest");
    project_->filter(std::nullopt, std::nullopt, std::nullopt, "filter");
    project_->train(std::nullopt, {}, "train");
    project_->merge(std::nullopt, text::read_file(dir_ / "mapping_9to7.txt"), 10, "merge");
    project_->senses(std::nullopt, std::nullopt, false);
    server_ = std::make_unique<ApiServer>(*project_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->listen(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
    for (int i = 0; i < 100 && !client_->Get("/status"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }

  ~ServedProject() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Client& http() { return *client_; }
  const fs::path& config() const { return config_; }
  const testkit::TempDir& dir() const { return dir_; }

  int cli(std::vector<std::string> args, std::string* out = nullptr) const {
    std::vector<std::string> full = {"corpuslens", "-c", config_.string()};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out) *out = o.str();
    return code;
  }

 private:
  testkit::TempDir dir_;
  fs::path config_;
  std::unique_ptr<Project> project_;
  std::unique_ptr<ApiServer> server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

nlohmann::json body(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

std::string error_code(const httplib::Result& r) { return body(r).at("error").at("code").get<std::string>(); }

}  // namespace

TEST_SUITE("http_api") {

TEST_CASE("topics, schema header and pagination") {
  ServedProject sp;
  auto& c = sp.http();
  const auto status = c.Get("/status");
  REQUIRE(status);
  CHECK(status->status == 200);
  CHECK(status->get_header_value(std::string(kSchemaHeader)) == kSchemaVersion);

  const auto r = c.Get("/topics");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value(std::string(kSchemaHeader)) == "1");
  const auto cards = body(r);
  REQUIRE(cards.size() == 7);
  for (const auto& card : cards) {
    CHECK(card.at("keywords").size() == 10);
    CHECK(card.at("keywords")[0].contains("weight"));
  }

  const auto paged = body(c.Get("/topics?offset=2&limit=3"));
  REQUIRE(paged.size() == 3);
  CHECK(paged[0].at("topic_id") == cards[2].at("topic_id"));
  CHECK(body(c.Get("/topics?offset=50")).empty());

  const auto one = c.Get("/topics/3");
  REQUIRE(one);
  CHECK(one->status == 200);
  CHECK(body(one).at("topic_id") == 3);
  const auto missing = c.Get("/topics/42");
  CHECK(missing->status == 404);
  CHECK(error_code(missing) == "TopicOutOfRange");
  CHECK(c.Get("/topics?limit=abc")->status == 400);
}

TEST_CASE("api description feeds the cli implication prompt") {
  ServedProject sp;
  auto& c = sp.http();
  const std::string text = "relay finals and record swims";
  const auto posted = c.Post("/topics/3/description", nlohmann::json{{"text", text}}.dump(), "application/json");
  REQUIRE(posted);
  CHECK(posted->status == 200);
  CHECK(c.Post("/topics/3/description", "{}", "application/json")->status == 400);

  std::string out;
  REQUIRE(sp.cli({"label", "--topic", "3"}, &out) == 0);
  const auto log = text::read_file(sp.dir() / "workspace/stores/exchanges.en.jsonl");
  bool found = false;
  for (const auto& line : text::split(log, '\n')) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    if (rec.at("stage") == "implication" && rec.value("topic_id", -1) == 3) {
      found = rec.at("prompt").get<std::string>().find(text) != std::string::npos;
    }
  }
  CHECK(found);

  // CLI sees the same card state the API wrote
  REQUIRE(sp.cli({"--json", "topics"}, &out) == 0);
  const auto cards = nlohmann::json::parse(out);
  for (const auto& card : cards) {
    if (card.at("topic_id") == 3) {
      CHECK(card.at("description").at("text") == text);
      CHECK_FALSE(card.at("implication").get<std::string>().empty());
    }
  }

  const auto unlabeled = c.Post("/label/4", "{}", "application/json");
  CHECK(unlabeled->status == 409);
  CHECK(error_code(unlabeled) == "MissingDescription");
  CHECK(c.Post("/topics/4/description", R"({"skipped": true})", "application/json")->status == 200);
  CHECK(c.Post("/label/4", "{}", "application/json")->status == 200);
}

TEST_CASE("phraseology endpoints and annotations") {
  ServedProject sp;
  auto& c = sp.http();
  const auto kwic = body(c.Get("/kwic?node=medal&window=3&limit=4"));
  CHECK(kwic.at("lines").size() == 4);
  CHECK(kwic.at("total").get<std::size_t>() > 4);
  const auto absent = c.Get("/kwic");
  CHECK(absent->status == 400);
  CHECK(error_code(absent) == "UsageError");
  CHECK(error_code(c.Get("/collocates?node=zzzz")) == "NodeAbsent");

  const auto patterns = body(c.Get("/patterns"));
  CHECK(patterns.size() == 3);
  CHECK(body(c.Get("/patterns?limit=1")).size() == 1);

  const auto matches = body(c.Get("/patterns/gold_medal/matches?node=medal&scheme=medal_verbs&slot=V"));
  REQUIRE_FALSE(matches.at("matches").empty());
  const auto id = matches.at("matches")[0].at("id").get<std::string>();

  const auto ok = c.Post("/annotations",
                         nlohmann::json{{"match_id", id}, {"label", "negative"}, {"annotator", "a1"}}.dump(),
                         "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 201);
  const auto unknown = c.Post("/annotations",
                              R"({"match_id": "gold_medal@nowhere:0-1", "label": "positive", "annotator": "a1"})",
                              "application/json");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK(error_code(unknown) == "UnknownMatch");
  CHECK(c.Post("/annotations", "not json", "application/json")->status == 400);

  const auto prosody = body(c.Get("/prosody?pattern=gold_medal"));
  CHECK(prosody.dump().find("a1") != std::string::npos);
  REQUIRE(sp.cli({"annotate", "--match", id, "--label", "positive", "--annotator", "a2"}) == 0);
  const auto both = body(c.Get("/prosody?pattern=gold_medal")).dump();
  CHECK(both.find("a2") != std::string::npos);

  // pattern tables in the report come from queries recorded by the CLI
  REQUIRE(sp.cli({"pattern", "--name", "gold_medal", "--node", "medal", "--scheme", "medal_verbs", "--slot", "V"}) == 0);

  const auto report = c.Get("/report?format=md");
  REQUIRE(report);
  CHECK(report->status == 200);
  CHECK(report->body.find("| Semantic Category |") != std::string::npos);
}

TEST_CASE("one background job at a time") {
  ServedProject sp;
  auto& c = sp.http();
  const auto first = c.Post("/jobs", R"({"kind": "train", "iterations": 3000})", "application/json");
  REQUIRE(first);
  CHECK(first->status == 202);
  const auto id = body(first).at("id").get<std::string>();
  const auto second = c.Post("/jobs", R"({"kind": "train", "iterations": 10})", "application/json");
  REQUIRE(second);
  CHECK(second->status == 409);
  CHECK(error_code(second) == "JobRunning");
  CHECK(c.Post("/jobs", R"({"kind": "dance"})", "application/json")->status == 400);

  std::string state = "running";
  for (int i = 0; i < 600 && state == "running"; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    state = body(c.Get("/jobs/" + id)).at("state").get<std::string>();
  }
  CHECK(state == "done");
  CHECK(c.Get("/jobs/nope")->status == 404);
}

}  // TEST_SUITE

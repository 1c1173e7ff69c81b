#include <filesystem>

#include "corpuslens/project.hpp"
#include "corpuslens/text.hpp"
#include "corpuslens/workspace.hpp"
#include "doctest.h"
#include "testkit.hpp"

using namespace corpuslens;
using namespace corpuslens::cli;
using testkit::code_of;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(CORPUSLENS_SOURCE_DIR) / "tests/fixtures/e2e";

nlohmann::json base_config() {
  return nlohmann::json::parse(text::read_file(kFixture / "corpuslens.json"));
}

ProjectConfig parse_from(const nlohmann::json& j) { return parse_config(j.dump(), kFixture); }

}  // namespace

TEST_SUITE("workspace") {

TEST_CASE("fixture config parses with resolved paths") {
  const auto cfg = load_config(kFixture / "corpuslens.json");
  CHECK(cfg.version == 1);
  REQUIRE(cfg.languages.size() == 1);
  CHECK(cfg.languages[0].lang == Lang::en);
  CHECK(cfg.languages[0].corpus.is_absolute());
  CHECK(fs::exists(cfg.languages[0].corpus));
  CHECK(cfg.lda.num_topics == 9);
  CHECK(cfg.sweep.k_min == 2);
  CHECK(cfg.sweep.k_max == 20);
  CHECK(cfg.schemes.count("medal_verbs") == 1);
  CHECK(cfg.server.port == 8765);
  CHECK(&cfg.language(std::nullopt) == &cfg.languages[0]);
  CHECK(code_of([&] { cfg.language(Lang::zh); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("config validation names the problem") {
  auto missing_path = base_config();
  missing_path["languages"]["en"]["stoplist"] = "no_such_file.txt";
  CHECK(code_of([&] { parse_from(missing_path); }) == ErrorCode::InvalidConfig);

  auto wide = base_config();
  wide["sweep"]["kmax"] = 65;
  CHECK(code_of([&] { parse_from(wide); }) == ErrorCode::InvalidConfig);
  wide["sweep"]["kmax"] = 64;
  CHECK_FALSE(code_of([&] { parse_from(wide); }));

  auto low = base_config();
  low["sweep"]["kmin"] = 1;
  CHECK(code_of([&] { parse_from(low); }) == ErrorCode::InvalidConfig);

  auto inverted = base_config();
  inverted["sweep"]["kmin"] = 10;
  inverted["sweep"]["kmax"] = 5;
  CHECK(code_of([&] { parse_from(inverted); }) == ErrorCode::InvalidConfig);

  auto version = base_config();
  version["version"] = 2;
  CHECK(code_of([&] { parse_from(version); }) == ErrorCode::InvalidConfig);

  auto provider = base_config();
  provider["llm"]["provider"] = "http";
  CHECK(code_of([&] { parse_from(provider); }) == ErrorCode::InvalidConfig);

  auto no_langs = base_config();
  no_langs.erase("languages");
  CHECK(code_of([&] { parse_from(no_langs); }) == ErrorCode::InvalidConfig);

  CHECK(code_of([] { parse_config("{not json", "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { load_config("/nonexistent/corpuslens.json"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("artifacts are versioned, never overwritten") {
  testkit::TempDir dir("ws");
  Workspace ws(dir.path());
  CHECK_FALSE(ws.has("model.en"));
  const auto a = ws.put("model.en", "json", "{\"v\":1}", "train", {{"tokens.en", "abc"}});
  const auto again = ws.put("model.en", "json", "{\"v\":1}", "train", {{"tokens.en", "abc"}});
  CHECK(again.path == a.path);
  CHECK(ws.history("model.en").size() == 1);

  const auto b = ws.put("model.en", "json", "{\"v\":2}", "train", {{"tokens.en", "def"}});
  CHECK(b.path != a.path);
  CHECK(fs::exists(dir / a.path));
  CHECK(fs::exists(dir / b.path));
  CHECK(text::read_file(dir / a.path) == "{\"v\":1}");
  CHECK(ws.read("model.en") == "{\"v\":2}");
  CHECK(ws.history("model.en").size() == 2);
  CHECK(ws.hash("model.en") == text::sha256_hex("{\"v\":2}"));
  CHECK(b.inputs.at("tokens.en") == "def");
  CHECK(b.command == "train");

  Workspace reopened(dir.path());
  CHECK(reopened.history("model.en").size() == 2);
  CHECK(reopened.record("model.en")->sha256 == b.sha256);
  reopened.verify();
}

TEST_CASE("tampering and absence are detected") {
  testkit::TempDir dir("ws");
  Workspace ws(dir.path());
  const auto r = ws.put("topics.en", "json", "[1,2,3]", "train", {});
  CHECK(code_of([&] { ws.read("coherence.en"); }) == ErrorCode::MissingArtifact);
  CHECK(code_of([&] { ws.hash("coherence.en"); }) == ErrorCode::MissingArtifact);

  text::write_file(dir / r.path, "[1,2,4]");
  CHECK(code_of([&] { ws.read("topics.en"); }) == ErrorCode::CorruptWorkspace);
  CHECK(code_of([&] { Workspace(dir.path()).verify(); }) == ErrorCode::CorruptWorkspace);

  fs::remove(dir / r.path);
  CHECK(code_of([&] { ws.read("topics.en"); }) == ErrorCode::CorruptWorkspace);

  text::write_file(dir / "manifest.json", "{broken");
  CHECK(code_of([&] { Workspace w(dir.path()); }) == ErrorCode::CorruptWorkspace);
}

TEST_CASE("pipeline artifacts record their inputs") {
  testkit::TempDir dir("proj");
  testkit::copy_tree(kFixture, dir.path());
  fs::remove_all(dir / "workspace");
  Project project(load_config(dir / "corpuslens.json"));
  project.ingest(std::nullopt, false, "ingest");
  auto& ws = project.workspace();
  const auto corpus = ws.record("corpus.en");
  REQUIRE(corpus);
  CHECK(corpus->inputs.at("source:corpus_en.jsonl") == text::sha256_hex(text::read_file(dir / "corpus_en.jsonl")));
  CHECK(corpus->command == "ingest");

  project.filter(std::nullopt, std::nullopt, std::nullopt, "filter");
  const auto filtered = ws.record("filtered-tokens.en");
  REQUIRE(filtered);
  CHECK(filtered->inputs.at("tokens.en") == ws.hash("tokens.en"));
  CHECK(filtered->inputs.at("corpus.en") == ws.hash("corpus.en"));

  // rerunning with unchanged inputs regenerates the same bytes
  const auto before = ws.hash("tokens.en");
  project.ingest(std::nullopt, false, "ingest");
  CHECK(ws.hash("tokens.en") == before);
  CHECK(ws.history("tokens.en").size() == 1);

  // a changed source produces a new version beside the old one
  auto corpus_text = text::read_file(dir / "corpus_en.jsonl");
  corpus_text +=
      "{\"id\":\"extra-1\",\"source\":\"Wire\",\"date\":\"2024-08-02\",\"lang\":\"en\",\"title\":\"Olympic swim\","
      "\"body\":\"The Olympic pool hosted a new Olympics record in the relay final.\"}\n";
  text::write_file(dir / "corpus_en.jsonl", corpus_text);
  Project changed(load_config(dir / "corpuslens.json"));
  changed.ingest(std::nullopt, false, "ingest");
  CHECK(changed.workspace().history("tokens.en").size() == 2);
  CHECK(changed.workspace().hash("tokens.en") != before);
  CHECK(fs::exists(dir / "workspace" / ws.history("tokens.en")[0].path));
}

}  // TEST_SUITE

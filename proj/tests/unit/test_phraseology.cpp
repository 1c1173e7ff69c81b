#include <cmath>
#include <filesystem>

#include "corpuslens/phraseology.hpp"
#include "doctest.h"
#include "testkit.hpp"

using namespace corpuslens;
using namespace corpuslens::phrase;
using testkit::code_of;
using testkit::parse_tagged;

namespace {

PositionIndex en_index(const std::string& tagged) { return build_index(parse_tagged(tagged, Lang::en)); }
PositionIndex zh_index(const std::string& tagged) { return build_index(parse_tagged(tagged, Lang::zh)); }

std::vector<std::string> surfaces(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.surface);
  return out;
}

const char* kMedalDocs =
    "d1\tShe/PRON won/VERB the/DET gold/NOUN medal/NOUN yesterday/NOUN ./PUNCT\n"
    "d2\tmedal/NOUN count/NOUN :/PUNCT Paris/PROPN shared/VERB gold/NOUN medal/NOUN\n";

AnnotationStore::Clock fixed_clock() {
  return [] { return std::string("2024-08-01T00:00:00Z"); };
}

}  // namespace

TEST_SUITE("phraseology") {

TEST_CASE("postings cover every token once") {
  const auto idx = en_index("a\twon/VERB the/DET medal/NOUN\nb\tthe/DET medal/NOUN the/DET\n");
  CHECK(idx.postings("won") == std::vector<Posting>{{0, 0}});
  CHECK(idx.postings("the") == std::vector<Posting>{{0, 1}, {1, 0}, {1, 2}});
  CHECK(idx.postings("medal") == std::vector<Posting>{{0, 2}, {1, 1}});
  CHECK(idx.postings("absent").empty());
  std::size_t sum = 0;
  for (const auto& [_, p] : idx.all_postings()) sum += p.size();
  CHECK(sum == idx.total_tokens());
  CHECK(idx.total_tokens() == 6);
}

TEST_CASE("frequency counts surface occurrences") {
  const auto idx = en_index(kMedalDocs);
  CHECK(frequency(idx, "medal") == 3);
  CHECK(frequency(idx, "gold") == 2);
  CHECK(frequency(idx, "bronze") == 0);
}

TEST_CASE("frequency against a scan on random corpora") {
  testkit::Rng rng(7);
  const auto& lex = testkit::toy_lexicon();
  for (int round = 0; round < 100; ++round) {
    const auto docs = testkit::random_tagged_corpus(rng, 6, 30);
    const auto idx = build_index(docs);
    const auto& form = lex[static_cast<std::size_t>(round) % lex.size()].surface;
    CHECK(frequency(idx, form) == testkit::oracle_frequency(docs, form));
  }
}

TEST_CASE("index is keyed by surface, not lemma") {
  auto docs = parse_tagged("x\tShe/PRON won/VERB ./PUNCT\ny\tthey/PRON win/VERB ./PUNCT\n", Lang::en);
  docs[0].tokens[1].lemma = "win";
  const auto idx = build_index(docs);
  CHECK(frequency(idx, "won") == 1);
  CHECK(frequency(idx, "win") == 1);
  CHECK(kwic(idx, "win", 2).size() == 1);
}

TEST_CASE("kwic windows") {
  const auto idx = en_index("s\tShe/PRON won/VERB the/DET gold/NOUN medal/NOUN yesterday/NOUN ./PUNCT\n");
  const auto lines = kwic(idx, "medal", 2);
  REQUIRE(lines.size() == 1);
  CHECK(surfaces(lines[0].left) == std::vector<std::string>{"the", "gold"});
  CHECK(surfaces(lines[0].right) == std::vector<std::string>{"yesterday", "."});
  CHECK(lines[0].node_surface == "medal");
  CHECK(lines[0].node_begin == 4);
  CHECK(lines[0].node_end == 5);

  const auto first = kwic(idx, "She", 3);
  REQUIRE(first.size() == 1);
  CHECK(first[0].left.empty());
  CHECK(surfaces(first[0].right) == std::vector<std::string>{"won", "the", "gold"});
}

TEST_CASE("kwic stays inside its document and follows document order") {
  const auto idx = en_index(kMedalDocs);
  const auto lines = kwic(idx, "medal", 3);
  REQUIRE(lines.size() == frequency(idx, "medal"));
  CHECK(lines[0].doc_id == "d1");
  CHECK(lines[1].doc_id == "d2");
  CHECK(lines[1].left.empty());
  CHECK(lines[2].right.empty());
  CHECK(kwic(idx, "medal", 3, 2).size() == 2);
  CHECK(render_line(lines[0], Lang::en).find("medal") != std::string::npos);
  CHECK(kwic(idx, "bronze", 3).empty());
}

TEST_CASE("join tokens per language") {
  const auto docs = parse_tagged("z\t在/PREP 巴黎/PROPN\n", Lang::zh);
  CHECK(join_tokens(docs[0].tokens, Lang::zh) == "在巴黎");
  CHECK(join_tokens(docs[0].tokens, Lang::en) == "在 巴黎");
}

TEST_CASE("raw collocates rank gold first for medal") {
  const auto idx = en_index(kMedalDocs);
  const auto cols = collocates(idx, "medal", 1, 1);
  REQUIRE_FALSE(cols.empty());
  CHECK(cols[0].form == "gold");
  CHECK(cols[0].freq == 2);
  const auto filtered = collocates(idx, "medal", 1, 2);
  REQUIRE(filtered.size() == 1);
  CHECK(filtered[0].form == "gold");
  CHECK(collocates(idx, "medal", 1, 50).empty());
  CHECK(code_of([&] { collocates(idx, "bronze", 1, 1); }) == ErrorCode::NodeAbsent);
  CHECK(code_of([&] { collocates(idx, "medal", 0, 1); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("mi and log likelihood by hand") {
  // x y N z x N y w v u, window 1: slots y z x y, W = 4, f(N) = 2
  const auto idx = en_index("d\tx/OTHER y/OTHER N/NOUN z/OTHER x/OTHER N/NOUN y/OTHER w/OTHER v/OTHER u/OTHER\n");
  const auto mi = collocates(idx, "N", 1, 1, CollocationMeasure::mi);
  REQUIRE(mi.size() == 3);
  CHECK(mi[0].form == "y");
  CHECK(mi[1].form == "z");
  CHECK(mi[2].form == "x");
  CHECK(std::abs(mi[0].stat - 1.0) < 1e-12);  // log2(2*4 / (2*2))
  CHECK(std::abs(mi[1].stat - 1.0) < 1e-12);  // log2(1*4 / (2*1))
  CHECK(std::abs(mi[2].stat - 0.0) < 1e-12);  // log2(1*4 / (2*2))

  const auto ll = collocates(idx, "N", 1, 1, CollocationMeasure::log_likelihood);
  // y: O = [[2, 2], [0, 6]], E = [[0.8, 3.2], [1.2, 4.8]]
  const double g2_y = 2.0 * (2 * std::log(2 / 0.8) + 2 * std::log(2 / 3.2) + 6 * std::log(6 / 4.8));
  bool seen = false;
  for (const auto& c : ll) {
    CHECK(c.stat >= 0.0);
    if (c.form == "y") {
      seen = true;
      CHECK(std::abs(c.stat - g2_y) < 1e-12);
    }
  }
  CHECK(seen);
  CHECK(parse_measure("ll") == CollocationMeasure::log_likelihood);
  CHECK(code_of([] { parse_measure("dice"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("compile slot patterns") {
  const auto p = compile_pattern("PREP MOD NODE");
  REQUIRE(p.slots.size() == 3);
  CHECK(p.node_slot == 2);
  CHECK(p.slots[0].kind == Slot::Kind::pos_class);
  CHECK(p.slots[2].kind == Slot::Kind::node);

  const auto q = compile_pattern("V ( MOD ) ( \"the\" ) \"gold\" NODE");
  REQUIRE(q.slots.size() == 5);
  CHECK(q.slots[1].group >= 0);
  CHECK(q.slots[2].group >= 0);
  CHECK(q.slots[1].group != q.slots[2].group);
  CHECK(q.slots[2].kind == Slot::Kind::literal);
  CHECK(q.slots[2].text == "the");
  CHECK(q.slots[3].group == -1);
  CHECK(q.node_slot == 4);

  const auto phrase = compile_pattern("\"complain about\" NODE");
  CHECK(phrase.slots.size() == 3);

  CHECK(code_of([] { compile_pattern("PREP MOD"); }) == ErrorCode::NoNodeSlot);
  CHECK(code_of([] { compile_pattern("NODE V NODE"); }) == ErrorCode::MultipleNodeSlots);
  CHECK(code_of([] { compile_pattern("V ( NODE"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { compile_pattern("V WIBBLE NODE"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { compile_pattern("( NODE ) V"); }).has_value());

  const auto file = parse_pattern_file("# medals\nmedal := V ( \"the\" ) \"gold\" NODE\n\nloc := PREP MOD NODE\n");
  REQUIRE(file.size() == 2);
  CHECK(file[0].name == "medal");
  CHECK(file[1].name == "loc");
  CHECK(find_slot(file[1], "MOD") == std::optional<std::size_t>(1));
  CHECK_FALSE(find_slot(file[1], "VP").has_value());
}

TEST_CASE("zh prep modifier node match") {
  const auto idx = zh_index("z\t在/PREP 巴黎/PROPN 奥运会/NOUN\n");
  const auto p = compile_pattern("PREP MOD NODE", "loc");
  const auto ms = match_pattern(idx, p, "奥运会");
  REQUIRE(ms.size() == 1);
  CHECK(filler_text(ms[0], 0, idx) == "在");
  CHECK(filler_text(ms[0], 1, idx) == "巴黎");
  CHECK(ms[0].span == TokenSpan{0, 3});
  CHECK(ms[0].id() == "loc@z:0-3");
  CHECK(code_of([&] { match_pattern(idx, p, "开幕式"); }) == ErrorCode::NodeAbsent);
}

TEST_CASE("optional literal is tried then skipped") {
  const auto idx = en_index(
      "a\tShe/PRON won/VERB the/DET gold/NOUN medal/NOUN ./PUNCT\n"
      "b\tThey/PRON shared/VERB gold/NOUN medal/NOUN ./PUNCT\n"
      "c\tthe/DET gold/NOUN medal/NOUN ./PUNCT\n");
  const auto p = compile_pattern("V ( \"the\" ) \"gold\" NODE", "gm");
  const auto ms = match_pattern(idx, p, "medal");
  REQUIRE(ms.size() == 2);
  CHECK(filler_text(ms[0], 0, idx) == "won");
  CHECK(ms[0].fillers.count(1) == 1);
  CHECK(filler_text(ms[1], 0, idx) == "shared");
  CHECK(ms[1].fillers.count(1) == 0);
  CHECK(ms[0].node_pos == 4);
}

TEST_CASE("variable length slots take the longest fit") {
  const auto idx = zh_index("k\t开幕式/NOUN 上/PREP 乘船/VERB 入场/VERB 。/PUNCT\n");
  const auto p = compile_pattern("NODE \"上\" VP", "vp");
  const auto ms = match_pattern(idx, p, "开幕式");
  REQUIRE(ms.size() == 1);
  CHECK(filler_text(ms[0], 2, idx) == "乘船入场");
  CHECK(ms[0].span == TokenSpan{0, 4});
  CHECK(render_match_context(idx, ms[0]).find("乘船") != std::string::npos);
}

TEST_CASE("en literals ignore case") {
  const auto idx = en_index("x\tThe/DET Gold/NOUN medal/NOUN\n");
  CHECK(match_pattern(idx, compile_pattern("\"the\" \"gold\" NODE"), "medal").size() == 1);
}

TEST_CASE("classification groups fillers") {
  const auto idx = zh_index(
      "a\t在/PREP 巴黎/PROPN 奥运会/NOUN\n"
      "b\t在/PREP 巴黎/PROPN 奥运会/NOUN\n"
      "c\t在/PREP 东京/PROPN 奥运会/NOUN\n");
  const auto p = compile_pattern("PREP MOD NODE", "loc");
  const auto ms = match_pattern(idx, p, "奥运会");
  const auto scheme = SemanticClassScheme::parse("host_city_current: 巴黎, 本届\nprevious_host: 东京, 里约\n");
  const auto c = classify_slot_fillers(ms, p, 1, scheme, idx);
  REQUIRE(c.groups.size() == 2);
  CHECK(c.groups[0].label == "host_city_current");
  CHECK(c.groups[0].count == 2);
  CHECK(c.groups[0].fillers.at("巴黎") == 2);
  CHECK(c.groups[1].label == "previous_host");
  CHECK(c.groups[1].count == 1);
  CHECK(c.total() == ms.size());

  const auto empty = classify_slot_fillers(ms, p, 1, SemanticClassScheme{}, idx);
  REQUIRE(empty.groups.size() == 1);
  CHECK(empty.groups[0].label == kUnclassified);
  CHECK(empty.groups[0].count == 3);
}

TEST_CASE("scheme overlap needs priority") {
  CHECK(code_of([] { SemanticClassScheme::parse("a: x, y\nb: y\n"); }) == ErrorCode::SchemeOverlap);
  const auto s = SemanticClassScheme::parse("@priority\na: x, y\nb: y, z\n");
  const auto idx = en_index("d\tgo/VERB y/NOUN\ne\tgo/VERB z/NOUN\n");
  const auto p = compile_pattern("V NODE");
  std::vector<PatternMatch> all;
  for (const auto* n : {"y", "z"}) {
    const auto ms = match_pattern(idx, p, n);
    all.insert(all.end(), ms.begin(), ms.end());
  }
  const auto c = classify_slot_fillers(all, p, 1, s, idx);
  REQUIRE(c.groups.size() == 2);
  CHECK(c.groups[0].label == "a");
  CHECK(c.groups[0].fillers.count("y") == 1);
  CHECK(c.groups[1].label == "b");
  CHECK(c.groups[1].fillers.count("z") == 1);
  CHECK(code_of([] { SemanticClassScheme::parse("no colon here\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("annotation store keeps history, latest wins") {
  const auto idx = en_index(kMedalDocs);
  const auto ms = match_pattern(idx, compile_pattern("V ( \"the\" ) \"gold\" NODE", "gm"), "medal");
  REQUIRE(ms.size() == 2);
  AnnotationStore store(std::nullopt, fixed_clock());
  store.register_matches(ms);
  CHECK(store.knows(ms[0].id()));
  store.annotate(ms[0].id(), ProsodyLabel::neutral, "a1");
  const auto second = store.annotate(ms[0].id(), ProsodyLabel::positive, "a1", "won outright");
  CHECK(second.revision == 2);
  CHECK(second.timestamp == "2024-08-01T00:00:00Z");
  const auto h = store.history(ms[0].id(), "a1");
  REQUIRE(h.size() == 2);
  CHECK(h[0].label == ProsodyLabel::neutral);
  CHECK(h[1].label == ProsodyLabel::positive);
  const auto sum = prosody_summary(store, "gm");
  CHECK(sum.by_annotator.at("a1").positive == 1);
  CHECK(sum.by_annotator.at("a1").neutral == 0);
  CHECK(sum.unannotated == 1);
  CHECK(code_of([&] { store.annotate("gm@nowhere:0-1", ProsodyLabel::negative, "a1"); }) == ErrorCode::UnknownMatch);
}

TEST_CASE("annotation store replays from disk") {
  testkit::TempDir dir("annot");
  const auto idx = en_index(kMedalDocs);
  const auto ms = match_pattern(idx, compile_pattern("V ( \"the\" ) \"gold\" NODE", "gm"), "medal");
  std::string hash;
  {
    AnnotationStore store(dir.path(), fixed_clock());
    store.register_matches(ms);
    store.annotate(ms[0].id(), ProsodyLabel::positive, "a1");
    store.annotate(ms[1].id(), ProsodyLabel::negative, "a2");
    store.annotate(ms[1].id(), ProsodyLabel::neutral, "a2");
    hash = store.content_hash();
  }
  AnnotationStore reopened(dir.path(), fixed_clock());
  CHECK(reopened.matches().size() == 2);
  CHECK(reopened.all_annotations().size() == 3);
  CHECK(reopened.history(ms[1].id(), "a2").back().label == ProsodyLabel::neutral);
  CHECK(reopened.content_hash() == hash);
}

TEST_CASE("stores sharing a directory see each other's writes") {
  testkit::TempDir dir("annot");
  const auto idx = en_index(kMedalDocs);
  const auto ms = match_pattern(idx, compile_pattern("V ( \"the\" ) \"gold\" NODE", "gm"), "medal");
  AnnotationStore server(dir.path(), fixed_clock());
  AnnotationStore cli(dir.path(), fixed_clock());
  cli.register_matches(ms);
  CHECK(server.knows(ms[1].id()));
  server.annotate(ms[1].id(), ProsodyLabel::positive, "a1");
  const auto second = cli.annotate(ms[1].id(), ProsodyLabel::negative, "a1");
  CHECK(second.revision == 2);
  CHECK(server.history(ms[1].id(), "a1").size() == 2);
  CHECK(server.content_hash() == cli.content_hash());
  CHECK(server.matches().size() == 2);
}

TEST_CASE("prosody proportions per annotator") {
  const auto idx = en_index(
      "a\twon/VERB gold/NOUN medal/NOUN\n"
      "b\twon/VERB gold/NOUN medal/NOUN\n"
      "c\tlost/VERB gold/NOUN medal/NOUN\n");
  const auto ms = match_pattern(idx, compile_pattern("V \"gold\" NODE", "gm"), "medal");
  REQUIRE(ms.size() == 3);
  AnnotationStore store(std::nullopt, fixed_clock());
  store.register_matches(ms);

  const auto none = prosody_summary(store, "gm");
  CHECK(none.total_matches == 3);
  CHECK(none.unannotated == 3);
  CHECK(none.by_annotator.empty());

  store.annotate(ms[0].id(), ProsodyLabel::positive, "a1");
  store.annotate(ms[1].id(), ProsodyLabel::positive, "a1");
  store.annotate(ms[2].id(), ProsodyLabel::negative, "a1");
  store.annotate(ms[2].id(), ProsodyLabel::neutral, "a2");
  const auto s = prosody_summary(store, "gm");
  const auto& a1 = s.by_annotator.at("a1");
  CHECK(std::abs(a1.proportion(ProsodyLabel::positive) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(a1.proportion(ProsodyLabel::negative) - 1.0 / 3.0) < 1e-12);
  const auto& a2 = s.by_annotator.at("a2");
  CHECK(a2.neutral == 1);
  CHECK(a2.positive == 0);
  CHECK(a2.unannotated == 2);
  CHECK(s.unannotated == 0);
  CHECK(prosody_summary(store, "medal", ProsodyScope::node).total_matches == 3);
  CHECK(parse_prosody(prosody_name(ProsodyLabel::negative)) == ProsodyLabel::negative);
}

TEST_CASE("random corpora agree with scan oracles") {
  testkit::Rng rng(2024);
  const std::vector<std::string> patterns = {
      "V ( \"the\" ) ( MOD ) \"gold\" NODE", "PREP MOD NODE", "NODE PP", "( DET ) NODE VP", "V ANY NODE ( \"and\" )"};
  const auto& lex = testkit::toy_lexicon();
  for (int round = 0; round < 20; ++round) {
    const auto docs = testkit::random_tagged_corpus(rng, 8, 40);
    const auto idx = build_index(docs);
    for (const auto& tw : lex) {
      const auto f = testkit::oracle_frequency(docs, tw.surface);
      REQUIRE(frequency(idx, tw.surface) == f);
      if (f == 0) continue;
      CHECK(kwic(idx, tw.surface, 4).size() == f);
      const auto cols = collocates(idx, tw.surface, 3, 1);
      std::map<std::string, std::size_t> got;
      for (const auto& c : cols) got[c.form] = c.freq;
      CHECK(got == testkit::oracle_raw_collocates(docs, tw.surface, 3));
      for (const auto& src : patterns) {
        const auto p = compile_pattern(src, "p");
        CHECK_MESSAGE(match_pattern(idx, p, tw.surface).size() == testkit::oracle_match_count(docs, p, tw.surface),
                      src << " node " << tw.surface);
      }
    }
  }
}

TEST_CASE("table mirror goldens") {
  const std::filesystem::path root = std::filesystem::path(CORPUSLENS_SOURCE_DIR) / "tests/golden/tables";
  for (const auto& name : testkit::table_fixtures()) {
    const auto expected = nlohmann::json::parse(text::read_file(root / name / "expected.json"));
    const auto got = testkit::run_table_fixture(root / name);
    CHECK_MESSAGE(got == expected, name << "\n" << got.dump(2));
  }
}

}  // TEST_SUITE

#include <atomic>

#include "doctest.h"
#include "testkit.hpp"

using namespace corpuslens;
using namespace corpuslens::lda;
using testkit::code_of;

namespace {

struct Toy {
  std::shared_ptr<const Vocabulary> vocab;
  BagOfWords bow;
};

// Documents given as word lists; vocabulary ids follow first appearance.
Toy toy(const std::vector<std::vector<std::string>>& docs) {
  std::vector<std::string> words;
  std::map<std::string, std::size_t> df;
  for (const auto& d : docs) {
    std::set<std::string> seen(d.begin(), d.end());
    for (const auto& w : d) {
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
    for (const auto& w : seen) ++df[w];
  }
  std::vector<std::size_t> dfs;
  for (const auto& w : words) dfs.push_back(df[w]);
  Toy t;
  auto vocab = std::make_shared<Vocabulary>(words, dfs);
  t.vocab = vocab;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    t.bow.doc_ids.push_back("d" + std::to_string(i));
    std::vector<std::uint32_t> ids;
    for (const auto& w : docs[i]) ids.push_back(static_cast<std::uint32_t>(*vocab->id(w)));
    t.bow.docs.push_back(ids);
  }
  t.bow.vocab_size = words.size();
  return t;
}

// Rebuilds a model with the given assignments; counts are recomputed here.
TopicModel with_assignments(const TopicModel& m, const std::vector<std::vector<std::uint32_t>>& z) {
  auto j = nlohmann::json::parse(model_to_json(m));
  const auto K = m.num_topics(), V = m.vocab_size();
  std::vector<std::uint32_t> ntw(K * V, 0), ndt(m.num_docs() * K, 0), nt(K, 0);
  for (std::size_t d = 0; d < z.size(); ++d) {
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      ++ntw[z[d][i] * V + m.words()[d][i]];
      ++ndt[d * K + z[d][i]];
      ++nt[z[d][i]];
    }
  }
  j["z"] = z;
  j["n_tw"] = ntw;
  j["n_dt"] = ndt;
  j["n_t"] = nt;
  return model_from_json(j.dump());
}

LdaConfig cfg(std::size_t k, std::size_t iters = 50, std::uint64_t seed = 1) {
  LdaConfig c;
  c.num_topics = k;
  c.iterations = iters;
  c.burn_in = iters / 2;
  c.seed = seed;
  return c;
}

bool marginals_hold(const TopicModel& m) {
  const auto K = m.num_topics(), V = m.vocab_size();
  std::size_t total = 0;
  for (std::size_t t = 0; t < K; ++t) {
    std::size_t row = 0;
    for (std::size_t w = 0; w < V; ++w) row += m.topic_word(t, w);
    if (row != m.topic_total(t)) return false;
    total += m.topic_total(t);
  }
  for (std::size_t d = 0; d < m.num_docs(); ++d) {
    std::size_t row = 0;
    for (std::size_t t = 0; t < K; ++t) row += m.doc_topic(d, t);
    if (row != m.words()[d].size()) return false;
  }
  std::size_t tokens = 0;
  for (const auto& d : m.words()) tokens += d.size();
  return total == tokens;
}

}  // namespace

TEST_SUITE("topic_model") {
  TEST_CASE("config validation") {
    auto c = cfg(3);
    c.burn_in = c.iterations;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
    c = cfg(3);
    c.beta = 0;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
    c = cfg(4);
    CHECK(c.effective_alpha() == doctest::Approx(12.5));
  }

  TEST_CASE("single-word degenerate corpus") {
    const auto t = toy({{"a", "a", "a"}});
    const auto m = train_lda(t.bow, t.vocab, cfg(1));
    const auto phi = topic_word_dist(m, 0);
    REQUIRE(phi.size() == 1);
    CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("same seed gives identical counts") {
    const auto s = testkit::make_lda_corpus(40, 3, 8, 0.3, 30, 9);
    const auto a = train_lda(s.bow, s.vocab, cfg(3, 40, 99));
    const auto b = train_lda(s.bow, s.vocab, cfg(3, 40, 99));
    CHECK(a.topic_word_counts() == b.topic_word_counts());
    CHECK(a.doc_topic_counts() == b.doc_topic_counts());
    CHECK(a.assignments() == b.assignments());
    CHECK(model_to_json(a) == model_to_json(b));
  }

  TEST_CASE("count invariants hold after every sweep") {
    const auto s = testkit::make_lda_corpus(60, 4, 10, 0.2, 25, 3);
    std::size_t sweeps = 0;
    bool ok = true;
    train_lda(s.bow, s.vocab, cfg(4, 30), [&](const TopicModel& m, std::size_t) {
      ++sweeps;
      ok = ok && marginals_hold(m) && !m.check_invariants();
    });
    CHECK(sweeps == 30);
    CHECK(ok);
  }

  TEST_CASE("three disjoint vocabularies are recovered") {
    const auto s = testkit::make_lda_corpus(200, 3, 20, 0.1, 40, 21);
    auto c = cfg(3, 200, 5);
    c.alpha = 0.1;
    const auto m = train_lda(s.bow, s.vocab, c);
    for (std::size_t t = 0; t < 3; ++t) {
      const auto top = top_keywords(m, t, 5);
      std::size_t owners = 0;
      for (const auto& truth : s.truth) {
        bool all = true;
        for (const auto& kw : top.items) all = all && truth.count(kw.word);
        owners += all ? 1 : 0;
      }
      CHECK(owners == 1);
    }
  }

  TEST_CASE("topic-word smoothing by hand") {
    const auto t = toy({{"a", "a", "a", "b"}});
    auto c = cfg(1);
    c.beta = 0.1;
    const auto m = train_lda(t.bow, t.vocab, c);
    const auto phi = topic_word_dist(m, 0);
    CHECK(phi[0] == doctest::Approx(3.1 / 4.2).epsilon(1e-12));
    CHECK(phi[1] == doctest::Approx(1.1 / 4.2).epsilon(1e-12));
    CHECK(code_of([&] { topic_word_dist(m, 1); }) == ErrorCode::TopicOutOfRange);
  }

  TEST_CASE("distributions are normalized and positive") {
    const auto s = testkit::make_lda_corpus(30, 3, 6, 0.5, 20, 4);
    const auto m = train_lda(s.bow, s.vocab, cfg(4, 20));
    for (std::size_t t = 0; t < 4; ++t) {
      const auto p = topic_word_dist(m, t);
      double sum = 0;
      for (auto x : p) {
        CHECK(x > 0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    for (std::size_t d = 0; d < m.num_docs(); ++d) {
      const auto p = doc_topic_dist(m, d);
      double sum = 0;
      for (auto x : p) sum += x;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  TEST_CASE("doc-topic smoothing by hand") {
    const auto t = toy({{"a", "b", "c", "d"}});
    auto c = cfg(2);
    c.alpha = 0.5;
    const auto base = train_lda(t.bow, t.vocab, c);
    const auto m = with_assignments(base, {{0, 0, 0, 1}});
    const auto theta = doc_topic_dist(m, 0);
    CHECK(theta[0] == doctest::Approx(3.5 / 5.0).epsilon(1e-12));
    CHECK(theta[1] == doctest::Approx(1.5 / 5.0).epsilon(1e-12));
    CHECK(code_of([&] { doc_topic_dist(m, 1); }) == ErrorCode::DocOutOfRange);
    const auto one = train_lda(t.bow, t.vocab, cfg(1));
    CHECK(doc_topic_dist(one, 0) == std::vector<double>{1.0});
  }

  TEST_CASE("top keywords by hand") {
    const auto t = toy({{"a", "a", "a", "b"}});
    auto c = cfg(1);
    c.beta = 0.1;
    const auto m = train_lda(t.bow, t.vocab, c);
    const auto top = top_keywords(m, 0, 2);
    REQUIRE(top.items.size() == 2);
    CHECK(top.items[0].word == "a");
    CHECK(top.items[0].weight == doctest::Approx(0.738).epsilon(1e-3));
    CHECK(top.items[1].word == "b");
    CHECK(top.items[1].weight == doctest::Approx(0.262).epsilon(1e-3));
    CHECK(code_of([&] { top_keywords(m, 0, 3); }) == ErrorCode::KTooLarge);
  }

  TEST_CASE("top keywords equal a full sort") {
    const auto s = testkit::make_lda_corpus(50, 4, 9, 0.4, 20, 8);
    const auto m = train_lda(s.bow, s.vocab, cfg(4, 30));
    for (std::size_t t = 0; t < 4; ++t) {
      const auto expect = testkit::oracle_top_words(m, t, 10);
      const auto got = top_keywords(m, t, 10);
      REQUIRE(got.items.size() == 10);
      for (std::size_t i = 0; i < 10; ++i) {
        CHECK(got.items[i].word == expect[i]);
        CHECK(got.items[i].weight > 0);
        CHECK(got.items[i].weight < 1);
        if (i > 0) CHECK(got.items[i].weight <= got.items[i - 1].weight);
      }
      CHECK(top_keywords(m, t, m.vocab_size()).items.size() == m.vocab_size());
    }
  }

  TEST_CASE("umass by hand") {
    // D(apple)=2, D(banana)=2, D(apple,banana)=1
    const auto t = toy({{"apple", "banana"}, {"apple", "cherry"}, {"banana", "cherry"}});
    const auto apple = static_cast<std::uint32_t>(*t.vocab->id("apple"));
    const auto banana = static_cast<std::uint32_t>(*t.vocab->id("banana"));
    const CoDocumentCounts counts(t.bow, {apple, banana});
    CHECK(umass_topic({apple, banana}, counts) == doctest::Approx(0.0));

    const auto n = toy({{"x", "q"}, {"x"}, {"y"}, {"y", "q"}});
    const auto x = static_cast<std::uint32_t>(*n.vocab->id("x"));
    const auto y = static_cast<std::uint32_t>(*n.vocab->id("y"));
    const CoDocumentCounts nc(n.bow, {x, y});
    const double s = umass_topic({x, y}, nc);
    CHECK(s < 0);
    CHECK(s == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }

  TEST_CASE("coherence equals pair enumeration") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = testkit::make_lda_corpus(8, 2, 5, 0.5, 6, seed);
      const auto m = train_lda(s.bow, s.vocab, cfg(2, 20, seed));
      for (auto metric : {CoherenceMetric::umass, CoherenceMetric::npmi}) {
        const auto n = std::min<std::size_t>(5, m.vocab_size());
        const double got = coherence(m, s.bow, n, metric);
        const double want = testkit::oracle_model_coherence(m, s.bow, n, metric);
        CHECK(std::abs(got - want) < 1e-12);
      }
    }
  }

  TEST_CASE("npmi scores never co-occurring pairs as -1") {
    const auto t = toy({{"a"}, {"b"}, {"a", "c"}});
    const auto a = static_cast<std::uint32_t>(*t.vocab->id("a"));
    const auto b = static_cast<std::uint32_t>(*t.vocab->id("b"));
    const CoDocumentCounts counts(t.bow, {a, b});
    CHECK(npmi_topic({a, b}, counts) == doctest::Approx(-1.0));
  }

  TEST_CASE("metric names") {
    CHECK(parse_metric("umass") == CoherenceMetric::umass);
    CHECK(parse_metric("npmi") == CoherenceMetric::npmi);
    CHECK(code_of([] { parse_metric("cv"); }) == ErrorCode::InvalidConfig);
  }

  TEST_CASE("sweep covers the range once") {
    const auto s = testkit::make_lda_corpus(40, 3, 8, 0.2, 20, 2);
    const auto curve = sweep_topic_count(s.bow, s.vocab, 2, 6, cfg(2, 20), 5, CoherenceMetric::umass, 2);
    REQUIRE(curve.points.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(curve.points[i].k == 2 + i);
    double best = -1e300;
    for (const auto& p : curve.points) best = std::max(best, p.score);
    std::size_t first_best = 0;
    for (const auto& p : curve.points) {
      if (p.score == best) {
        first_best = p.k;
        break;
      }
    }
    CHECK(curve.best_k == first_best);
    const auto csv = curve.to_csv();
    CHECK(csv.rfind("K,score\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  }

  TEST_CASE("degenerate sweep range") {
    const auto s = testkit::make_lda_corpus(20, 2, 5, 0.5, 10, 2);
    const auto curve = sweep_topic_count(s.bow, s.vocab, 2, 2, cfg(2, 10), 5, CoherenceMetric::umass);
    REQUIRE(curve.points.size() == 1);
    CHECK(curve.best_k == 2);
  }

  TEST_CASE("flat scores break ties to the smallest K") {
    const auto s = testkit::make_lda_corpus(20, 2, 5, 0.5, 10, 2);
    const auto curve = sweep_topic_count(s.bow, s.vocab, 3, 7, cfg(2, 5), CoherenceMetric::umass,
                                         [](const TopicModel&) { return 1.0; });
    CHECK(curve.points.size() == 5);
    CHECK(curve.best_k == 3);
  }

  TEST_CASE("sweep members use seed xor K and are reproducible") {
    const auto s = testkit::make_lda_corpus(30, 3, 6, 0.3, 15, 6);
    std::mutex mu;
    std::map<std::size_t, std::string> seen;
    const auto base = cfg(2, 10, 1234);
    sweep_topic_count(s.bow, s.vocab, 2, 4, base, CoherenceMetric::umass, [&](const TopicModel& m) {
      std::lock_guard lock(mu);
      seen[m.num_topics()] = model_to_json(m);
      return 0.0;
    }, 3);
    for (std::size_t k = 2; k <= 4; ++k) {
      auto c = base;
      c.num_topics = k;
      c.seed = base.seed ^ k;
      CHECK(seen.at(k) == model_to_json(train_lda(s.bow, s.vocab, c)));
    }
  }

  TEST_CASE("synthetic three-topic sweep prefers three or four") {
    // topN matches the generator vocabulary size; with fewer words UMass
    // cannot see a merged topic whose heavier half fills the whole list.
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto s = testkit::make_lda_corpus(300, 3, 30, 0.1, 50, seed);
      auto base = cfg(2, 100, seed * 31);
      base.alpha = 0.1;
      const auto curve = sweep_topic_count(s.bow, s.vocab, 2, 6, base, 30, CoherenceMetric::umass);
      CHECK((curve.best_k == 3 || curve.best_k == 4));
    }
  }

  TEST_CASE("identity merge keeps every topic") {
    std::vector<TopicKeywords> raw;
    MergeSpec spec;
    for (std::size_t t = 0; t < 9; ++t) {
      raw.push_back({t, {{"w" + std::to_string(t), 0.5}, {"x" + std::to_string(t), 0.1}}});
      spec[t] = {MergeAction::Kind::keep, 0};
    }
    const auto set = merge_topics(raw, spec);
    CHECK(set.topics.size() == 9);
    for (std::size_t t = 0; t < 9; ++t) CHECK(set.merge_log.at(t) == t);
  }

  TEST_CASE("nine raw topics merge to seven") {
    std::vector<TopicKeywords> raw;
    for (std::size_t t = 0; t < 9; ++t) raw.push_back({t, {{"w" + std::to_string(t), 0.3}}});
    const auto spec = parse_merge_spec("0 keep\n1 keep\n2 merge 1\n3 keep\n4 keep\n5 keep\n6 keep\n7 keep\n8 drop\n");
    const auto set = merge_topics(raw, spec);
    REQUIRE(set.topics.size() == 7);
    CHECK(set.topics[1].raw_topics == std::vector<std::size_t>{1, 2});
    CHECK(!set.merge_log.at(8).has_value());
    CHECK(set.merge_log.at(2) == 1);
    CHECK(set.merge_log.at(3) == 2);
  }

  TEST_CASE("merged keywords keep the max weight and every source") {
    std::vector<TopicKeywords> raw = {{0, {{"gold", 0.30}, {"medal", 0.20}}}, {1, {{"medal", 0.25}, {"race", 0.10}}}};
    const auto set = merge_topics(raw, parse_merge_spec("0 keep\n1 merge 0\n"));
    REQUIRE(set.topics.size() == 1);
    const auto& kws = set.topics[0].keywords;
    REQUIRE(kws.size() == 3);
    CHECK(kws[0].word == "gold");
    CHECK(kws[1].word == "medal");
    CHECK(kws[1].weight == doctest::Approx(0.25));
    CHECK(kws[1].sources == std::vector<std::size_t>{0, 1});
    CHECK(kws[2].word == "race");
  }

  TEST_CASE("invalid merge mappings") {
    std::vector<TopicKeywords> raw = {{0, {{"a", 0.1}}}, {1, {{"b", 0.1}}}};
    CHECK(code_of([&] { merge_topics(raw, parse_merge_spec("0 keep\n")); }) == ErrorCode::InvalidMapping);
    CHECK(code_of([&] { merge_topics(raw, parse_merge_spec("0 keep\n1 merge 5\n")); }) == ErrorCode::InvalidMapping);
    CHECK(code_of([&] { parse_merge_spec("0 explode\n"); }) == ErrorCode::InvalidMapping);
  }

  TEST_CASE("model snapshot round trip reproduces queries") {
    const auto s = testkit::make_lda_corpus(30, 3, 6, 0.3, 15, 6);
    const auto m = train_lda(s.bow, s.vocab, cfg(3, 20));
    const auto back = model_from_json(model_to_json(m));
    CHECK(back.topic_word_counts() == m.topic_word_counts());
    for (std::size_t t = 0; t < 3; ++t) CHECK(top_keywords(back, t, 5).items[0].word == top_keywords(m, t, 5).items[0].word);
    auto broken = nlohmann::json::parse(model_to_json(m));
    broken["n_t"][0] = broken["n_t"][0].get<int>() + 1;
    CHECK(code_of([&] { model_from_json(broken.dump()); }) == ErrorCode::ParseError);
  }

  TEST_CASE("averaged estimates stay normalized") {
    const auto s = testkit::make_lda_corpus(30, 3, 6, 0.3, 15, 6);
    auto c = cfg(3, 40);
    c.average_samples = true;
    c.sample_lag = 5;
    const auto m = train_lda(s.bow, s.vocab, c);
    CHECK(m.sample_count() == 4);
    double sum = 0;
    for (auto x : topic_word_dist(m, 0)) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

#include "corpuslens/topic_model.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"
#include "json.hpp"

namespace corpuslens::lda {

using json = nlohmann::json;

void LdaConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (num_topics < 1) fail("num_topics must be >= 1");
  if (alpha && !(*alpha > 0.0)) fail("alpha must be > 0");
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (iterations < 1) fail("iterations must be >= 1");
  if (burn_in >= iterations) fail("burn_in must be < iterations");
  if (average_samples && sample_lag < 1) fail("sample_lag must be >= 1");
}

TopicModel::TopicModel(LdaConfig config, std::shared_ptr<const Vocabulary> vocab, std::vector<std::string> doc_ids,
                       std::vector<std::vector<std::uint32_t>> words)
    : config_(std::move(config)), vocab_(std::move(vocab)), doc_ids_(std::move(doc_ids)), words_(std::move(words)) {
  z_.resize(words_.size());
  for (std::size_t d = 0; d < words_.size(); ++d) z_[d].assign(words_[d].size(), 0);
  recount();
}

void TopicModel::recount() {
  const auto K = num_topics();
  const auto V = vocab_size();
  n_tw_.assign(K * V, 0);
  n_dt_.assign(words_.size() * K, 0);
  n_t_.assign(K, 0);
  for (std::size_t d = 0; d < words_.size(); ++d) {
    for (std::size_t i = 0; i < words_[d].size(); ++i) {
      const auto t = z_[d][i];
      ++n_tw_[t * V + words_[d][i]];
      ++n_dt_[d * K + t];
      ++n_t_[t];
    }
  }
}

std::size_t TopicModel::total_tokens() const {
  std::size_t n = 0;
  for (const auto& d : words_) n += d.size();
  return n;
}

std::optional<std::string> TopicModel::check_invariants() const {
  const auto K = num_topics();
  const auto V = vocab_size();
  std::uint64_t assigned = 0;
  for (std::size_t t = 0; t < K; ++t) {
    std::uint64_t row = 0;
    for (std::size_t w = 0; w < V; ++w) row += n_tw_[t * V + w];
    if (row != n_t_[t]) return "topic " + std::to_string(t) + ": sum_w n_tw != n_t";
    assigned += n_t_[t];
  }
  if (assigned != total_tokens()) return "sum_t n_t != total tokens";
  for (std::size_t d = 0; d < words_.size(); ++d) {
    std::uint64_t row = 0;
    for (std::size_t t = 0; t < K; ++t) row += n_dt_[d * K + t];
    if (row != words_[d].size()) return "doc " + std::to_string(d) + ": sum_t n_dt != doc length";
  }
  // counts must equal a recount from the assignment vector
  std::vector<std::uint32_t> tw(K * V, 0);
  std::vector<std::uint32_t> dt(words_.size() * K, 0);
  for (std::size_t d = 0; d < words_.size(); ++d) {
    for (std::size_t i = 0; i < words_[d].size(); ++i) {
      const auto t = z_[d][i];
      if (t >= K) return "assignment out of range";
      ++tw[t * V + words_[d][i]];
      ++dt[d * K + t];
    }
  }
  if (tw != n_tw_) return "n_tw disagrees with assignments";
  if (dt != n_dt_) return "n_dt disagrees with assignments";
  return std::nullopt;
}

class GibbsSampler {
 public:
  GibbsSampler(TopicModel& model, std::uint64_t seed)
      : m_(model),
        rng_(seed),
        alpha_(model.config_.effective_alpha()),
        beta_(model.config_.beta),
        vbeta_(static_cast<double>(model.vocab_size()) * model.config_.beta),
        cdf_(model.num_topics()) {}

  void initialize() {
    const auto K = m_.num_topics();
    for (auto& zd : m_.z_) {
      for (auto& z : zd) z = static_cast<std::uint32_t>(std::min<std::size_t>(K - 1, static_cast<std::size_t>(uniform() * static_cast<double>(K))));
    }
    m_.recount();
  }

  void sweep() {
    const auto K = m_.num_topics();
    const auto V = m_.vocab_size();
    auto* n_tw = m_.n_tw_.data();
    auto* n_t = m_.n_t_.data();
    for (std::size_t d = 0; d < m_.words_.size(); ++d) {
      auto* n_dt = m_.n_dt_.data() + d * K;
      const auto& words = m_.words_[d];
      auto& zd = m_.z_[d];
      for (std::size_t i = 0; i < words.size(); ++i) {
        const auto w = words[i];
        auto t = zd[i];
        --n_tw[t * V + w];
        --n_dt[t];
        --n_t[t];
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          acc += (n_dt[k] + alpha_) * (n_tw[k * V + w] + beta_) / (n_t[k] + vbeta_);
          cdf_[k] = acc;
        }
        const double u = uniform() * acc;
        std::size_t k = 0;
        while (k + 1 < K && cdf_[k] <= u) ++k;
        t = static_cast<std::uint32_t>(k);
        zd[i] = t;
        ++n_tw[t * V + w];
        ++n_dt[t];
        ++n_t[t];
      }
    }
  }

  void accumulate() {
    const auto K = m_.num_topics();
    const auto V = m_.vocab_size();
    const auto D = m_.num_docs();
    m_.phi_sum_.resize(K * V, 0.0);
    m_.theta_sum_.resize(D * K, 0.0);
    for (std::size_t t = 0; t < K; ++t) {
      const double denom = m_.n_t_[t] + vbeta_;
      for (std::size_t w = 0; w < V; ++w) m_.phi_sum_[t * V + w] += (m_.n_tw_[t * V + w] + beta_) / denom;
    }
    for (std::size_t d = 0; d < D; ++d) {
      const double denom = static_cast<double>(m_.words_[d].size()) + static_cast<double>(K) * alpha_;
      for (std::size_t t = 0; t < K; ++t) m_.theta_sum_[d * K + t] += (m_.n_dt_[d * K + t] + alpha_) / denom;
    }
    ++m_.samples_;
  }

 private:
  // 53-bit uniform in [0, 1); defined bit-for-bit by mt19937_64.
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  TopicModel& m_;
  std::mt19937_64 rng_;
  double alpha_;
  double beta_;
  double vbeta_;
  std::vector<double> cdf_;
};

TopicModel train_lda(const BagOfWords& bow, std::shared_ptr<const Vocabulary> vocab, const LdaConfig& cfg,
                     const SweepObserver& observer) {
  cfg.validate();
  if (!vocab) throw Error(ErrorCode::InvalidConfig, "vocabulary is null");
  if (bow.docs.empty()) throw Error(ErrorCode::EmptyCorpus, "bag-of-words corpus has no documents");
  for (std::size_t d = 0; d < bow.docs.size(); ++d) {
    if (bow.docs[d].empty()) {
      throw Error(ErrorCode::EmptyCorpus, "document " + std::to_string(d) + " has no unmasked tokens");
    }
    for (auto w : bow.docs[d]) {
      if (w >= vocab->size()) throw Error(ErrorCode::InvalidConfig, "word id outside vocabulary");
    }
  }
  TopicModel model(cfg, std::move(vocab), bow.doc_ids, bow.docs);
  GibbsSampler sampler(model, cfg.seed);
  sampler.initialize();
  for (std::size_t s = 1; s <= cfg.iterations; ++s) {
    sampler.sweep();
    if (cfg.average_samples && s > cfg.burn_in && (s - cfg.burn_in) % cfg.sample_lag == 0) sampler.accumulate();
    if (observer) observer(model, s);
  }
  return model;
}

std::vector<double> topic_word_dist(const TopicModel& model, std::size_t topic) {
  if (topic >= model.num_topics()) {
    throw Error(ErrorCode::TopicOutOfRange, "topic " + std::to_string(topic) + " >= K=" + std::to_string(model.num_topics()));
  }
  const auto V = model.vocab_size();
  std::vector<double> p(V);
  if (model.has_averaged_estimates()) {
    const double n = static_cast<double>(model.sample_count());
    for (std::size_t w = 0; w < V; ++w) p[w] = model.phi_sum()[topic * V + w] / n;
    return p;
  }
  const double beta = model.config().beta;
  const double denom = model.topic_total(topic) + static_cast<double>(V) * beta;
  for (std::size_t w = 0; w < V; ++w) p[w] = (model.topic_word(topic, w) + beta) / denom;
  return p;
}

std::vector<double> doc_topic_dist(const TopicModel& model, std::size_t doc) {
  if (doc >= model.num_docs()) {
    throw Error(ErrorCode::DocOutOfRange, "document " + std::to_string(doc) + " >= D=" + std::to_string(model.num_docs()));
  }
  const auto K = model.num_topics();
  std::vector<double> p(K);
  if (model.has_averaged_estimates()) {
    const double n = static_cast<double>(model.sample_count());
    for (std::size_t t = 0; t < K; ++t) p[t] = model.theta_sum()[doc * K + t] / n;
    return p;
  }
  const double alpha = model.config().effective_alpha();
  const double denom = static_cast<double>(model.words()[doc].size()) + static_cast<double>(K) * alpha;
  for (std::size_t t = 0; t < K; ++t) p[t] = (model.doc_topic(doc, t) + alpha) / denom;
  return p;
}

namespace {

std::vector<std::uint32_t> ranked_word_ids(const TopicModel& model, std::size_t topic, std::size_t k) {
  const auto p = topic_word_dist(model, topic);
  std::vector<std::uint32_t> ids(p.size());
  std::iota(ids.begin(), ids.end(), 0u);
  const auto& vocab = model.vocab();
  auto by_rank = [&](std::uint32_t a, std::uint32_t b) {
    if (p[a] != p[b]) return p[a] > p[b];
    return vocab.word(a) < vocab.word(b);
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), by_rank);
  ids.resize(k);
  return ids;
}

}  // namespace

TopicKeywords top_keywords(const TopicModel& model, std::size_t topic, std::size_t k) {
  if (topic >= model.num_topics()) {
    throw Error(ErrorCode::TopicOutOfRange, "topic " + std::to_string(topic) + " >= K=" + std::to_string(model.num_topics()));
  }
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  if (k > model.vocab_size()) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds |V|=" + std::to_string(model.vocab_size()));
  }
  const auto p = topic_word_dist(model, topic);
  TopicKeywords out;
  out.topic_id = topic;
  for (auto id : ranked_word_ids(model, topic, k)) out.items.push_back({model.vocab().word(id), p[id]});
  return out;
}

// ---------------------------------------------------------------------------
// Coherence

std::string_view metric_name(CoherenceMetric m) { return m == CoherenceMetric::umass ? "umass" : "npmi"; }

CoherenceMetric parse_metric(std::string_view name) {
  if (name == "umass") return CoherenceMetric::umass;
  if (name == "npmi") return CoherenceMetric::npmi;
  throw Error(ErrorCode::InvalidConfig, "unknown coherence metric '" + std::string(name) + "'");
}

CoDocumentCounts::CoDocumentCounts(const BagOfWords& corpus, const std::vector<std::uint32_t>& words)
    : num_docs_(corpus.docs.size()) {
  const std::size_t blocks = (num_docs_ + 63) / 64;
  for (auto w : words) doc_bits_.emplace(w, std::vector<std::uint64_t>(blocks, 0));
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (auto w : corpus.docs[d]) {
      auto it = doc_bits_.find(w);
      if (it != doc_bits_.end()) it->second[d / 64] |= std::uint64_t{1} << (d % 64);
    }
  }
}

std::size_t CoDocumentCounts::df(std::uint32_t w) const {
  std::size_t n = 0;
  for (auto b : doc_bits_.at(w)) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

std::size_t CoDocumentCounts::co_df(std::uint32_t a, std::uint32_t b) const {
  const auto& x = doc_bits_.at(a);
  const auto& y = doc_bits_.at(b);
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += static_cast<std::size_t>(std::popcount(x[i] & y[i]));
  return n;
}

double umass_topic(const std::vector<std::uint32_t>& ranked, const CoDocumentCounts& counts) {
  double score = 0.0;
  for (std::size_t j = 1; j < ranked.size(); ++j) {
    const auto dj = counts.df(ranked[j]);
    if (dj == 0) {
      throw Error(ErrorCode::WordAbsentFromCorpus, "word id " + std::to_string(ranked[j]) + " occurs in no document");
    }
    for (std::size_t i = 0; i < j; ++i) {
      score += std::log((static_cast<double>(counts.co_df(ranked[i], ranked[j])) + 1.0) / static_cast<double>(dj));
    }
  }
  return score;
}

double npmi_topic(const std::vector<std::uint32_t>& ranked, const CoDocumentCounts& counts) {
  const double n = static_cast<double>(counts.num_docs());
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t j = 0; j < ranked.size(); ++j) {
    if (counts.df(ranked[j]) == 0) {
      throw Error(ErrorCode::WordAbsentFromCorpus, "word id " + std::to_string(ranked[j]) + " occurs in no document");
    }
  }
  for (std::size_t j = 1; j < ranked.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      ++pairs;
      const double co = static_cast<double>(counts.co_df(ranked[i], ranked[j]));
      if (co == 0.0) {
        total += -1.0;
        continue;
      }
      const double pij = co / n;
      if (pij >= 1.0) {
        total += 1.0;
        continue;
      }
      const double pi = static_cast<double>(counts.df(ranked[i])) / n;
      const double pj = static_cast<double>(counts.df(ranked[j])) / n;
      total += std::log(pij / (pi * pj)) / -std::log(pij);
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

double coherence(const TopicModel& model, const BagOfWords& corpus, std::size_t top_n, CoherenceMetric metric) {
  if (top_n < 2) throw Error(ErrorCode::InvalidConfig, "topN must be >= 2");
  const auto n = std::min(top_n, model.vocab_size());
  std::vector<std::vector<std::uint32_t>> ranked;
  std::vector<std::uint32_t> needed;
  for (std::size_t t = 0; t < model.num_topics(); ++t) {
    ranked.push_back(ranked_word_ids(model, t, n));
    needed.insert(needed.end(), ranked.back().begin(), ranked.back().end());
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  const CoDocumentCounts counts(corpus, needed);
  double sum = 0.0;
  for (const auto& r : ranked) {
    try {
      sum += metric == CoherenceMetric::umass ? umass_topic(r, counts) : npmi_topic(r, counts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::WordAbsentFromCorpus) throw;
      for (auto w : r) {
        if (counts.df(w) == 0) {
          throw Error(ErrorCode::WordAbsentFromCorpus, "'" + model.vocab().word(w) + "' occurs in no document");
        }
      }
      throw;
    }
  }
  return sum / static_cast<double>(ranked.size());
}

std::string CoherenceCurve::to_csv() const {
  std::string out = "K,score\n";
  for (const auto& p : points) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.12g\n", p.k, p.score);
    out += buf;
  }
  return out;
}

CoherenceCurve sweep_topic_count(const BagOfWords& bow, std::shared_ptr<const Vocabulary> vocab, std::size_t k_min,
                                 std::size_t k_max, const LdaConfig& base, CoherenceMetric label,
                                 const ModelScorer& scorer, std::size_t threads) {
  if (k_min < 2 || k_min > k_max) {
    throw Error(ErrorCode::InvalidConfig,
                "sweep range must satisfy 2 <= K_min <= K_max (got " + std::to_string(k_min) + ".." + std::to_string(k_max) + ")");
  }
  const std::size_t n = k_max - k_min + 1;
  std::vector<double> scores(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto k = k_min + i;
      try {
        LdaConfig cfg = base;
        cfg.num_topics = k;
        cfg.seed = base.seed ^ static_cast<std::uint64_t>(k);
        scores[i] = scorer(train_lda(bow, vocab, cfg));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    const auto k = std::to_string(k_min + i);
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "K=" + k + ": " + e.detail());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidConfig, "K=" + k + ": " + e.what());
    }
  }
  CoherenceCurve curve;
  curve.metric = label;
  for (std::size_t i = 0; i < n; ++i) {
    curve.points.push_back({k_min + i, scores[i]});
    if (i == 0 || scores[i] > scores[curve.best_k - k_min]) curve.best_k = k_min + i;
  }
  return curve;
}

CoherenceCurve sweep_topic_count(const BagOfWords& bow, std::shared_ptr<const Vocabulary> vocab, std::size_t k_min,
                                 std::size_t k_max, const LdaConfig& base, std::size_t top_n, CoherenceMetric metric,
                                 std::size_t threads) {
  if (top_n < 2) throw Error(ErrorCode::InvalidConfig, "topN must be >= 2");
  auto scorer = [&](const TopicModel& m) { return coherence(m, bow, top_n, metric); };
  return sweep_topic_count(bow, std::move(vocab), k_min, k_max, base, metric, scorer, threads);
}

// ---------------------------------------------------------------------------
// Manual merging

MergeSpec parse_merge_spec(std::string_view content) {
  MergeSpec spec;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls{std::string(t)};
    long long raw = -1;
    std::string verb;
    ls >> raw >> verb;
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::InvalidMapping, "line " + std::to_string(line_no) + ": " + why);
    };
    if (!ls || raw < 0) throw bad("expected '<topic> keep|drop|merge <target>'");
    MergeAction action;
    if (verb == "keep") {
      action.kind = MergeAction::Kind::keep;
    } else if (verb == "drop") {
      action.kind = MergeAction::Kind::drop;
    } else if (verb == "merge") {
      long long target = -1;
      ls >> target;
      if (!ls || target < 0) throw bad("merge needs a target topic id");
      action.kind = MergeAction::Kind::merge_into;
      action.target = static_cast<std::size_t>(target);
    } else {
      throw bad("unknown action '" + verb + "'");
    }
    if (!spec.emplace(static_cast<std::size_t>(raw), action).second) {
      throw bad("topic " + std::to_string(raw) + " listed twice");
    }
  }
  return spec;
}

AnalysisTopicSet merge_topics(const std::vector<TopicKeywords>& raw, const MergeSpec& spec, std::size_t top_k) {
  std::map<std::size_t, const TopicKeywords*> by_id;
  for (const auto& t : raw) {
    if (!by_id.emplace(t.topic_id, &t).second) {
      throw Error(ErrorCode::InvalidMapping, "raw topic " + std::to_string(t.topic_id) + " appears twice");
    }
  }
  for (const auto& [id, action] : spec) {
    if (!by_id.count(id)) throw Error(ErrorCode::InvalidMapping, "unknown topic id " + std::to_string(id));
    if (action.kind == MergeAction::Kind::merge_into && !by_id.count(action.target)) {
      throw Error(ErrorCode::InvalidMapping, "topic " + std::to_string(id) + " merges into unknown id " + std::to_string(action.target));
    }
  }
  for (const auto& [id, _] : by_id) {
    if (!spec.count(id)) throw Error(ErrorCode::InvalidMapping, "no action for topic " + std::to_string(id));
  }
  // resolve every topic to its kept root (or nullopt when dropped)
  std::map<std::size_t, std::optional<std::size_t>> root;
  for (const auto& [id, _] : by_id) {
    std::set<std::size_t> seen;
    std::size_t cur = id;
    while (true) {
      if (!seen.insert(cur).second) throw Error(ErrorCode::InvalidMapping, "merge cycle through topic " + std::to_string(cur));
      const auto& action = spec.at(cur);
      if (action.kind == MergeAction::Kind::keep) {
        root[id] = cur;
        break;
      }
      if (action.kind == MergeAction::Kind::drop) {
        if (cur != id) {
          throw Error(ErrorCode::InvalidMapping,
                      "topic " + std::to_string(id) + " merges into dropped topic " + std::to_string(cur));
        }
        root[id] = std::nullopt;
        break;
      }
      cur = action.target;
    }
  }
  AnalysisTopicSet out;
  std::map<std::size_t, std::size_t> analysis_of_root;
  for (const auto& [id, r] : root) {
    if (r && *r == id) {
      analysis_of_root[id] = out.topics.size();
      out.topics.push_back({out.topics.size(), {}, {}});
    }
  }
  for (const auto& [id, r] : root) {
    if (!r) {
      out.merge_log[id] = std::nullopt;
      continue;
    }
    const auto a = analysis_of_root.at(*r);
    out.merge_log[id] = a;
    out.topics[a].raw_topics.push_back(id);
  }
  for (auto& topic : out.topics) {
    std::map<std::string, MergedKeyword> merged;
    for (auto raw_id : topic.raw_topics) {
      for (const auto& item : by_id.at(raw_id)->items) {
        auto& m = merged[item.word];
        m.word = item.word;
        m.weight = std::max(m.weight, item.weight);
        m.sources.push_back(raw_id);
      }
    }
    for (auto& [_, m] : merged) {
      std::sort(m.sources.begin(), m.sources.end());
      m.sources.erase(std::unique(m.sources.begin(), m.sources.end()), m.sources.end());
      topic.keywords.push_back(std::move(m));
    }
    std::sort(topic.keywords.begin(), topic.keywords.end(), [](const auto& a, const auto& b) {
      return a.weight != b.weight ? a.weight > b.weight : a.word < b.word;
    });
    if (top_k > 0 && topic.keywords.size() > top_k) topic.keywords.resize(top_k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr int kModelVersion = 1;

json config_to_json(const LdaConfig& c) {
  return {{"num_topics", c.num_topics},
          {"alpha", c.alpha ? json(*c.alpha) : json(nullptr)},
          {"beta", c.beta},
          {"iterations", c.iterations},
          {"burn_in", c.burn_in},
          {"seed", c.seed},
          {"average_samples", c.average_samples},
          {"sample_lag", c.sample_lag}};
}

LdaConfig config_from_json(const json& j) {
  LdaConfig c;
  c.num_topics = j.at("num_topics").get<std::size_t>();
  if (!j.at("alpha").is_null()) c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.burn_in = j.at("burn_in").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.average_samples = j.value("average_samples", false);
  c.sample_lag = j.value("sample_lag", std::size_t{10});
  return c;
}

}  // namespace

std::string model_to_json(const TopicModel& model) {
  json j;
  j["format"] = "corpuslens-lda-model";
  j["version"] = kModelVersion;
  j["config"] = config_to_json(model.config());
  j["vocab"] = {{"words", model.vocab().words()},
                {"doc_freq", model.vocab().doc_freqs()},
                {"hash", model.vocab().content_hash()}};
  j["doc_ids"] = model.doc_ids();
  j["docs"] = model.words();
  j["z"] = model.assignments();
  j["n_tw"] = model.topic_word_counts();
  j["n_dt"] = model.doc_topic_counts();
  j["n_t"] = model.topic_totals();
  j["samples"] = model.sample_count();
  j["phi_sum"] = model.phi_sum();
  j["theta_sum"] = model.theta_sum();
  return j.dump();
}

TopicModel model_from_json(const std::string& content) {
  try {
    const auto j = json::parse(content);
    if (j.value("format", "") != "corpuslens-lda-model") throw Error(ErrorCode::ParseError, "not a model snapshot");
    if (j.at("version").get<int>() != kModelVersion) {
      throw Error(ErrorCode::ParseError, "unsupported model version " + j.at("version").dump());
    }
    const auto& jv = j.at("vocab");
    auto vocab = std::make_shared<const Vocabulary>(jv.at("words").get<std::vector<std::string>>(),
                                                    jv.at("doc_freq").get<std::vector<std::size_t>>());
    if (vocab->content_hash() != jv.at("hash").get<std::string>()) {
      throw Error(ErrorCode::ParseError, "vocabulary hash mismatch");
    }
    TopicModel m(config_from_json(j.at("config")), vocab, j.at("doc_ids").get<std::vector<std::string>>(),
                 j.at("docs").get<std::vector<std::vector<std::uint32_t>>>());
    m.z_ = j.at("z").get<std::vector<std::vector<std::uint32_t>>>();
    if (m.z_.size() != m.words_.size()) throw Error(ErrorCode::ParseError, "assignment shape mismatch");
    for (std::size_t d = 0; d < m.z_.size(); ++d) {
      if (m.z_[d].size() != m.words_[d].size()) throw Error(ErrorCode::ParseError, "assignment shape mismatch");
    }
    m.n_tw_ = j.at("n_tw").get<std::vector<std::uint32_t>>();
    m.n_dt_ = j.at("n_dt").get<std::vector<std::uint32_t>>();
    m.n_t_ = j.at("n_t").get<std::vector<std::uint32_t>>();
    if (m.n_tw_.size() != m.num_topics() * m.vocab_size() || m.n_dt_.size() != m.num_docs() * m.num_topics() ||
        m.n_t_.size() != m.num_topics()) {
      throw Error(ErrorCode::ParseError, "count matrix shape mismatch");
    }
    if (auto bad = m.check_invariants()) throw Error(ErrorCode::ParseError, "inconsistent counts: " + *bad);
    m.samples_ = j.value("samples", std::size_t{0});
    m.phi_sum_ = j.value("phi_sum", std::vector<double>{});
    m.theta_sum_ = j.value("theta_sum", std::vector<double>{});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model snapshot: ") + e.what());
  }
}

std::string topics_to_json(const std::vector<TopicKeywords>& topics) {
  json arr = json::array();
  for (const auto& t : topics) {
    json items = json::array();
    for (const auto& kw : t.items) items.push_back({{"word", kw.word}, {"weight", kw.weight}});
    arr.push_back({{"topic_id", t.topic_id}, {"keywords", items}});
  }
  return arr.dump(2);
}

std::vector<TopicKeywords> topics_from_json(const std::string& content) {
  try {
    std::vector<TopicKeywords> out;
    for (const auto& jt : json::parse(content)) {
      TopicKeywords t;
      t.topic_id = jt.at("topic_id").get<std::size_t>();
      for (const auto& kw : jt.at("keywords")) t.items.push_back({kw.at("word").get<std::string>(), kw.at("weight").get<double>()});
      out.push_back(std::move(t));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("topics file: ") + e.what());
  }
}

std::string analysis_to_json(const AnalysisTopicSet& set) {
  json topics = json::array();
  for (const auto& t : set.topics) {
    json kws = json::array();
    for (const auto& k : t.keywords) kws.push_back({{"word", k.word}, {"weight", k.weight}, {"sources", k.sources}});
    topics.push_back({{"id", t.id}, {"raw_topics", t.raw_topics}, {"keywords", kws}});
  }
  json log = json::object();
  for (const auto& [raw, a] : set.merge_log) log[std::to_string(raw)] = a ? json(*a) : json("dropped");
  return json{{"topics", topics}, {"merge_log", log}}.dump(2);
}

AnalysisTopicSet analysis_from_json(const std::string& content) {
  try {
    const auto j = json::parse(content);
    AnalysisTopicSet set;
    for (const auto& jt : j.at("topics")) {
      AnalysisTopic t;
      t.id = jt.at("id").get<std::size_t>();
      t.raw_topics = jt.at("raw_topics").get<std::vector<std::size_t>>();
      for (const auto& k : jt.at("keywords")) {
        t.keywords.push_back({k.at("word").get<std::string>(), k.at("weight").get<double>(),
                              k.at("sources").get<std::vector<std::size_t>>()});
      }
      set.topics.push_back(std::move(t));
    }
    for (const auto& [raw, a] : j.at("merge_log").items()) {
      set.merge_log[std::stoul(raw)] = a.is_string() ? std::nullopt : std::optional<std::size_t>(a.get<std::size_t>());
    }
    return set;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("analysis file: ") + e.what());
  }
}

}  // namespace corpuslens::lda

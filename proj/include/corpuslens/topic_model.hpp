#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corpuslens/corpus.hpp"

namespace corpuslens::lda {

struct LdaConfig {
  std::size_t num_topics = 10;
  // Unset means 50 / num_topics.
  std::optional<double> alpha;
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::size_t burn_in = 200;
  std::uint64_t seed = 42;
  // Average smoothed estimates over post-burn-in sweeps instead of reading
  // them off the final state.
  bool average_samples = false;
  std::size_t sample_lag = 10;

  double effective_alpha() const { return alpha.value_or(50.0 / static_cast<double>(num_topics)); }
  // Throws InvalidConfig.
  void validate() const;
};

class TopicModel {
 public:
  TopicModel(LdaConfig config, std::shared_ptr<const Vocabulary> vocab, std::vector<std::string> doc_ids,
             std::vector<std::vector<std::uint32_t>> words);

  const LdaConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  std::size_t num_topics() const { return config_.num_topics; }
  std::size_t num_docs() const { return words_.size(); }
  std::size_t vocab_size() const { return vocab_->size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  std::uint32_t topic_word(std::size_t t, std::size_t w) const { return n_tw_[t * vocab_size() + w]; }
  std::uint32_t doc_topic(std::size_t d, std::size_t t) const { return n_dt_[d * num_topics() + t]; }
  std::uint32_t topic_total(std::size_t t) const { return n_t_[t]; }
  const std::vector<std::uint32_t>& topic_word_counts() const { return n_tw_; }
  const std::vector<std::uint32_t>& doc_topic_counts() const { return n_dt_; }
  const std::vector<std::uint32_t>& topic_totals() const { return n_t_; }
  const std::vector<std::vector<std::uint32_t>>& words() const { return words_; }
  const std::vector<std::vector<std::uint32_t>>& assignments() const { return z_; }
  std::size_t total_tokens() const;

  // Exact marginal checks; returns a description of the first violation.
  std::optional<std::string> check_invariants() const;

  bool has_averaged_estimates() const { return samples_ > 0; }
  const std::vector<double>& phi_sum() const { return phi_sum_; }
  const std::vector<double>& theta_sum() const { return theta_sum_; }
  std::size_t sample_count() const { return samples_; }

 private:
  friend class GibbsSampler;
  friend TopicModel model_from_json(const std::string&);

  void recount();

  LdaConfig config_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::string> doc_ids_;
  std::vector<std::vector<std::uint32_t>> words_;
  std::vector<std::vector<std::uint32_t>> z_;
  std::vector<std::uint32_t> n_tw_;  // K x V row-major
  std::vector<std::uint32_t> n_dt_;  // D x K row-major
  std::vector<std::uint32_t> n_t_;
  // Running sums of smoothed estimates when config.average_samples is set.
  std::vector<double> phi_sum_;
  std::vector<double> theta_sum_;
  std::size_t samples_ = 0;
};

// Called after every completed sweep (1-based sweep number).
using SweepObserver = std::function<void(const TopicModel&, std::size_t sweep)>;

TopicModel train_lda(const BagOfWords& bow, std::shared_ptr<const Vocabulary> vocab, const LdaConfig& cfg,
                     const SweepObserver& observer = {});

// (n_tw[t,w] + beta) / (n_t[t] + V * beta), or the averaged estimate.
std::vector<double> topic_word_dist(const TopicModel& model, std::size_t topic);
// (n_dt[d,t] + alpha) / (n_d + K * alpha), or the averaged estimate.
std::vector<double> doc_topic_dist(const TopicModel& model, std::size_t doc);

struct KeywordWeight {
  std::string word;
  double weight = 0.0;
};

struct TopicKeywords {
  std::size_t topic_id = 0;
  std::vector<KeywordWeight> items;
};

TopicKeywords top_keywords(const TopicModel& model, std::size_t topic, std::size_t k = 10);

// ---------------------------------------------------------------------------
// Coherence

enum class CoherenceMetric { umass, npmi };

std::string_view metric_name(CoherenceMetric m);
CoherenceMetric parse_metric(std::string_view name);

// Document frequencies and pairwise co-document counts over a bag-of-words
// corpus, restricted to the words that are asked about.
class CoDocumentCounts {
 public:
  CoDocumentCounts(const BagOfWords& corpus, const std::vector<std::uint32_t>& words);
  std::size_t df(std::uint32_t w) const;
  std::size_t co_df(std::uint32_t a, std::uint32_t b) const;
  std::size_t num_docs() const { return num_docs_; }

 private:
  std::map<std::uint32_t, std::vector<std::uint64_t>> doc_bits_;
  std::size_t num_docs_ = 0;
};

// UMass for one ranked word list: sum over i<j of log((D(w_i,w_j)+1)/D(w_j)).
double umass_topic(const std::vector<std::uint32_t>& ranked, const CoDocumentCounts& counts);
// NPMI for one ranked word list: mean over pairs; pairs that never co-occur
// score -1.
double npmi_topic(const std::vector<std::uint32_t>& ranked, const CoDocumentCounts& counts);

// Mean per-topic score over the model's topics, using each topic's top_n
// words. Throws WordAbsentFromCorpus when a needed word has D(w)=0.
double coherence(const TopicModel& model, const BagOfWords& corpus, std::size_t top_n,
                 CoherenceMetric metric = CoherenceMetric::umass);

struct CoherencePoint {
  std::size_t k = 0;
  double score = 0.0;
};

struct CoherenceCurve {
  CoherenceMetric metric = CoherenceMetric::umass;
  std::vector<CoherencePoint> points;
  std::size_t best_k = 0;

  std::string to_csv() const;
};

using ModelScorer = std::function<double(const TopicModel&)>;

// One model per K in [k_min, k_max], seed = base.seed XOR K, alpha derived
// per K when base.alpha is unset. Models are trained on up to `threads`
// workers (0 = hardware concurrency). Ties pick the smallest K.
CoherenceCurve sweep_topic_count(const BagOfWords& bow, std::shared_ptr<const Vocabulary> vocab,
                                 std::size_t k_min, std::size_t k_max, const LdaConfig& base, std::size_t top_n,
                                 CoherenceMetric metric, std::size_t threads = 0);

CoherenceCurve sweep_topic_count(const BagOfWords& bow, std::shared_ptr<const Vocabulary> vocab,
                                 std::size_t k_min, std::size_t k_max, const LdaConfig& base,
                                 CoherenceMetric label, const ModelScorer& scorer, std::size_t threads = 0);

// ---------------------------------------------------------------------------
// Manual merging

struct MergeAction {
  enum class Kind { keep, merge_into, drop };
  Kind kind = Kind::keep;
  std::size_t target = 0;  // raw topic id, for merge_into
};

using MergeSpec = std::map<std::size_t, MergeAction>;

// Text form, one raw topic per line: `3 keep`, `4 merge 2`, `8 drop`.
MergeSpec parse_merge_spec(std::string_view text);

struct MergedKeyword {
  std::string word;
  double weight = 0.0;
  std::vector<std::size_t> sources;  // raw topic ids, ascending
};

struct AnalysisTopic {
  std::size_t id = 0;
  std::vector<std::size_t> raw_topics;  // ascending
  std::vector<MergedKeyword> keywords;
};

struct AnalysisTopicSet {
  std::vector<AnalysisTopic> topics;
  // raw topic id -> analysis topic id, nullopt for dropped topics
  std::map<std::size_t, std::optional<std::size_t>> merge_log;
};

// Keyword lists of merged topics are unions keeping the max weight and every
// source, sorted by weight then word, truncated to `top_k` (0 = keep all).
AnalysisTopicSet merge_topics(const std::vector<TopicKeywords>& raw, const MergeSpec& spec,
                              std::size_t top_k = 10);

// ---------------------------------------------------------------------------
// Persistence

std::string model_to_json(const TopicModel& model);
TopicModel model_from_json(const std::string& content);

std::string topics_to_json(const std::vector<TopicKeywords>& topics);
std::vector<TopicKeywords> topics_from_json(const std::string& content);

std::string analysis_to_json(const AnalysisTopicSet& set);
AnalysisTopicSet analysis_from_json(const std::string& content);

}  // namespace corpuslens::lda

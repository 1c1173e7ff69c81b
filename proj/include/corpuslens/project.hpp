#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "corpuslens/llm.hpp"
#include "corpuslens/phraseology.hpp"
#include "corpuslens/report.hpp"
#include "corpuslens/topic_model.hpp"
#include "corpuslens/workspace.hpp"
#include "json.hpp"

namespace corpuslens::cli {

using json = nlohmann::json;

struct TrainOptions {
  std::optional<std::size_t> num_topics;
  std::optional<std::size_t> iterations;
  std::optional<std::uint64_t> seed;
};

struct SweepOptions {
  std::optional<std::size_t> k_min;
  std::optional<std::size_t> k_max;
  std::optional<lda::CoherenceMetric> metric;
  std::optional<std::size_t> top_n;
  std::optional<std::size_t> iterations;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
};

struct PatternQuery {
  std::string name;
  std::string node;
  std::optional<std::string> scheme;
  std::optional<std::string> slot;
};

// Every pipeline step over one workspace. The CLI and the HTTP API both go
// through this class, so they read and write the same artifacts and stores.
class Project {
 public:
  explicit Project(ProjectConfig config, std::shared_ptr<llm::LlmClient> client = nullptr);

  const ProjectConfig& config() const { return config_; }
  Workspace& workspace() { return workspace_; }
  llm::LlmClient& client() { return *client_; }
  Lang resolve_lang(std::optional<Lang> lang) const { return config_.language(lang).lang; }

  // `command` is recorded as the provenance of produced artifacts.
  json ingest(std::optional<Lang> lang, bool llm_clean, const std::string& command);
  json filter(std::optional<Lang> lang, std::optional<std::size_t> min_count,
              std::optional<std::vector<std::string>> keywords, const std::string& command);
  json train(std::optional<Lang> lang, const TrainOptions& options, const std::string& command);
  json sweep(std::optional<Lang> lang, const SweepOptions& options, const std::string& command);
  json merge(std::optional<Lang> lang, const std::string& mapping, std::size_t top_k, const std::string& command);

  // Current topic cards: merged topics when a merge exists for the current
  // model, raw topics otherwise.
  json topics(std::optional<Lang> lang);
  json topic(std::optional<Lang> lang, std::size_t id);
  json raw_topics(std::optional<Lang> lang, std::size_t k);
  // nullopt text marks the topic as skipped.
  json describe(std::optional<Lang> lang, std::size_t id, std::optional<std::string> text);
  // Lines `<topic id><TAB><description>`, `-` as the description skips.
  json describe_from_file(std::optional<Lang> lang, const std::filesystem::path& path);
  json senses(std::optional<Lang> lang, std::optional<std::size_t> topic, bool per_keyword);
  json label(std::optional<Lang> lang, std::optional<std::size_t> topic, bool per_keyword);

  json kwic(std::optional<Lang> lang, const std::string& node, std::size_t window, std::optional<std::size_t> limit,
            std::size_t offset = 0);
  json collocates(std::optional<Lang> lang, const std::string& node, std::size_t window, std::size_t min_freq,
                  phrase::CollocationMeasure measure, std::size_t offset = 0,
                  std::optional<std::size_t> limit = std::nullopt);
  json patterns();
  // Matches are registered with the annotation store; with `record` the query
  // is also kept for the report.
  json pattern_matches(std::optional<Lang> lang, const PatternQuery& query, bool record, std::size_t offset = 0,
                       std::optional<std::size_t> limit = std::nullopt);
  json annotate(std::optional<Lang> lang, const std::string& match_id, phrase::ProsodyLabel label,
                const std::string& annotator, const std::string& note);
  json prosody(std::optional<Lang> lang, const std::string& scope, phrase::ProsodyScope kind);

  // Empty `sections` means every section that has data.
  std::string report(std::optional<Lang> lang, phrase::ReportFormat format,
                     const std::set<phrase::ReportSection>& sections, const std::string& command);

  // Loaded tokens for the working corpus (filtered when a filter ran).
  std::vector<TokenizedDocument> working_tokens(Lang lang, std::string* artifact_name = nullptr);
  std::shared_ptr<const phrase::PositionIndex> index(Lang lang);
  std::vector<llm::TopicCard> cards(Lang lang);

 private:
  struct CardStore {
    std::string source;
    std::vector<llm::TopicCard> cards;
    std::map<std::size_t, std::size_t> revisions;
  };

  std::string lang_suffix(Lang lang) const { return std::string(lang_name(lang)); }
  BagOfWords bag_of_words(Lang lang, std::shared_ptr<const Vocabulary>* vocab, std::string* tokens_name);
  std::optional<lda::AnalysisTopicSet> current_analysis(Lang lang);
  CardStore load_cards(Lang lang);
  void save_cards(Lang lang, const CardStore& store);
  json card_json(Lang lang, const llm::TopicCard& card, const CardStore& store);
  llm::TopicCard& find_card(CardStore& store, std::size_t id);
  phrase::AnnotationStore& annotations(Lang lang);
  llm::ExchangeLog& exchange_log(Lang lang);
  const std::vector<phrase::SlotPattern>& loaded_patterns();
  const phrase::SlotPattern& find_pattern(const std::string& name);
  phrase::SemanticClassScheme load_scheme(const std::string& name) const;
  std::vector<PatternQuery> recorded_queries(Lang lang);
  void record_query(Lang lang, const PatternQuery& q);
  llm::PromptInstructionSet instructions(llm::InstructionId id) const;

  ProjectConfig config_;
  Workspace workspace_;
  std::shared_ptr<llm::LlmClient> client_;
  std::mutex cards_mu_;
  std::mutex index_mu_;
  std::mutex stores_mu_;
  std::mutex llm_mu_;
  std::map<Lang, std::pair<std::string, std::shared_ptr<const phrase::PositionIndex>>> index_cache_;
  std::map<Lang, std::unique_ptr<phrase::AnnotationStore>> annotation_stores_;
  std::map<Lang, std::unique_ptr<llm::ExchangeLog>> exchange_logs_;
  std::optional<std::vector<phrase::SlotPattern>> patterns_;
};

std::shared_ptr<llm::LlmClient> make_client(const LlmConfig& config);

}  // namespace corpuslens::cli

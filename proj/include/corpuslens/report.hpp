#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "corpuslens/llm.hpp"
#include "corpuslens/phraseology.hpp"
#include "corpuslens/topic_model.hpp"

namespace corpuslens::phrase {

enum class ReportFormat { markdown, csv };
enum class ReportSection { topics, patterns, prosody };

ReportFormat parse_report_format(std::string_view s);  // "md" | "markdown" | "csv"
ReportSection parse_report_section(std::string_view s);
std::string_view section_name(ReportSection s);

struct PatternTableRow {
  std::string category;
  std::size_t frequency = 0;
  std::vector<std::string> example_words;     // "巴黎 (2)", most frequent first
  std::vector<std::string> example_sentences;
};

struct PatternTable {
  std::string pattern_name;
  std::string pattern_source;
  std::string node;
  std::string slot;
  std::string scheme;
  std::size_t total_matches = 0;
  std::vector<PatternTableRow> rows;
};

// Rows follow the classification's group order; examples come from the
// group's first matches.
PatternTable make_pattern_table(const SlotPattern& pattern, std::string_view node, std::string_view scheme_name,
                                const std::vector<PatternMatch>& matches, const SlotClassification& classes,
                                const PositionIndex& index, std::size_t max_examples = 2,
                                std::size_t max_words = 3);

struct ReportInputs {
  std::string title = "Corpus analysis report";
  // Topic tables come from the cards; `analysis` only adds raw-topic lineage.
  std::vector<llm::TopicCard> cards;
  std::optional<lda::AnalysisTopicSet> analysis;
  std::vector<PatternTable> patterns;
  std::vector<ProsodySummary> prosody;
};

// Deterministic; weights to 3 decimals. A requested section without data
// throws MissingSection.
std::string render_report(const ReportInputs& inputs, ReportFormat format,
                          const std::set<ReportSection>& sections);

}  // namespace corpuslens::phrase

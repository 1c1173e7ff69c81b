#include "corpuslens/report.hpp"

#include <algorithm>
#include <sstream>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"

namespace corpuslens::phrase {

ReportFormat parse_report_format(std::string_view s) {
  if (s == "md" || s == "markdown") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  throw Error(ErrorCode::InvalidConfig, "unknown report format '" + std::string(s) + "'");
}

ReportSection parse_report_section(std::string_view s) {
  if (s == "topics") return ReportSection::topics;
  if (s == "patterns") return ReportSection::patterns;
  if (s == "prosody") return ReportSection::prosody;
  throw Error(ErrorCode::InvalidConfig, "unknown report section '" + std::string(s) + "'");
}

std::string_view section_name(ReportSection s) {
  switch (s) {
    case ReportSection::topics: return "topics";
    case ReportSection::patterns: return "patterns";
    case ReportSection::prosody: return "prosody";
  }
  return "topics";
}

PatternTable make_pattern_table(const SlotPattern& pattern, std::string_view node, std::string_view scheme_name,
                                const std::vector<PatternMatch>& matches, const SlotClassification& classes,
                                const PositionIndex& index, std::size_t max_examples, std::size_t max_words) {
  PatternTable t;
  t.pattern_name = pattern.name;
  t.pattern_source = pattern.source;
  t.node = std::string(node);
  t.slot = classes.slot < pattern.slots.size() ? pattern.slots[classes.slot].text : std::to_string(classes.slot);
  t.scheme = std::string(scheme_name);
  t.total_matches = matches.size();
  for (const auto& g : classes.groups) {
    PatternTableRow row;
    row.category = g.label;
    row.frequency = g.count;
    std::vector<std::pair<std::string, std::size_t>> words(g.fillers.begin(), g.fillers.end());
    std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < words.size() && i < max_words; ++i) {
      row.example_words.push_back(words[i].first + " (" + std::to_string(words[i].second) + ")");
    }
    for (std::size_t i = 0; i < g.matches.size() && i < max_examples; ++i) {
      row.example_sentences.push_back(render_match_context(index, matches[g.matches[i]]));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string description_text(const llm::ManualDescription& d) {
  switch (d.state) {
    case llm::ManualDescription::State::provided: return d.text;
    case llm::ManualDescription::State::skipped: return "(skipped)";
    case llm::ManualDescription::State::missing: return "(none)";
  }
  return {};
}

const lda::AnalysisTopic* find_analysis(const ReportInputs& in, std::size_t id) {
  if (!in.analysis) return nullptr;
  for (const auto& t : in.analysis->topics) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::string raw_ids(const lda::AnalysisTopic& t) {
  std::vector<std::string> ids;
  for (auto r : t.raw_topics) ids.push_back(std::to_string(r));
  return join(ids, ", ");
}

void check_present(const ReportInputs& in, const std::set<ReportSection>& sections) {
  if (sections.empty()) throw Error(ErrorCode::MissingSection, "no report sections requested");
  for (auto s : sections) {
    const bool empty = s == ReportSection::topics     ? in.cards.empty()
                       : s == ReportSection::patterns ? in.patterns.empty()
                                                      : in.prosody.empty();
    if (empty) throw Error(ErrorCode::MissingSection, "no data for section '" + std::string(section_name(s)) + "'");
  }
}

void markdown_topics(std::ostream& out, const ReportInputs& in) {
  out << "## Topics\n";
  for (const auto& card : in.cards) {
    out << "\n### Topic " << card.topic_id << "\n\n";
    if (const auto* a = find_analysis(in, card.topic_id)) out << "Raw topics: " << raw_ids(*a) << "\n\n";
    out << "Description: " << md_cell(description_text(card.description)) << "\n\n";
    if (!card.implication.empty()) out << "Implication: " << md_cell(card.implication) << "\n\n";
    out << "| Rank | Keyword | Weight |\n|---:|---|---:|\n";
    for (std::size_t i = 0; i < card.keywords.size(); ++i) {
      out << "| " << i + 1 << " | " << md_cell(card.keywords[i].word) << " | " << text::fixed(card.keywords[i].weight, 3)
          << " |\n";
    }
  }
}

void markdown_patterns(std::ostream& out, const ReportInputs& in) {
  out << "## Patterns\n";
  for (const auto& t : in.patterns) {
    out << "\n### " << md_cell(t.pattern_name) << ": " << md_cell(t.pattern_source) << "\n\n";
    out << "Node: " << md_cell(t.node) << ", slot: " << md_cell(t.slot);
    if (!t.scheme.empty()) out << ", scheme: " << md_cell(t.scheme);
    out << ", matches: " << t.total_matches << "\n\n";
    out << "| Semantic Category | Frequency | Example Words | Example Sentence |\n|---|---:|---|---|\n";
    for (const auto& r : t.rows) {
      out << "| " << md_cell(r.category) << " | " << r.frequency << " | " << md_cell(join(r.example_words, ", "))
          << " | " << md_cell(join(r.example_sentences, " / ")) << " |\n";
    }
  }
}

void markdown_prosody(std::ostream& out, const ReportInputs& in) {
  out << "## Prosody\n";
  for (const auto& p : in.prosody) {
    out << "\n### " << md_cell(p.scope) << "\n\n";
    out << "Matches: " << p.total_matches << ", unannotated: " << p.unannotated << "\n\n";
    if (p.by_annotator.empty()) {
      out << "No annotations.\n";
      continue;
    }
    out << "| Annotator | Positive | Neutral | Negative | Unannotated |\n|---|---:|---:|---:|---:|\n";
    for (const auto& [who, c] : p.by_annotator) {
      auto cell = [&](std::size_t n, ProsodyLabel l) {
        return std::to_string(n) + " (" + text::fixed(c.proportion(l), 3) + ")";
      };
      out << "| " << md_cell(who) << " | " << cell(c.positive, ProsodyLabel::positive) << " | "
          << cell(c.neutral, ProsodyLabel::neutral) << " | " << cell(c.negative, ProsodyLabel::negative) << " | "
          << c.unannotated << " |\n";
    }
  }
}

void csv_topics(std::ostream& out, const ReportInputs& in) {
  out << "topic_id,raw_topics,rank,keyword,weight\n";
  for (const auto& card : in.cards) {
    const auto* a = find_analysis(in, card.topic_id);
    const auto raws = a ? raw_ids(*a) : std::string{};
    for (std::size_t i = 0; i < card.keywords.size(); ++i) {
      out << card.topic_id << "," << csv_field(raws) << "," << i + 1 << "," << csv_field(card.keywords[i].word) << ","
          << text::fixed(card.keywords[i].weight, 3) << "\n";
    }
  }
}

void csv_patterns(std::ostream& out, const ReportInputs& in) {
  out << "pattern,node,slot,semantic_category,frequency,example_words,example_sentence\n";
  for (const auto& t : in.patterns) {
    for (const auto& r : t.rows) {
      out << csv_field(t.pattern_name) << "," << csv_field(t.node) << "," << csv_field(t.slot) << ","
          << csv_field(r.category) << "," << r.frequency << "," << csv_field(join(r.example_words, "; ")) << ","
          << csv_field(join(r.example_sentences, " / ")) << "\n";
    }
  }
}

void csv_prosody(std::ostream& out, const ReportInputs& in) {
  out << "scope,annotator,positive,neutral,negative,unannotated,total_matches\n";
  for (const auto& p : in.prosody) {
    if (p.by_annotator.empty()) {
      out << csv_field(p.scope) << ",,0,0,0," << p.unannotated << "," << p.total_matches << "\n";
    }
    for (const auto& [who, c] : p.by_annotator) {
      out << csv_field(p.scope) << "," << csv_field(who) << "," << c.positive << "," << c.neutral << "," << c.negative
          << "," << c.unannotated << "," << p.total_matches << "\n";
    }
  }
}

}  // namespace

std::string render_report(const ReportInputs& inputs, ReportFormat format, const std::set<ReportSection>& sections) {
  check_present(inputs, sections);
  std::ostringstream out;
  if (format == ReportFormat::markdown) {
    out << "# " << inputs.title << "\n";
    for (auto s : sections) {
      out << "\n";
      if (s == ReportSection::topics) markdown_topics(out, inputs);
      if (s == ReportSection::patterns) markdown_patterns(out, inputs);
      if (s == ReportSection::prosody) markdown_prosody(out, inputs);
    }
  } else {
    bool first = true;
    for (auto s : sections) {
      if (!first) out << "\n";
      first = false;
      out << "# " << section_name(s) << "\n";
      if (s == ReportSection::topics) csv_topics(out, inputs);
      if (s == ReportSection::patterns) csv_patterns(out, inputs);
      if (s == ReportSection::prosody) csv_prosody(out, inputs);
    }
  }
  return out.str();
}

}  // namespace corpuslens::phrase

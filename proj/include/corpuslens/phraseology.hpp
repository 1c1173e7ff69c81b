#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "corpuslens/corpus.hpp"

namespace corpuslens::phrase {

// ---------------------------------------------------------------------------
// Positional index (keyed by surface form, never lemma)

struct Posting {
  std::uint32_t doc = 0;  // index into the document store
  std::uint32_t pos = 0;  // token index
  auto operator<=>(const Posting&) const = default;
};

class PositionIndex {
 public:
  explicit PositionIndex(std::shared_ptr<const std::vector<TokenizedDocument>> docs);

  const std::vector<Posting>& postings(std::string_view form) const;
  const std::map<std::string, std::vector<Posting>, std::less<>>& all_postings() const { return postings_; }
  const std::vector<TokenizedDocument>& docs() const { return *docs_; }
  std::size_t total_tokens() const { return total_tokens_; }

 private:
  std::shared_ptr<const std::vector<TokenizedDocument>> docs_;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::size_t total_tokens_ = 0;
};

PositionIndex build_index(std::vector<TokenizedDocument> corpus);

std::size_t frequency(const PositionIndex& index, std::string_view form);

// ---------------------------------------------------------------------------
// Concordance

inline constexpr std::size_t kDefaultWindow = 5;

struct ConcordanceLine {
  std::string doc_id;
  std::size_t doc_index = 0;
  std::size_t node_begin = 0;  // token range [node_begin, node_end)
  std::size_t node_end = 0;
  std::vector<Token> left;
  std::vector<Token> right;
  std::string node_surface;
};

// Joins tokens with spaces for en and without for zh.
std::string join_tokens(const std::vector<Token>& tokens, Lang lang);
std::string render_line(const ConcordanceLine& line, Lang lang);

// Lines in document then position order; `limit` caps the count.
std::vector<ConcordanceLine> kwic(const PositionIndex& index, std::string_view node, std::size_t window,
                                  std::optional<std::size_t> limit = std::nullopt);

// ---------------------------------------------------------------------------
// Collocation

enum class CollocationMeasure { raw, mi, log_likelihood };

std::string_view measure_name(CollocationMeasure m);
CollocationMeasure parse_measure(std::string_view name);

struct Collocate {
  std::string form;
  double stat = 0.0;
  std::size_t freq = 0;  // window slots holding the form
};

// Window statistics around every occurrence of `node`:
//   f(n,c)  window slots (within +-window, same document) holding c
//   f(n)    frequency of the node
//   f(c)    corpus frequency of c
//   W       total window slots
//   raw     f(n,c)
//   mi      log2(f(n,c) * W / (f(n) * f(c)))
//   log_likelihood  G2 over the 2x2 table {in window, elsewhere} x {c, not c}
//                   whose grand total is the corpus token count
// Sorted by stat descending then form. Throws NodeAbsent.
std::vector<Collocate> collocates(const PositionIndex& index, std::string_view node, std::size_t window,
                                  std::size_t min_freq, CollocationMeasure measure = CollocationMeasure::raw);

// ---------------------------------------------------------------------------
// Slot patterns

// Pattern DSL, whitespace separated:
//   "lit"        literal surface (a quoted phrase expands to one literal per word)
//   NODE         the node word (exactly one, never optional)
//   V N MOD DET PREP ADJ ADV NUM PROPN PRON PART NOUN VERB PUNCT OTHER ANY
//                single token of that class (V = VERB, N = NOUN|PROPN,
//                MOD = ADJ|NUM|PROPN|NOUN)
//   VP           verb head followed by up to 2 non-punctuation tokens
//   PP           PREP + up to 3 tokens, the last NOUN or PROPN
//   ( ... )      optional group, not nestable
struct Slot {
  enum class Kind { literal, pos_class, node, vp, pp, any };
  Kind kind = Kind::literal;
  std::string text;           // literal text, or the DSL class name
  std::vector<Pos> classes;   // for pos_class
  int group = -1;             // optional group id, -1 when required
};

struct SlotPattern {
  std::string name;
  std::string source;
  std::vector<Slot> slots;
  std::size_t node_slot = 0;
  std::size_t vp_max_tokens = 3;
  std::size_t pp_max_tokens = 4;
};

SlotPattern compile_pattern(std::string_view dsl, std::string name = {});

// `name := DSL` per line, `#` comments.
std::vector<SlotPattern> parse_pattern_file(std::string_view content);

// Position of the first slot whose DSL text equals `label` (e.g. "MOD").
std::optional<std::size_t> find_slot(const SlotPattern& pattern, std::string_view label);

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const TokenSpan&) const = default;
};

struct PatternMatch {
  std::string pattern_name;
  std::string node;
  std::string doc_id;
  std::size_t doc_index = 0;
  TokenSpan span;
  std::size_t node_pos = 0;
  std::map<std::size_t, TokenSpan> fillers;  // slot position -> tokens; skipped optional slots absent

  std::string id() const;  // "<pattern>@<doc_id>:<begin>-<end>"
};

// Does the single slot `slot` accept tokens [begin, end) of `doc`?
bool slot_accepts(const Slot& slot, const SlotPattern& pattern, const TokenizedDocument& doc, std::size_t begin,
                  std::size_t end, std::string_view node);

// At most one match per node occurrence: the leftmost start, then the longest
// end; optional groups are tried included before skipped and variable-length
// slots longest first. Throws NodeAbsent.
std::vector<PatternMatch> match_pattern(const PositionIndex& index, const SlotPattern& pattern, std::string_view node);

std::string filler_text(const PatternMatch& match, std::size_t slot, const PositionIndex& index);

// Sentence-like context around a match (match span plus `window` tokens each side).
std::string render_match_context(const PositionIndex& index, const PatternMatch& match, std::size_t window = 8);

// ---------------------------------------------------------------------------
// Semantic classes

struct SemanticClassScheme {
  std::string name;
  std::vector<std::pair<std::string, std::set<std::string>>> classes;  // priority order
  bool priority_declared = false;

  // Lines `label: form, form, ...`; an `@priority` line makes file order
  // decide overlaps, which are otherwise rejected (SchemeOverlap).
  static SemanticClassScheme parse(std::string_view content, std::string name = {});
  void validate() const;
};

inline constexpr std::string_view kUnclassified = "unclassified";

struct ClassGroup {
  std::string label;
  std::size_t count = 0;
  std::vector<std::size_t> matches;             // indices into the match list
  std::map<std::string, std::size_t> fillers;  // filler text -> count
};

struct SlotClassification {
  std::size_t slot = 0;
  std::vector<ClassGroup> groups;  // scheme order, then unclassified when non-empty

  std::size_t total() const;
};

SlotClassification classify_slot_fillers(const std::vector<PatternMatch>& matches, const SlotPattern& pattern,
                                         std::size_t slot, const SemanticClassScheme& scheme,
                                         const PositionIndex& index);

// ---------------------------------------------------------------------------
// Prosody annotation

enum class ProsodyLabel { positive, neutral, negative };
std::string_view prosody_name(ProsodyLabel l);
ProsodyLabel parse_prosody(std::string_view s);

struct MatchRecord {
  std::string id;
  std::string pattern_name;
  std::string node;
  std::string doc_id;
  TokenSpan span;
};

struct ProsodyAnnotation {
  std::string match_id;
  ProsodyLabel label = ProsodyLabel::neutral;
  std::string annotator;
  std::string note;
  std::string timestamp;
  std::size_t revision = 1;  // per (match, annotator)
};

// Known matches plus an append-only annotation history. With a directory,
// `matches.jsonl` and `annotations.jsonl` are the state: every mutation is
// appended to them and every access first reads lines other writers added.
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;
  explicit AnnotationStore(std::optional<std::filesystem::path> dir = std::nullopt, Clock clock = {});

  void register_matches(const std::vector<PatternMatch>& matches);
  bool knows(std::string_view match_id) const;
  std::optional<MatchRecord> match(std::string_view match_id) const;
  std::vector<MatchRecord> matches() const;

  // Throws UnknownMatch.
  ProsodyAnnotation annotate(const std::string& match_id, ProsodyLabel label, const std::string& annotator,
                             const std::string& note = {});

  std::vector<ProsodyAnnotation> history(std::string_view match_id, std::string_view annotator) const;
  std::vector<ProsodyAnnotation> all_annotations() const;
  std::string content_hash() const;

 private:
  void sync() const;  // caller holds mu_

  std::optional<std::filesystem::path> dir_;
  Clock clock_;
  mutable std::mutex mu_;
  mutable std::map<std::string, MatchRecord, std::less<>> matches_;
  mutable std::vector<ProsodyAnnotation> annotations_;
  mutable std::uintmax_t matches_read_ = 0;
  mutable std::uintmax_t annotations_read_ = 0;
};

struct ProsodyCounts {
  std::size_t positive = 0;
  std::size_t neutral = 0;
  std::size_t negative = 0;
  std::size_t unannotated = 0;

  std::size_t annotated() const { return positive + neutral + negative; }
  double proportion(ProsodyLabel l) const;
};

struct ProsodySummary {
  std::string scope;                               // pattern name or node
  std::size_t total_matches = 0;
  std::size_t unannotated = 0;                     // matches nobody labelled
  std::map<std::string, ProsodyCounts> by_annotator;  // latest label per annotator, never merged
};

enum class ProsodyScope { pattern, node };

ProsodySummary prosody_summary(const AnnotationStore& store, std::string_view scope,
                               ProsodyScope kind = ProsodyScope::pattern);

}  // namespace corpuslens::phrase

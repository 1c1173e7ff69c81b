#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace corpuslens {

enum class Lang { zh, en };

std::string_view lang_name(Lang lang);
// Throws NoSegmenter for anything other than "zh" / "en".
Lang parse_lang(std::string_view name);

enum class Pos { NOUN, VERB, ADJ, ADV, PREP, DET, PRON, NUM, PROPN, PART, PUNCT, OTHER };

std::string_view pos_name(Pos pos);
std::optional<Pos> parse_pos(std::string_view name);

struct Document {
  std::string id;
  std::string source;
  Lang lang = Lang::en;
  std::chrono::year_month_day published{};
  std::string title;
  std::string body;

  bool operator==(const Document&) const = default;
};

using Corpus = std::vector<Document>;

struct Token {
  std::string surface;
  std::string lemma;
  Pos pos = Pos::OTHER;
  std::size_t char_offset = 0;  // byte offset into the cleaned body

  bool operator==(const Token&) const = default;
};

struct TokenizedDocument {
  std::string doc_id;
  Lang lang = Lang::en;
  std::vector<Token> tokens;
  std::vector<bool> stopword_mask;  // same length as tokens

  bool operator==(const TokenizedDocument&) const = default;
};

// ---------------------------------------------------------------------------
// Loading

enum class CorpusFormat { jsonl, csv };

std::chrono::year_month_day parse_iso_date(std::string_view s);
std::string format_iso_date(std::chrono::year_month_day d);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus_jsonl(std::string_view content);
Corpus parse_corpus_csv(std::string_view content);
std::string write_corpus_jsonl(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Cleaning

struct CleaningRules {
  // Code points removed from title and body.
  std::function<bool(char32_t)> is_garbled;
  // Body lines fully matching any of these are dropped.
  std::vector<std::regex> boilerplate;

  // Control characters (except tab / newline), U+FFFD and U+FEFF.
  static CleaningRules defaults();
  // Defaults plus one ECMAScript regex per non-comment line of `path`.
  static CleaningRules with_boilerplate_file(const std::filesystem::path& path);
};

Document clean_document(const Document& doc, const CleaningRules& rules);

// ---------------------------------------------------------------------------
// Keyword filter

// Number of keyword hits in `text`. Hits are found left to right taking the
// longest keyword matching at each position, so overlapping keywords
// ("Olympic" / "Olympics") count a single textual occurrence once.
std::size_t count_keyword_hits(std::string_view text,
                               const std::vector<std::string>& keywords,
                               bool case_insensitive);

std::size_t keyword_occurrences(const Document& doc,
                                const std::vector<std::string>& keywords);

Corpus filter_by_keywords(const Corpus& corpus,
                          const std::vector<std::string>& keywords,
                          std::size_t min_count);

// ---------------------------------------------------------------------------
// Tokenization

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<Token> segment(std::string_view text) const = 0;
};

// Whitespace/punctuation splitter with clitic handling ("women's" ->
// women + 's, "didn't" -> did + n't); keeps hyphenated words and digit
// groups ("400-metre", "10,000m") together.
class EnglishSegmenter final : public Segmenter {
 public:
  std::vector<Token> segment(std::string_view text) const override;
};

// Forward maximum matching against a lexicon. Unknown CJK characters become
// single-character tokens; ASCII letter/digit runs stay together.
class LongestMatchSegmenter final : public Segmenter {
 public:
  explicit LongestMatchSegmenter(const std::vector<std::string>& lexicon);
  std::vector<Token> segment(std::string_view text) const override;

 private:
  std::set<std::u32string> words_;
  std::size_t max_len_ = 1;
};

class SegmenterRegistry {
 public:
  void add(Lang lang, std::shared_ptr<const Segmenter> seg);
  const Segmenter* find(Lang lang) const;

 private:
  std::map<Lang, std::shared_ptr<const Segmenter>> map_;
};

TokenizedDocument tokenize(const Document& doc, const SegmenterRegistry& segmenters);

// ---------------------------------------------------------------------------
// Token annotation

TokenizedDocument remove_stopwords(const TokenizedDocument& tdoc,
                                   const std::set<std::string>& stoplist);

using LemmaLexicon = std::unordered_map<std::string, std::string>;
TokenizedDocument lemmatize(const TokenizedDocument& tdoc, const LemmaLexicon& lexicon);

class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual Pos tag(std::string_view surface) const = 0;
};

// Surface -> POS lookup with OTHER as the fallback.
class LexiconTagger final : public Tagger {
 public:
  explicit LexiconTagger(std::unordered_map<std::string, Pos> lexicon,
                         bool case_fold = false);
  static LexiconTagger from_file(const std::filesystem::path& path, bool case_fold);
  Pos tag(std::string_view surface) const override;

 private:
  std::unordered_map<std::string, Pos> lexicon_;
  bool case_fold_;
};

class TaggerRegistry {
 public:
  void add(Lang lang, std::shared_ptr<const Tagger> tagger);
  const Tagger* find(Lang lang) const;

 private:
  std::map<Lang, std::shared_ptr<const Tagger>> map_;
};

TokenizedDocument pos_tag(const TokenizedDocument& tdoc, const TaggerRegistry& taggers);

// ---------------------------------------------------------------------------
// Tokenized corpus interchange (export and pre-tagged input)

std::string write_tokenized_jsonl(const std::vector<TokenizedDocument>& docs);
std::vector<TokenizedDocument> parse_tokenized_jsonl(std::string_view content);

// ---------------------------------------------------------------------------
// Vocabulary and bag-of-words

enum class TermForm { surface, lemma };

class Vocabulary {
 public:
  Vocabulary() = default;
  // Entries must be unique; ids follow the order given.
  Vocabulary(std::vector<std::string> words, std::vector<std::size_t> doc_freq);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t doc_freq(std::size_t id) const { return doc_freq_.at(id); }
  std::optional<std::size_t> id(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::size_t>& doc_freqs() const { return doc_freq_; }
  std::string content_hash() const;

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Entries are the unmasked term forms with document frequency >= min_df; ids
// ordered by descending document frequency, ties lexicographic.
Vocabulary build_vocabulary(const std::vector<TokenizedDocument>& corpus,
                            std::size_t min_df, TermForm form = TermForm::surface);

struct BagOfWords {
  std::vector<std::string> doc_ids;
  std::vector<std::vector<std::uint32_t>> docs;  // word ids in token order
  std::size_t vocab_size = 0;

  std::size_t total_tokens() const;
};

// Unmasked in-vocabulary tokens only; documents left empty are dropped.
BagOfWords to_bag_of_words(const std::vector<TokenizedDocument>& corpus,
                           const Vocabulary& vocab, TermForm form = TermForm::surface);

}  // namespace corpuslens

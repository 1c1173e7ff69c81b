#include "corpuslens/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"
#include "json.hpp"

namespace corpuslens {

using json = nlohmann::json;

std::string_view lang_name(Lang lang) { return lang == Lang::zh ? "zh" : "en"; }

Lang parse_lang(std::string_view name) {
  if (name == "zh") return Lang::zh;
  if (name == "en") return Lang::en;
  throw Error(ErrorCode::NoSegmenter, "unsupported language '" + std::string(name) + "'");
}

namespace {
constexpr std::array<std::string_view, 12> kPosNames{
    "NOUN", "VERB", "ADJ", "ADV", "PREP", "DET", "PRON", "NUM", "PROPN", "PART", "PUNCT", "OTHER"};
}

std::string_view pos_name(Pos pos) { return kPosNames[static_cast<std::size_t>(pos)]; }

std::optional<Pos> parse_pos(std::string_view name) {
  for (std::size_t i = 0; i < kPosNames.size(); ++i) {
    if (kPosNames[i] == name) return static_cast<Pos>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Loading

std::chrono::year_month_day parse_iso_date(std::string_view s) {
  auto bad = [&] { return Error(ErrorCode::ParseError, "invalid ISO-8601 date '" + std::string(s) + "'"); };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') throw bad();
  if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto* first = s.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    if (ec != std::errc{} || ptr != first + len) throw bad();
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return ymd;
}

std::string format_iso_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

namespace {

constexpr std::array<std::string_view, 6> kRequiredFields{"id", "source", "lang", "date", "title", "body"};

Document document_from_fields(const std::function<std::optional<std::string>(std::string_view)>& get,
                              std::size_t line) {
  auto where = [line] { return "line " + std::to_string(line) + ": "; };
  std::array<std::string, 6> v;
  for (std::size_t i = 0; i < kRequiredFields.size(); ++i) {
    auto value = get(kRequiredFields[i]);
    if (!value) {
      throw Error(ErrorCode::ParseError,
                  where() + "missing field '" + std::string(kRequiredFields[i]) + "'");
    }
    v[i] = std::move(*value);
  }
  Document doc;
  doc.id = v[0];
  doc.source = v[1];
  if (doc.id.empty()) throw Error(ErrorCode::ParseError, where() + "empty id");
  try {
    doc.lang = parse_lang(v[2]);
    doc.published = parse_iso_date(v[3]);
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, where() + e.detail());
  }
  doc.title = v[4];
  doc.body = v[5];
  return doc;
}

class IdSet {
 public:
  void insert(const std::string& id, std::size_t line) {
    if (!ids_.insert(id).second) {
      throw Error(ErrorCode::DuplicateId,
                  "line " + std::to_string(line) + ": duplicate id '" + id + "'");
    }
  }

 private:
  std::set<std::string> ids_;
};

}  // namespace

Corpus parse_corpus_jsonl(std::string_view content) {
  Corpus corpus;
  IdSet ids;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (text::trim(line).empty()) {
      if (end == content.size()) break;
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": record is not an object");
    }
    auto get = [&](std::string_view key) -> std::optional<std::string> {
      auto it = obj.find(std::string(key));
      if (it == obj.end() || !it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    auto doc = document_from_fields(get, line_no);
    ids.insert(doc.id, line_no);
    corpus.push_back(std::move(doc));
    if (end == content.size()) break;
  }
  return corpus;
}

namespace {

// RFC 4180 records; each record carries the line it started on.
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv_records(std::string_view s) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          fields.push_back(std::move(field));
          records.emplace_back(record_line, std::move(fields));
        }
        fields.clear();
        field.clear();
        any = false;
        ++line;
        record_line = line;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseError, "line " + std::to_string(record_line) + ": unterminated quote");
  if (any || !field.empty()) {
    fields.push_back(std::move(field));
    records.emplace_back(record_line, std::move(fields));
  }
  return records;
}

}  // namespace

Corpus parse_corpus_csv(std::string_view content) {
  auto records = parse_csv_records(content);
  Corpus corpus;
  if (records.empty()) return corpus;
  const auto& header = records.front().second;
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[std::string(text::trim(header[i]))] = i;
  IdSet ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, row] = records[r];
    auto get = [&](std::string_view key) -> std::optional<std::string> {
      auto it = column.find(key);
      if (it == column.end() || it->second >= row.size()) return std::nullopt;
      return row[it->second];
    };
    auto doc = document_from_fields(get, line);
    ids.insert(doc.id, line);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  const auto content = text::read_file(path);
  try {
    return format == CorpusFormat::jsonl ? parse_corpus_jsonl(content) : parse_corpus_csv(content);
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + " " + e.detail());
  }
}

std::string write_corpus_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus) {
    json obj = json::object();
    obj["id"] = d.id;
    obj["source"] = d.source;
    obj["lang"] = lang_name(d.lang);
    obj["date"] = format_iso_date(d.published);
    obj["title"] = d.title;
    obj["body"] = d.body;
    out += obj.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cleaning

CleaningRules CleaningRules::defaults() {
  CleaningRules rules;
  rules.is_garbled = [](char32_t cp) {
    if (cp == '\n' || cp == '\t') return false;
    return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp < 0xA0) ||
           cp == text::kReplacementChar || cp == 0xFEFF;
  };
  return rules;
}

CleaningRules CleaningRules::with_boilerplate_file(const std::filesystem::path& path) {
  auto rules = defaults();
  for (const auto& line : text::read_word_list(path)) {
    try {
      rules.boilerplate.emplace_back(line, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": bad pattern '" + line + "': " + e.what());
    }
  }
  return rules;
}

namespace {

std::string strip_garbled(std::string_view s, const CleaningRules& rules) {
  std::string out;
  out.reserve(s.size());
  for (const auto& cp : text::decode_utf8(s)) {
    if (!cp.valid) continue;
    if (rules.is_garbled && rules.is_garbled(cp.value)) continue;
    out.append(s.substr(cp.offset, cp.length));
  }
  return out;
}

}  // namespace

Document clean_document(const Document& doc, const CleaningRules& rules) {
  Document out = doc;
  out.title = std::string(text::trim(strip_garbled(doc.title, rules)));
  const auto body = strip_garbled(doc.body, rules);
  std::string kept;
  for (const auto& line : text::split(body, '\n')) {
    const auto t = text::trim(line);
    const bool boiler = std::any_of(rules.boilerplate.begin(), rules.boilerplate.end(),
                                    [&](const std::regex& re) {
                                      return std::regex_match(t.begin(), t.end(), re);
                                    });
    if (boiler) continue;
    // trailing whitespace is dropped so that re-cleaning is a no-op
    auto end = line.find_last_not_of(" \t");
    kept.append(end == std::string::npos ? std::string_view{} : std::string_view(line).substr(0, end + 1));
    kept.push_back('\n');
  }
  out.body = std::string(text::trim(kept));
  if (out.body.empty()) {
    throw Error(ErrorCode::EmptyAfterCleaning, "document '" + doc.id + "' is empty after cleaning");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keyword filter

std::size_t count_keyword_hits(std::string_view text, const std::vector<std::string>& keywords,
                               bool case_insensitive) {
  std::string hay = case_insensitive ? text::ascii_lower(text) : std::string(text);
  std::vector<std::string> needles;
  for (const auto& k : keywords) {
    if (!k.empty()) needles.push_back(case_insensitive ? text::ascii_lower(k) : k);
  }
  std::size_t hits = 0;
  std::size_t i = 0;
  while (i < hay.size()) {
    std::size_t best = 0;
    for (const auto& n : needles) {
      if (n.size() > best && hay.compare(i, n.size(), n) == 0) best = n.size();
    }
    if (best > 0) {
      ++hits;
      i += best;
    } else {
      ++i;
    }
  }
  return hits;
}

std::size_t keyword_occurrences(const Document& doc, const std::vector<std::string>& keywords) {
  const bool fold = doc.lang == Lang::en;
  return count_keyword_hits(doc.title, keywords, fold) + count_keyword_hits(doc.body, keywords, fold);
}

Corpus filter_by_keywords(const Corpus& corpus, const std::vector<std::string>& keywords,
                          std::size_t min_count) {
  if (min_count < 1) throw Error(ErrorCode::InvalidConfig, "min_count must be >= 1");
  if (keywords.empty()) throw Error(ErrorCode::InvalidConfig, "keyword list is empty");
  Corpus out;
  for (const auto& d : corpus) {
    if (keyword_occurrences(d, keywords) >= min_count) out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

bool is_word_cp(char32_t cp) { return !text::is_space(cp) && !text::is_punct(cp); }
bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }
bool is_apostrophe(char32_t cp) { return cp == '\'' || cp == 0x2019; }
bool is_ascii_alnum(char32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

char32_t lower(char32_t cp) { return (cp >= 'A' && cp <= 'Z') ? cp - 'A' + 'a' : cp; }

// Length (in code points, apostrophe included) of a clitic starting at `i`,
// or 0. A clitic must be followed by a non-word character or the end.
std::size_t clitic_length(const std::vector<text::CodePoint>& cps, std::size_t i) {
  if (i >= cps.size() || !is_apostrophe(cps[i].value)) return 0;
  static const std::array<std::u32string_view, 6> kSuffixes{U"s", U"re", U"ve", U"ll", U"d", U"m"};
  for (auto suf : kSuffixes) {
    if (i + 1 + suf.size() > cps.size()) continue;
    bool ok = true;
    for (std::size_t k = 0; k < suf.size() && ok; ++k) ok = lower(cps[i + 1 + k].value) == suf[k];
    if (!ok) continue;
    const auto after = i + 1 + suf.size();
    if (after == cps.size() || !is_word_cp(cps[after].value)) return 1 + suf.size();
  }
  return 0;
}

Token make_token(std::string_view text, const std::vector<text::CodePoint>& cps, std::size_t b,
                 std::size_t e) {
  const auto off = cps[b].offset;
  const auto end = cps[e - 1].offset + cps[e - 1].length;
  std::string s(text.substr(off, end - off));
  return Token{s, s, Pos::OTHER, off};
}

}  // namespace

std::vector<Token> EnglishSegmenter::segment(std::string_view text) const {
  const auto cps = text::decode_utf8(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    const auto cp = cps[i].value;
    if (text::is_space(cp)) {
      ++i;
      continue;
    }
    if (const auto cl = clitic_length(cps, i); cl > 0 && !out.empty() &&
                                               out.back().char_offset + out.back().surface.size() == cps[i].offset) {
      out.push_back(make_token(text, cps, i, i + cl));
      i += cl;
      continue;
    }
    if (!is_word_cp(cp)) {
      out.push_back(make_token(text, cps, i, i + 1));
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < cps.size()) {
      const auto c = cps[j].value;
      if (is_word_cp(c)) {
        ++j;
        continue;
      }
      const bool next_word = j + 1 < cps.size() && is_word_cp(cps[j + 1].value);
      if (!next_word) break;
      if (c == '-') {
        ++j;
      } else if ((c == '.' || c == ',') && is_digit(cps[j - 1].value) && is_digit(cps[j + 1].value)) {
        ++j;
      } else if (is_apostrophe(c) && clitic_length(cps, j) == 0) {
        ++j;
      } else {
        break;
      }
    }
    // split a trailing n't ("didn't" -> did + n't)
    if (j - i > 3 && lower(cps[j - 1].value) == 't' && is_apostrophe(cps[j - 2].value) &&
        lower(cps[j - 3].value) == 'n') {
      out.push_back(make_token(text, cps, i, j - 3));
      out.push_back(make_token(text, cps, j - 3, j));
    } else {
      out.push_back(make_token(text, cps, i, j));
    }
    i = j;
  }
  return out;
}

LongestMatchSegmenter::LongestMatchSegmenter(const std::vector<std::string>& lexicon) {
  for (const auto& w : lexicon) {
    std::u32string u;
    for (const auto& cp : text::decode_utf8(w)) u.push_back(cp.value);
    if (u.empty()) continue;
    max_len_ = std::max(max_len_, u.size());
    words_.insert(std::move(u));
  }
}

std::vector<Token> LongestMatchSegmenter::segment(std::string_view text) const {
  const auto cps = text::decode_utf8(text);
  std::vector<Token> out;
  std::u32string probe;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (text::is_space(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t run = 0;
    while (i + run < cps.size() && run < max_len_ && !text::is_space(cps[i + run].value)) ++run;
    std::size_t len = 0;
    for (std::size_t l = run; l >= 1 && len == 0; --l) {
      probe.clear();
      for (std::size_t k = 0; k < l; ++k) probe.push_back(cps[i + k].value);
      if (words_.count(probe) > 0) len = l;
    }
    if (len == 0) {
      len = 1;
      if (is_ascii_alnum(cps[i].value)) {
        while (i + len < cps.size() &&
               (is_ascii_alnum(cps[i + len].value) ||
                (cps[i + len].value == '.' && is_digit(cps[i + len - 1].value) && i + len + 1 < cps.size() &&
                 is_digit(cps[i + len + 1].value)))) {
          ++len;
        }
      }
    }
    out.push_back(make_token(text, cps, i, i + len));
    i += len;
  }
  return out;
}

void SegmenterRegistry::add(Lang lang, std::shared_ptr<const Segmenter> seg) { map_[lang] = std::move(seg); }

const Segmenter* SegmenterRegistry::find(Lang lang) const {
  auto it = map_.find(lang);
  return it == map_.end() ? nullptr : it->second.get();
}

TokenizedDocument tokenize(const Document& doc, const SegmenterRegistry& segmenters) {
  const auto* seg = segmenters.find(doc.lang);
  if (seg == nullptr) {
    throw Error(ErrorCode::NoSegmenter, "no segmenter registered for '" + std::string(lang_name(doc.lang)) + "'");
  }
  TokenizedDocument t;
  t.doc_id = doc.id;
  t.lang = doc.lang;
  t.tokens = seg->segment(doc.body);
  t.stopword_mask.assign(t.tokens.size(), false);
  return t;
}

// ---------------------------------------------------------------------------
// Token annotation

TokenizedDocument remove_stopwords(const TokenizedDocument& tdoc, const std::set<std::string>& stoplist) {
  TokenizedDocument out = tdoc;
  const bool fold = tdoc.lang == Lang::en;
  std::set<std::string> keys;
  for (const auto& s : stoplist) keys.insert(fold ? text::ascii_lower(s) : s);
  out.stopword_mask.assign(out.tokens.size(), false);
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    const auto& s = out.tokens[i].surface;
    out.stopword_mask[i] = keys.count(fold ? text::ascii_lower(s) : s) > 0;
  }
  return out;
}

TokenizedDocument lemmatize(const TokenizedDocument& tdoc, const LemmaLexicon& lexicon) {
  TokenizedDocument out = tdoc;
  for (auto& tok : out.tokens) {
    auto it = lexicon.find(tok.surface);
    tok.lemma = it != lexicon.end() ? it->second : tok.surface;
  }
  return out;
}

LexiconTagger::LexiconTagger(std::unordered_map<std::string, Pos> lexicon, bool case_fold)
    : case_fold_(case_fold) {
  for (auto& [k, v] : lexicon) lexicon_[case_fold ? text::ascii_lower(k) : k] = v;
}

LexiconTagger LexiconTagger::from_file(const std::filesystem::path& path, bool case_fold) {
  std::unordered_map<std::string, Pos> lex;
  for (const auto& [surface, tag] : text::read_pair_list(path)) {
    auto pos = parse_pos(tag);
    if (!pos) throw Error(ErrorCode::ParseError, path.string() + ": unknown POS '" + tag + "'");
    lex[surface] = *pos;
  }
  return LexiconTagger(std::move(lex), case_fold);
}

Pos LexiconTagger::tag(std::string_view surface) const {
  auto it = lexicon_.find(case_fold_ ? text::ascii_lower(surface) : std::string(surface));
  return it == lexicon_.end() ? Pos::OTHER : it->second;
}

void TaggerRegistry::add(Lang lang, std::shared_ptr<const Tagger> tagger) { map_[lang] = std::move(tagger); }

const Tagger* TaggerRegistry::find(Lang lang) const {
  auto it = map_.find(lang);
  return it == map_.end() ? nullptr : it->second.get();
}

TokenizedDocument pos_tag(const TokenizedDocument& tdoc, const TaggerRegistry& taggers) {
  const auto* tagger = taggers.find(tdoc.lang);
  if (tagger == nullptr) {
    throw Error(ErrorCode::NoTagger, "no tagger registered for '" + std::string(lang_name(tdoc.lang)) + "'");
  }
  TokenizedDocument out = tdoc;
  for (auto& tok : out.tokens) tok.pos = tagger->tag(tok.surface);
  return out;
}

// ---------------------------------------------------------------------------
// Tokenized corpus interchange

std::string write_tokenized_jsonl(const std::vector<TokenizedDocument>& docs) {
  std::string out;
  for (const auto& d : docs) {
    json toks = json::array();
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      const auto& t = d.tokens[i];
      toks.push_back({{"surface", t.surface},
                      {"lemma", t.lemma},
                      {"pos", pos_name(t.pos)},
                      {"off", t.char_offset},
                      {"stop", i < d.stopword_mask.size() && d.stopword_mask[i]}});
    }
    json obj = {{"doc_id", d.doc_id}, {"lang", lang_name(d.lang)}, {"tokens", std::move(toks)}};
    out += obj.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::vector<TokenizedDocument> parse_tokenized_jsonl(std::string_view content) {
  std::vector<TokenizedDocument> docs;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    try {
      const auto obj = json::parse(line);
      TokenizedDocument d;
      d.doc_id = obj.at("doc_id").get<std::string>();
      d.lang = parse_lang(obj.value("lang", std::string("en")));
      std::size_t prev_end = 0;
      for (const auto& jt : obj.at("tokens")) {
        Token t;
        t.surface = jt.at("surface").get<std::string>();
        if (t.surface.empty()) throw Error(ErrorCode::ParseError, "empty surface");
        t.lemma = jt.value("lemma", t.surface);
        if (t.lemma.empty()) t.lemma = t.surface;
        const auto pos = parse_pos(jt.value("pos", std::string("OTHER")));
        if (!pos) throw Error(ErrorCode::ParseError, "unknown POS");
        t.pos = *pos;
        // pre-tagged files may omit offsets; synthesize space-joined ones
        t.char_offset = jt.contains("off") ? jt.at("off").get<std::size_t>() : prev_end + (d.tokens.empty() ? 0 : 1);
        if (!d.tokens.empty() && t.char_offset <= d.tokens.back().char_offset) {
          throw Error(ErrorCode::ParseError, "token offsets not strictly increasing");
        }
        prev_end = t.char_offset + t.surface.size();
        d.stopword_mask.push_back(jt.value("stop", false));
        d.tokens.push_back(std::move(t));
      }
      if (!ids.insert(d.doc_id).second) {
        throw Error(ErrorCode::DuplicateId, where() + "duplicate doc_id '" + d.doc_id + "'");
      }
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where() + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DuplicateId) throw;
      throw Error(ErrorCode::ParseError, where() + e.detail());
    }
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::size_t> doc_freq)
    : words_(std::move(words)), doc_freq_(std::move(doc_freq)) {
  if (doc_freq_.size() != words_.size()) doc_freq_.resize(words_.size(), 1);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate vocabulary entry '" + words_[i] + "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::content_hash() const {
  std::string joined;
  for (const auto& w : words_) {
    joined += w;
    joined.push_back('\n');
  }
  return text::sha256_hex(joined);
}

namespace {
const std::string& term_of(const Token& t, TermForm form) {
  return form == TermForm::surface ? t.surface : t.lemma;
}
}  // namespace

Vocabulary build_vocabulary(const std::vector<TokenizedDocument>& corpus, std::size_t min_df, TermForm form) {
  if (min_df < 1) throw Error(ErrorCode::InvalidConfig, "min_df must be >= 1");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& d : corpus) {
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      if (i < d.stopword_mask.size() && d.stopword_mask[i]) continue;
      seen.insert(term_of(d.tokens[i], form));
    }
    for (auto w : seen) ++df[std::string(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [w, n] : df) {
    if (n >= min_df) entries.emplace_back(w, n);
  }
  if (entries.empty()) {
    throw Error(ErrorCode::EmptyVocabulary, "no term reaches min_df=" + std::to_string(min_df));
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  std::vector<std::size_t> freqs;
  for (auto& [w, n] : entries) {
    words.push_back(std::move(w));
    freqs.push_back(n);
  }
  return Vocabulary(std::move(words), std::move(freqs));
}

std::size_t BagOfWords::total_tokens() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

BagOfWords to_bag_of_words(const std::vector<TokenizedDocument>& corpus, const Vocabulary& vocab, TermForm form) {
  BagOfWords bow;
  bow.vocab_size = vocab.size();
  for (const auto& d : corpus) {
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      if (i < d.stopword_mask.size() && d.stopword_mask[i]) continue;
      if (auto id = vocab.id(term_of(d.tokens[i], form))) ids.push_back(static_cast<std::uint32_t>(*id));
    }
    if (ids.empty()) continue;
    bow.doc_ids.push_back(d.doc_id);
    bow.docs.push_back(std::move(ids));
  }
  return bow;
}

}  // namespace corpuslens

#include "corpuslens/phraseology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"
#include "json.hpp"

namespace corpuslens::phrase {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Index

PositionIndex::PositionIndex(std::shared_ptr<const std::vector<TokenizedDocument>> docs) : docs_(std::move(docs)) {
  const auto& d = *docs_;
  for (std::uint32_t di = 0; di < d.size(); ++di) {
    for (std::uint32_t ti = 0; ti < d[di].tokens.size(); ++ti) {
      auto it = postings_.find(d[di].tokens[ti].surface);
      if (it == postings_.end()) it = postings_.emplace(d[di].tokens[ti].surface, std::vector<Posting>{}).first;
      it->second.push_back({di, ti});
      ++total_tokens_;
    }
  }
}

const std::vector<Posting>& PositionIndex::postings(std::string_view form) const {
  static const std::vector<Posting> kEmpty;
  auto it = postings_.find(form);
  return it == postings_.end() ? kEmpty : it->second;
}

PositionIndex build_index(std::vector<TokenizedDocument> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  return PositionIndex(std::make_shared<const std::vector<TokenizedDocument>>(std::move(corpus)));
}

std::size_t frequency(const PositionIndex& index, std::string_view form) { return index.postings(form).size(); }

// ---------------------------------------------------------------------------
// Concordance

std::string join_tokens(const std::vector<Token>& tokens, Lang lang) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty() && lang == Lang::en) out.push_back(' ');
    out += t.surface;
  }
  return out;
}

std::string render_line(const ConcordanceLine& line, Lang lang) {
  return line.doc_id + "\t" + join_tokens(line.left, lang) + "\t" + line.node_surface + "\t" +
         join_tokens(line.right, lang);
}

std::vector<ConcordanceLine> kwic(const PositionIndex& index, std::string_view node, std::size_t window,
                                  std::optional<std::size_t> limit) {
  if (window < 1) throw Error(ErrorCode::InvalidConfig, "window must be >= 1");
  std::vector<ConcordanceLine> out;
  for (const auto& p : index.postings(node)) {
    if (limit && out.size() >= *limit) break;
    const auto& doc = index.docs()[p.doc];
    const std::size_t pos = p.pos;
    ConcordanceLine line;
    line.doc_id = doc.doc_id;
    line.doc_index = p.doc;
    line.node_begin = pos;
    line.node_end = pos + 1;
    line.node_surface = doc.tokens[pos].surface;
    const auto lb = pos >= window ? pos - window : 0;
    const auto re = std::min(doc.tokens.size(), pos + 1 + window);
    line.left.assign(doc.tokens.begin() + static_cast<std::ptrdiff_t>(lb), doc.tokens.begin() + static_cast<std::ptrdiff_t>(pos));
    line.right.assign(doc.tokens.begin() + static_cast<std::ptrdiff_t>(pos + 1), doc.tokens.begin() + static_cast<std::ptrdiff_t>(re));
    out.push_back(std::move(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collocation

std::string_view measure_name(CollocationMeasure m) {
  switch (m) {
    case CollocationMeasure::raw: return "raw";
    case CollocationMeasure::mi: return "mi";
    case CollocationMeasure::log_likelihood: return "log_likelihood";
  }
  return "raw";
}

CollocationMeasure parse_measure(std::string_view name) {
  if (name == "raw") return CollocationMeasure::raw;
  if (name == "mi") return CollocationMeasure::mi;
  if (name == "log_likelihood" || name == "ll") return CollocationMeasure::log_likelihood;
  throw Error(ErrorCode::InvalidConfig, "unknown collocation measure '" + std::string(name) + "'");
}

namespace {

double xlogx_ratio(double o, double e) { return o > 0.0 ? o * std::log(o / e) : 0.0; }

}  // namespace

std::vector<Collocate> collocates(const PositionIndex& index, std::string_view node, std::size_t window,
                                  std::size_t min_freq, CollocationMeasure measure) {
  if (window < 1) throw Error(ErrorCode::InvalidConfig, "window must be >= 1");
  if (min_freq < 1) throw Error(ErrorCode::InvalidConfig, "min_freq must be >= 1");
  const auto& occ = index.postings(node);
  if (occ.empty()) throw Error(ErrorCode::NodeAbsent, "node '" + std::string(node) + "' does not occur");
  std::map<std::string_view, std::size_t> joint;
  std::size_t slots = 0;
  for (const auto& p : occ) {
    const auto& toks = index.docs()[p.doc].tokens;
    const std::size_t lb = p.pos >= window ? p.pos - window : 0;
    const std::size_t re = std::min(toks.size(), static_cast<std::size_t>(p.pos) + window + 1);
    for (std::size_t i = lb; i < re; ++i) {
      if (i == p.pos) continue;
      ++joint[toks[i].surface];
      ++slots;
    }
  }
  const double fn = static_cast<double>(occ.size());
  const double w = static_cast<double>(slots);
  const double n = static_cast<double>(index.total_tokens());
  std::vector<Collocate> out;
  for (const auto& [form, f] : joint) {
    if (f < min_freq) continue;
    const double fnc = static_cast<double>(f);
    const double fc = static_cast<double>(frequency(index, form));
    double stat = fnc;
    if (measure == CollocationMeasure::mi) {
      stat = std::log2(fnc * w / (fn * fc));
    } else if (measure == CollocationMeasure::log_likelihood) {
      const double o11 = fnc;
      const double o12 = std::max(0.0, w - o11);
      const double o21 = std::max(0.0, fc - o11);
      const double o22 = std::max(0.0, n - w - o21);
      const double total = o11 + o12 + o21 + o22;
      const double r1 = o11 + o12, r2 = o21 + o22, c1 = o11 + o21, c2 = o12 + o22;
      stat = 2.0 * (xlogx_ratio(o11, r1 * c1 / total) + xlogx_ratio(o12, r1 * c2 / total) +
                    xlogx_ratio(o21, r2 * c1 / total) + xlogx_ratio(o22, r2 * c2 / total));
    }
    out.push_back({std::string(form), stat, f});
  }
  std::sort(out.begin(), out.end(), [](const Collocate& a, const Collocate& b) {
    return a.stat != b.stat ? a.stat > b.stat : a.form < b.form;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pattern compilation

namespace {

struct ClassDef {
  std::string_view name;
  Slot::Kind kind;
  std::vector<Pos> classes;
};

const std::vector<ClassDef>& class_table() {
  static const std::vector<ClassDef> table = {
      {"V", Slot::Kind::pos_class, {Pos::VERB}},
      {"N", Slot::Kind::pos_class, {Pos::NOUN, Pos::PROPN}},
      {"MOD", Slot::Kind::pos_class, {Pos::ADJ, Pos::NUM, Pos::PROPN, Pos::NOUN}},
      {"PREP", Slot::Kind::pos_class, {Pos::PREP}},
      {"DET", Slot::Kind::pos_class, {Pos::DET}},
      {"NOUN", Slot::Kind::pos_class, {Pos::NOUN}},
      {"VERB", Slot::Kind::pos_class, {Pos::VERB}},
      {"ADJ", Slot::Kind::pos_class, {Pos::ADJ}},
      {"ADV", Slot::Kind::pos_class, {Pos::ADV}},
      {"PRON", Slot::Kind::pos_class, {Pos::PRON}},
      {"NUM", Slot::Kind::pos_class, {Pos::NUM}},
      {"PROPN", Slot::Kind::pos_class, {Pos::PROPN}},
      {"PART", Slot::Kind::pos_class, {Pos::PART}},
      {"PUNCT", Slot::Kind::pos_class, {Pos::PUNCT}},
      {"OTHER", Slot::Kind::pos_class, {Pos::OTHER}},
      {"VP", Slot::Kind::vp, {}},
      {"PP", Slot::Kind::pp, {}},
      {"ANY", Slot::Kind::any, {}},
  };
  return table;
}

struct DslToken {
  enum class Kind { word, quoted, open, close } kind;
  std::string text;
};

std::vector<DslToken> lex_dsl(std::string_view dsl) {
  std::vector<DslToken> out;
  std::size_t i = 0;
  while (i < dsl.size()) {
    const char c = dsl[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++i;
    } else if (c == '(') {
      out.push_back({DslToken::Kind::open, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({DslToken::Kind::close, ")"});
      ++i;
    } else if (c == '"') {
      const auto close = dsl.find('"', i + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::SyntaxError, "unterminated literal at offset " + std::to_string(i));
      }
      out.push_back({DslToken::Kind::quoted, std::string(dsl.substr(i + 1, close - i - 1))});
      i = close + 1;
    } else {
      std::size_t j = i;
      while (j < dsl.size() && dsl[j] != ' ' && dsl[j] != '\t' && dsl[j] != '(' && dsl[j] != ')' && dsl[j] != '"' &&
             dsl[j] != '\r' && dsl[j] != '\n') {
        ++j;
      }
      out.push_back({DslToken::Kind::word, std::string(dsl.substr(i, j - i))});
      i = j;
    }
  }
  return out;
}

}  // namespace

SlotPattern compile_pattern(std::string_view dsl, std::string name) {
  SlotPattern pat;
  pat.name = std::move(name);
  pat.source = std::string(text::trim(dsl));
  int group = -1;
  int next_group = 0;
  std::size_t group_size = 0;
  std::size_t node_count = 0;
  for (const auto& tok : lex_dsl(dsl)) {
    switch (tok.kind) {
      case DslToken::Kind::open:
        if (group >= 0) throw Error(ErrorCode::SyntaxError, "optional groups cannot nest");
        group = next_group++;
        group_size = 0;
        break;
      case DslToken::Kind::close:
        if (group < 0) throw Error(ErrorCode::SyntaxError, "unbalanced ')'");
        if (group_size == 0) throw Error(ErrorCode::SyntaxError, "empty optional group");
        group = -1;
        break;
      case DslToken::Kind::quoted: {
        const auto words = text::split(std::string(text::trim(tok.text)), ' ');
        std::size_t added = 0;
        for (const auto& w : words) {
          if (w.empty()) continue;
          pat.slots.push_back({Slot::Kind::literal, w, {}, group});
          ++added;
        }
        if (added == 0) throw Error(ErrorCode::SyntaxError, "empty literal");
        group_size += added;
        break;
      }
      case DslToken::Kind::word: {
        if (tok.text == "NODE") {
          if (group >= 0) throw Error(ErrorCode::SyntaxError, "NODE cannot be optional");
          ++node_count;
          pat.node_slot = pat.slots.size();
          pat.slots.push_back({Slot::Kind::node, "NODE", {}, -1});
          break;
        }
        const auto& table = class_table();
        auto it = std::find_if(table.begin(), table.end(), [&](const ClassDef& d) { return d.name == tok.text; });
        if (it == table.end()) {
          throw Error(ErrorCode::SyntaxError, "unknown slot '" + tok.text + "' (quote literals: \"" + tok.text + "\")");
        }
        pat.slots.push_back({it->kind, std::string(it->name), it->classes, group});
        ++group_size;
        break;
      }
    }
  }
  if (group >= 0) throw Error(ErrorCode::SyntaxError, "unclosed '('");
  if (node_count == 0) throw Error(ErrorCode::NoNodeSlot, "pattern '" + pat.source + "' has no NODE slot");
  if (node_count > 1) throw Error(ErrorCode::MultipleNodeSlots, "pattern '" + pat.source + "' has several NODE slots");
  return pat;
}

std::vector<SlotPattern> parse_pattern_file(std::string_view content) {
  std::vector<SlotPattern> out;
  std::set<std::string> names;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto sep = line.find(":=");
    if (sep == std::string_view::npos) {
      throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line_no) + ": expected 'name := pattern'");
    }
    const auto name = std::string(text::trim(line.substr(0, sep)));
    if (name.empty()) throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line_no) + ": empty pattern name");
    if (!names.insert(name).second) {
      throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line_no) + ": duplicate pattern '" + name + "'");
    }
    try {
      out.push_back(compile_pattern(line.substr(sep + 2), name));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

std::optional<std::size_t> find_slot(const SlotPattern& pattern, std::string_view label) {
  for (std::size_t i = 0; i < pattern.slots.size(); ++i) {
    if (pattern.slots[i].text == label) return i;
  }
  // numeric positions are accepted too
  if (!label.empty() && std::all_of(label.begin(), label.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto pos = std::stoul(std::string(label));
    if (pos < pattern.slots.size()) return pos;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Matching

std::string PatternMatch::id() const {
  return pattern_name + "@" + doc_id + ":" + std::to_string(span.begin) + "-" + std::to_string(span.end);
}

namespace {

bool literal_equals(std::string_view surface, std::string_view literal, Lang lang) {
  if (lang == Lang::en) return text::ascii_lower(surface) == text::ascii_lower(literal);
  return surface == literal;
}

bool is_nominal(Pos p) { return p == Pos::NOUN || p == Pos::PROPN; }

// Lengths a slot may take, most preferred first.
std::vector<std::size_t> slot_lengths(const Slot& slot, const SlotPattern& pattern) {
  std::vector<std::size_t> out;
  switch (slot.kind) {
    case Slot::Kind::vp:
      for (std::size_t l = pattern.vp_max_tokens; l >= 1; --l) out.push_back(l);
      break;
    case Slot::Kind::pp:
      for (std::size_t l = pattern.pp_max_tokens; l >= 2; --l) out.push_back(l);
      break;
    default:
      out.push_back(1);
  }
  return out;
}

std::pair<std::size_t, std::size_t> group_bounds(const SlotPattern& pattern, std::size_t i) {
  const int g = pattern.slots[i].group;
  std::size_t first = i, last = i;
  while (first > 0 && pattern.slots[first - 1].group == g) --first;
  while (last + 1 < pattern.slots.size() && pattern.slots[last + 1].group == g) ++last;
  return {first, last};
}

using Fillers = std::map<std::size_t, TokenSpan>;

class AnchoredMatcher {
 public:
  AnchoredMatcher(const SlotPattern& pattern, const TokenizedDocument& doc, std::string_view node)
      : pat_(pattern), doc_(doc), node_(node) {}

  // Leftmost start for slots [0, node_slot) ending at `end`.
  std::optional<std::pair<std::size_t, Fillers>> best_left(std::size_t end) {
    best_.reset();
    Fillers f;
    if (pat_.node_slot == 0) return std::make_pair(end, f);
    left(static_cast<long>(pat_.node_slot) - 1, end, f);
    return best_;
  }

  // Rightmost end for slots (node_slot, size) starting at `begin`.
  std::optional<std::pair<std::size_t, Fillers>> best_right(std::size_t begin) {
    best_.reset();
    Fillers f;
    right(pat_.node_slot + 1, begin, f);
    return best_;
  }

 private:
  void left(long i, std::size_t end, Fillers& f) {
    if (i < 0) {
      if (!best_ || end < best_->first) best_ = std::make_pair(end, f);
      return;
    }
    const auto idx = static_cast<std::size_t>(i);
    const auto& slot = pat_.slots[idx];
    if (slot.group >= 0) {
      const auto [first, last] = group_bounds(pat_, idx);
      if (idx == last) {
        consume_left(i, end, f);
        left(static_cast<long>(first) - 1, end, f);  // group skipped
        return;
      }
    }
    consume_left(i, end, f);
  }

  void consume_left(long i, std::size_t end, Fillers& f) {
    const auto idx = static_cast<std::size_t>(i);
    for (auto len : slot_lengths(pat_.slots[idx], pat_)) {
      if (len > end) continue;
      const auto begin = end - len;
      if (!slot_accepts(pat_.slots[idx], pat_, doc_, begin, end, node_)) continue;
      f[idx] = {begin, end};
      left(i - 1, begin, f);
      f.erase(idx);
    }
  }

  void right(std::size_t i, std::size_t begin, Fillers& f) {
    if (i == pat_.slots.size()) {
      if (!best_ || begin > best_->first) best_ = std::make_pair(begin, f);
      return;
    }
    const auto& slot = pat_.slots[i];
    if (slot.group >= 0) {
      const auto [first, last] = group_bounds(pat_, i);
      if (i == first) {
        consume_right(i, begin, f);
        right(last + 1, begin, f);  // group skipped
        return;
      }
    }
    consume_right(i, begin, f);
  }

  void consume_right(std::size_t i, std::size_t begin, Fillers& f) {
    for (auto len : slot_lengths(pat_.slots[i], pat_)) {
      const auto end = begin + len;
      if (end > doc_.tokens.size()) continue;
      if (!slot_accepts(pat_.slots[i], pat_, doc_, begin, end, node_)) continue;
      f[i] = {begin, end};
      right(i + 1, end, f);
      f.erase(i);
    }
  }

  const SlotPattern& pat_;
  const TokenizedDocument& doc_;
  std::string_view node_;
  std::optional<std::pair<std::size_t, Fillers>> best_;
};

}  // namespace

bool slot_accepts(const Slot& slot, const SlotPattern& pattern, const TokenizedDocument& doc, std::size_t begin,
                  std::size_t end, std::string_view node) {
  if (begin >= end || end > doc.tokens.size()) return false;
  const auto len = end - begin;
  const auto& toks = doc.tokens;
  switch (slot.kind) {
    case Slot::Kind::literal:
      return len == 1 && literal_equals(toks[begin].surface, slot.text, doc.lang);
    case Slot::Kind::node:
      return len == 1 && toks[begin].surface == node;
    case Slot::Kind::pos_class:
      return len == 1 && std::find(slot.classes.begin(), slot.classes.end(), toks[begin].pos) != slot.classes.end();
    case Slot::Kind::any:
      return len == 1;
    case Slot::Kind::vp:
      if (len > pattern.vp_max_tokens || toks[begin].pos != Pos::VERB) return false;
      for (auto i = begin + 1; i < end; ++i) {
        if (toks[i].pos == Pos::PUNCT) return false;
      }
      return true;
    case Slot::Kind::pp:
      if (len < 2 || len > pattern.pp_max_tokens || toks[begin].pos != Pos::PREP || !is_nominal(toks[end - 1].pos)) {
        return false;
      }
      for (auto i = begin + 1; i < end; ++i) {
        if (toks[i].pos == Pos::PUNCT) return false;
      }
      return true;
  }
  return false;
}

std::vector<PatternMatch> match_pattern(const PositionIndex& index, const SlotPattern& pattern, std::string_view node) {
  const auto& occ = index.postings(node);
  if (occ.empty()) throw Error(ErrorCode::NodeAbsent, "node '" + std::string(node) + "' does not occur");
  std::vector<PatternMatch> out;
  for (const auto& p : occ) {
    const auto& doc = index.docs()[p.doc];
    AnchoredMatcher m(pattern, doc, node);
    auto l = m.best_left(p.pos);
    if (!l) continue;
    auto r = m.best_right(static_cast<std::size_t>(p.pos) + 1);
    if (!r) continue;
    PatternMatch match;
    match.pattern_name = pattern.name;
    match.node = std::string(node);
    match.doc_id = doc.doc_id;
    match.doc_index = p.doc;
    match.node_pos = p.pos;
    match.span = {l->first, r->first};
    match.fillers = std::move(l->second);
    match.fillers.merge(r->second);
    match.fillers[pattern.node_slot] = {p.pos, static_cast<std::size_t>(p.pos) + 1};
    out.push_back(std::move(match));
  }
  return out;
}

std::string filler_text(const PatternMatch& match, std::size_t slot, const PositionIndex& index) {
  auto it = match.fillers.find(slot);
  if (it == match.fillers.end()) return {};
  const auto& doc = index.docs()[match.doc_index];
  std::vector<Token> toks(doc.tokens.begin() + static_cast<std::ptrdiff_t>(it->second.begin),
                          doc.tokens.begin() + static_cast<std::ptrdiff_t>(it->second.end));
  return join_tokens(toks, doc.lang);
}

std::string render_match_context(const PositionIndex& index, const PatternMatch& match, std::size_t window) {
  const auto& doc = index.docs()[match.doc_index];
  const auto& toks = doc.tokens;
  const auto lb = match.span.begin >= window ? match.span.begin - window : 0;
  const auto re = std::min(toks.size(), match.span.end + window);
  auto slice = [&](std::size_t b, std::size_t e) {
    return join_tokens(std::vector<Token>(toks.begin() + static_cast<std::ptrdiff_t>(b), toks.begin() + static_cast<std::ptrdiff_t>(e)),
                       doc.lang);
  };
  const std::string sep = doc.lang == Lang::en ? " " : "";
  std::string out;
  if (lb > 0) out += "..." + sep;
  if (lb < match.span.begin) out += slice(lb, match.span.begin) + sep;
  out += "[" + slice(match.span.begin, match.span.end) + "]";
  if (match.span.end < re) out += sep + slice(match.span.end, re);
  if (re < toks.size()) out += sep + "...";
  return out;
}

// ---------------------------------------------------------------------------
// Semantic classes

SemanticClassScheme SemanticClassScheme::parse(std::string_view content, std::string name) {
  SemanticClassScheme scheme;
  scheme.name = std::move(name);
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "@priority") {
      scheme.priority_declared = true;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "scheme line " + std::to_string(line_no) + ": expected 'label: form, form'");
    }
    const auto label = std::string(text::trim(line.substr(0, colon)));
    if (label.empty()) throw Error(ErrorCode::ParseError, "scheme line " + std::to_string(line_no) + ": empty label");
    std::set<std::string> forms;
    for (const auto& f : text::split(line.substr(colon + 1), ',')) {
      const auto t = text::trim(f);
      if (!t.empty()) forms.emplace(t);
    }
    scheme.classes.emplace_back(label, std::move(forms));
  }
  scheme.validate();
  return scheme;
}

void SemanticClassScheme::validate() const {
  std::set<std::string> labels;
  std::map<std::string, std::string> owner;
  for (const auto& [label, forms] : classes) {
    if (label.empty()) throw Error(ErrorCode::ParseError, "scheme '" + name + "' has an empty label");
    if (!labels.insert(label).second) throw Error(ErrorCode::ParseError, "scheme '" + name + "' repeats label '" + label + "'");
    for (const auto& f : forms) {
      auto [it, fresh] = owner.emplace(text::ascii_lower(f), label);
      if (!fresh && !priority_declared) {
        throw Error(ErrorCode::SchemeOverlap,
                    "'" + f + "' is in both '" + it->second + "' and '" + label + "' without @priority");
      }
    }
  }
}

std::size_t SlotClassification::total() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.count;
  return n;
}

SlotClassification classify_slot_fillers(const std::vector<PatternMatch>& matches, const SlotPattern& pattern,
                                         std::size_t slot, const SemanticClassScheme& scheme,
                                         const PositionIndex& index) {
  if (slot >= pattern.slots.size()) {
    throw Error(ErrorCode::SlotOutOfRange,
                "slot " + std::to_string(slot) + " >= " + std::to_string(pattern.slots.size()) + " slots");
  }
  scheme.validate();
  SlotClassification out;
  out.slot = slot;
  for (const auto& [label, _] : scheme.classes) out.groups.push_back({label, 0, {}, {}});
  ClassGroup unclassified{std::string(kUnclassified), 0, {}, {}};
  for (std::size_t m = 0; m < matches.size(); ++m) {
    const auto filler = filler_text(matches[m], slot, index);
    const auto key = text::ascii_lower(filler);
    ClassGroup* target = &unclassified;
    for (std::size_t c = 0; c < scheme.classes.size() && !filler.empty(); ++c) {
      const auto& forms = scheme.classes[c].second;
      const bool hit = std::any_of(forms.begin(), forms.end(), [&](const std::string& f) { return text::ascii_lower(f) == key; });
      if (hit) {
        target = &out.groups[c];
        break;
      }
    }
    ++target->count;
    target->matches.push_back(m);
    ++target->fillers[filler.empty() ? "(none)" : filler];
  }
  if (unclassified.count > 0) out.groups.push_back(std::move(unclassified));
  return out;
}

// ---------------------------------------------------------------------------
// Prosody

std::string_view prosody_name(ProsodyLabel l) {
  switch (l) {
    case ProsodyLabel::positive: return "positive";
    case ProsodyLabel::neutral: return "neutral";
    case ProsodyLabel::negative: return "negative";
  }
  return "neutral";
}

ProsodyLabel parse_prosody(std::string_view s) {
  if (s == "positive" || s == "pos") return ProsodyLabel::positive;
  if (s == "neutral" || s == "neu") return ProsodyLabel::neutral;
  if (s == "negative" || s == "neg") return ProsodyLabel::negative;
  throw Error(ErrorCode::InvalidConfig, "unknown prosody label '" + std::string(s) + "'");
}

namespace {

json match_to_json(const MatchRecord& m) {
  return {{"id", m.id}, {"pattern", m.pattern_name}, {"node", m.node}, {"doc_id", m.doc_id},
          {"begin", m.span.begin}, {"end", m.span.end}};
}

json annotation_to_json(const ProsodyAnnotation& a) {
  return {{"match_id", a.match_id}, {"label", prosody_name(a.label)}, {"annotator", a.annotator},
          {"note", a.note},         {"timestamp", a.timestamp},       {"revision", a.revision}};
}

void append_line(const std::filesystem::path& path, const json& j) {
  const auto line = j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
}

// Feeds every complete line after byte `offset` to `fn` and advances `offset`
// past them.
template <typename F>
void tail(const std::filesystem::path& path, std::uintmax_t& offset, F&& fn) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size <= offset) return;
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(offset));
  std::string chunk(static_cast<std::size_t>(size - offset), '\0');
  in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  chunk.resize(static_cast<std::size_t>(in.gcount()));
  std::size_t start = 0;
  for (auto nl = chunk.find('\n'); nl != std::string::npos; nl = chunk.find('\n', start)) {
    const auto line = std::string_view(chunk).substr(start, nl - start);
    if (!text::trim(line).empty()) {
      try {
        fn(json::parse(line));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + " at byte " + std::to_string(offset + start) + ": " + e.what());
      }
    }
    start = nl + 1;
  }
  offset += start;
}

}  // namespace

AnnotationStore::AnnotationStore(std::optional<std::filesystem::path> dir, Clock clock)
    : dir_(std::move(dir)), clock_(std::move(clock)) {
  if (!dir_) return;
  std::filesystem::create_directories(*dir_);
  std::lock_guard lock(mu_);
  sync();
}

// Other processes (the CLI next to a running server) append to the same
// files, so every access first catches up with them.
void AnnotationStore::sync() const {
  if (!dir_) return;
  tail(*dir_ / "matches.jsonl", matches_read_, [&](const json& j) {
    MatchRecord m{j.at("id").get<std::string>(), j.at("pattern").get<std::string>(), j.at("node").get<std::string>(),
                  j.at("doc_id").get<std::string>(), {j.at("begin").get<std::size_t>(), j.at("end").get<std::size_t>()}};
    matches_.emplace(m.id, m);
  });
  tail(*dir_ / "annotations.jsonl", annotations_read_, [&](const json& j) {
    annotations_.push_back({j.at("match_id").get<std::string>(), parse_prosody(j.at("label").get<std::string>()),
                            j.at("annotator").get<std::string>(), j.value("note", ""), j.value("timestamp", ""),
                            j.value("revision", std::size_t{1})});
  });
}

void AnnotationStore::register_matches(const std::vector<PatternMatch>& matches) {
  std::lock_guard lock(mu_);
  sync();
  for (const auto& m : matches) {
    MatchRecord rec{m.id(), m.pattern_name, m.node, m.doc_id, m.span};
    if (matches_.count(rec.id)) continue;
    if (dir_) {
      append_line(*dir_ / "matches.jsonl", match_to_json(rec));
      sync();
    } else {
      matches_.emplace(rec.id, std::move(rec));
    }
  }
}

bool AnnotationStore::knows(std::string_view match_id) const {
  std::lock_guard lock(mu_);
  sync();
  return matches_.find(match_id) != matches_.end();
}

std::optional<MatchRecord> AnnotationStore::match(std::string_view match_id) const {
  std::lock_guard lock(mu_);
  sync();
  auto it = matches_.find(match_id);
  if (it == matches_.end()) return std::nullopt;
  return it->second;
}

std::vector<MatchRecord> AnnotationStore::matches() const {
  std::lock_guard lock(mu_);
  sync();
  std::vector<MatchRecord> out;
  for (const auto& [_, m] : matches_) out.push_back(m);
  return out;
}

ProsodyAnnotation AnnotationStore::annotate(const std::string& match_id, ProsodyLabel label,
                                            const std::string& annotator, const std::string& note) {
  if (annotator.empty()) throw Error(ErrorCode::InvalidConfig, "annotator name is empty");
  std::lock_guard lock(mu_);
  sync();
  if (matches_.find(match_id) == matches_.end()) throw Error(ErrorCode::UnknownMatch, "unknown match '" + match_id + "'");
  std::size_t revision = 1;
  for (const auto& a : annotations_) {
    if (a.match_id == match_id && a.annotator == annotator) revision = a.revision + 1;
  }
  ProsodyAnnotation a{match_id, label, annotator, note, clock_ ? clock_() : text::utc_now_iso(), revision};
  if (dir_) {
    append_line(*dir_ / "annotations.jsonl", annotation_to_json(a));
    sync();
  } else {
    annotations_.push_back(a);
  }
  return a;
}

std::vector<ProsodyAnnotation> AnnotationStore::history(std::string_view match_id, std::string_view annotator) const {
  std::lock_guard lock(mu_);
  sync();
  std::vector<ProsodyAnnotation> out;
  for (const auto& a : annotations_) {
    if (a.match_id == match_id && a.annotator == annotator) out.push_back(a);
  }
  return out;
}

std::vector<ProsodyAnnotation> AnnotationStore::all_annotations() const {
  std::lock_guard lock(mu_);
  sync();
  return annotations_;
}

std::string AnnotationStore::content_hash() const {
  std::lock_guard lock(mu_);
  sync();
  std::string blob;
  for (const auto& [id, m] : matches_) blob += match_to_json(m).dump() + "\n";
  for (const auto& a : annotations_) blob += annotation_to_json(a).dump() + "\n";
  return text::sha256_hex(blob);
}

double ProsodyCounts::proportion(ProsodyLabel l) const {
  const auto n = annotated();
  if (n == 0) return 0.0;
  const auto c = l == ProsodyLabel::positive ? positive : l == ProsodyLabel::neutral ? neutral : negative;
  return static_cast<double>(c) / static_cast<double>(n);
}

ProsodySummary prosody_summary(const AnnotationStore& store, std::string_view scope, ProsodyScope kind) {
  ProsodySummary out;
  out.scope = std::string(scope);
  std::set<std::string> in_scope;
  for (const auto& m : store.matches()) {
    const auto& key = kind == ProsodyScope::pattern ? m.pattern_name : m.node;
    if (key == scope) in_scope.insert(m.id);
  }
  out.total_matches = in_scope.size();
  // latest label per (annotator, match); history order is append order
  std::map<std::string, std::map<std::string, ProsodyLabel>> latest;
  for (const auto& a : store.all_annotations()) {
    if (in_scope.count(a.match_id)) latest[a.annotator][a.match_id] = a.label;
  }
  std::set<std::string> labelled;
  for (const auto& [annotator, labels] : latest) {
    ProsodyCounts c;
    for (const auto& [id, label] : labels) {
      labelled.insert(id);
      if (label == ProsodyLabel::positive) ++c.positive;
      else if (label == ProsodyLabel::neutral) ++c.neutral;
      else ++c.negative;
    }
    c.unannotated = out.total_matches - labels.size();
    out.by_annotator[annotator] = c;
  }
  out.unannotated = out.total_matches - labelled.size();
  return out;
}

}  // namespace corpuslens::phrase

#include "corpuslens/project.hpp"

#include <algorithm>
#include <unordered_map>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"

namespace corpuslens::cli {

namespace fs = std::filesystem;

std::shared_ptr<llm::LlmClient> make_client(const LlmConfig& config) {
  std::shared_ptr<llm::LlmClient> client;
  if (config.provider == "http") client = std::make_shared<llm::HttpLlmClient>(config.http);
  else client = std::make_shared<llm::MockLlmClient>(llm::MockLlmClient::Responder{}, config.http.model);
  if (config.cache_dir) client = std::make_shared<llm::CachingClient>(client, *config.cache_dir);
  return client;
}

Project::Project(ProjectConfig config, std::shared_ptr<llm::LlmClient> client)
    : config_(std::move(config)), workspace_(config_.workspace), client_(std::move(client)) {
  if (!client_) client_ = make_client(config_.llm);
}

namespace {

std::string name_for(std::string_view base, Lang lang) { return std::string(base) + "." + std::string(lang_name(lang)); }

template <typename T>
json paginate(const std::vector<T>& items, std::size_t offset, std::optional<std::size_t> limit,
              const std::function<json(const T&)>& fn) {
  json arr = json::array();
  for (std::size_t i = offset; i < items.size(); ++i) {
    if (limit && arr.size() >= *limit) break;
    arr.push_back(fn(items[i]));
  }
  return arr;
}

lda::LdaConfig with_iterations(lda::LdaConfig cfg, std::optional<std::size_t> iterations) {
  if (!iterations) return cfg;
  cfg.iterations = *iterations;
  if (cfg.burn_in >= cfg.iterations) cfg.burn_in = cfg.iterations / 5;
  return cfg;
}

std::vector<llm::TopicCard> cards_from_topics(const std::vector<lda::TopicKeywords>& topics) {
  std::vector<llm::TopicCard> out;
  for (const auto& t : topics) {
    llm::TopicCard c;
    c.topic_id = t.topic_id;
    for (const auto& kw : t.items) c.keywords.push_back({kw.word, kw.weight});
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<llm::TopicCard> cards_from_analysis(const lda::AnalysisTopicSet& set) {
  std::vector<llm::TopicCard> out;
  for (const auto& t : set.topics) {
    llm::TopicCard c;
    c.topic_id = t.id;
    for (const auto& kw : t.keywords) c.keywords.push_back({kw.word, kw.weight});
    out.push_back(std::move(c));
  }
  return out;
}

json match_json(const phrase::PatternMatch& m, const phrase::SlotPattern& pat, const phrase::PositionIndex& idx) {
  json fillers = json::array();
  for (const auto& [slot, span] : m.fillers) {
    fillers.push_back({{"slot", slot}, {"label", pat.slots[slot].text}, {"text", phrase::filler_text(m, slot, idx)}});
  }
  return {{"id", m.id()},
          {"doc_id", m.doc_id},
          {"span", {m.span.begin, m.span.end}},
          {"node_pos", m.node_pos},
          {"context", phrase::render_match_context(idx, m)},
          {"fillers", std::move(fillers)}};
}

std::size_t default_slot(const phrase::SlotPattern& pat) {
  for (std::size_t i = 0; i < pat.slots.size(); ++i) {
    const auto k = pat.slots[i].kind;
    if (k != phrase::Slot::Kind::node && k != phrase::Slot::Kind::literal) return i;
  }
  return pat.node_slot;
}

json annotation_json(const phrase::ProsodyAnnotation& a) {
  return {{"match_id", a.match_id}, {"label", phrase::prosody_name(a.label)}, {"annotator", a.annotator},
          {"note", a.note},         {"timestamp", a.timestamp},               {"revision", a.revision}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Corpus steps

json Project::ingest(std::optional<Lang> lang_opt, bool llm_clean, const std::string& command) {
  const auto& lc = config_.language(lang_opt);
  const auto lang = lc.lang;
  const auto raw = load_corpus(lc.corpus, lc.format);
  const auto rules = lc.boilerplate ? CleaningRules::with_boilerplate_file(*lc.boilerplate) : CleaningRules::defaults();

  SegmenterRegistry segmenters;
  if (lang == Lang::en) segmenters.add(Lang::en, std::make_shared<EnglishSegmenter>());
  if (lang == Lang::zh && lc.segmenter_lexicon) {
    segmenters.add(Lang::zh, std::make_shared<LongestMatchSegmenter>(text::read_word_list(*lc.segmenter_lexicon)));
  }
  std::set<std::string> stoplist;
  if (lc.stoplist) {
    for (auto& w : text::read_word_list(*lc.stoplist)) stoplist.insert(lang == Lang::en ? text::ascii_lower(w) : w);
  }
  LemmaLexicon lemmas;
  if (lc.lemmas) {
    for (auto& [k, v] : text::read_pair_list(*lc.lemmas)) lemmas[k] = v;
  }
  TaggerRegistry taggers;
  if (lc.tagger) taggers.add(lang, std::make_shared<LexiconTagger>(LexiconTagger::from_file(*lc.tagger, lang == Lang::en)));

  const auto clean_set = instructions(llm::InstructionId::clean);
  Corpus cleaned;
  std::vector<TokenizedDocument> tokens;
  std::size_t other_lang = 0, emptied = 0;
  for (const auto& doc : raw) {
    if (doc.lang != lang) {
      ++other_lang;
      continue;
    }
    Document d;
    try {
      if (llm_clean) {
        std::lock_guard lock(llm_mu_);
        d = llm::assist_clean(*client_, exchange_log(lang), doc, clean_set, rules);
      }
      d = clean_document(llm_clean ? d : doc, rules);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyAfterCleaning) throw;
      ++emptied;
      continue;
    }
    auto t = tokenize(d, segmenters);
    if (!stoplist.empty()) t = remove_stopwords(t, stoplist);
    if (!lemmas.empty()) t = lemmatize(t, lemmas);
    if (lc.tagger) t = pos_tag(t, taggers);
    cleaned.push_back(std::move(d));
    tokens.push_back(std::move(t));
  }
  if (cleaned.empty()) throw Error(ErrorCode::EmptyCorpus, "no " + std::string(lang_name(lang)) + " documents left after cleaning");

  std::map<std::string, std::string> inputs{{"source:" + lc.corpus.filename().string(), text::sha256_hex(text::read_file(lc.corpus))}};
  for (const auto& [opt, key] : {std::pair{&lc.stoplist, "stoplist"}, {&lc.lemmas, "lemmas"}, {&lc.tagger, "tagger"},
                                 {&lc.segmenter_lexicon, "segmenter_lexicon"}, {&lc.boilerplate, "boilerplate"}}) {
    if (*opt) inputs[std::string("source:") + key] = text::sha256_hex(text::read_file(**opt));
  }
  const auto corpus_rec = workspace_.put(name_for("corpus", lang), "jsonl", write_corpus_jsonl(cleaned), command, inputs);
  const auto tokens_rec = workspace_.put(name_for("tokens", lang), "jsonl", write_tokenized_jsonl(tokens), command, inputs);
  std::size_t n_tokens = 0;
  for (const auto& t : tokens) n_tokens += t.tokens.size();
  return {{"lang", lang_name(lang)},       {"documents", cleaned.size()},  {"dropped_empty", emptied},
          {"skipped_other_lang", other_lang}, {"tokens", n_tokens},       {"corpus", corpus_rec.path},
          {"tokenized", tokens_rec.path}};
}

json Project::filter(std::optional<Lang> lang_opt, std::optional<std::size_t> min_count,
                     std::optional<std::vector<std::string>> keywords, const std::string& command) {
  const auto& lc = config_.language(lang_opt);
  const auto lang = lc.lang;
  const auto kws = keywords ? *keywords : lc.keywords;
  const auto threshold = min_count.value_or(lc.min_keyword_hits);
  const auto corpus_name = name_for("corpus", lang), tokens_name = name_for("tokens", lang);
  const auto corpus = parse_corpus_jsonl(workspace_.read(corpus_name));
  const auto tokens = parse_tokenized_jsonl(workspace_.read(tokens_name));
  const auto kept = filter_by_keywords(corpus, kws, threshold);
  if (kept.empty()) throw Error(ErrorCode::EmptyCorpus, "no document has " + std::to_string(threshold) + " keyword hits");
  std::set<std::string> ids;
  for (const auto& d : kept) ids.insert(d.id);
  std::vector<TokenizedDocument> kept_tokens;
  for (const auto& t : tokens) {
    if (ids.count(t.doc_id)) kept_tokens.push_back(t);
  }
  std::string kw_blob;
  for (const auto& k : kws) kw_blob += k + "\n";
  const std::map<std::string, std::string> inputs{{corpus_name, workspace_.hash(corpus_name)},
                                                  {tokens_name, workspace_.hash(tokens_name)},
                                                  {"param:keywords", text::sha256_hex(kw_blob)},
                                                  {"param:min_count", std::to_string(threshold)}};
  workspace_.put(name_for("filtered-corpus", lang), "jsonl", write_corpus_jsonl(kept), command, inputs);
  workspace_.put(name_for("filtered-tokens", lang), "jsonl", write_tokenized_jsonl(kept_tokens), command, inputs);
  return {{"lang", lang_name(lang)}, {"documents_in", corpus.size()}, {"documents_kept", kept.size()},
          {"min_count", threshold},  {"keywords", kws}};
}

std::vector<TokenizedDocument> Project::working_tokens(Lang lang, std::string* artifact_name) {
  const auto tokens_name = name_for("tokens", lang);
  const auto filtered_name = name_for("filtered-tokens", lang);
  std::string chosen = tokens_name;
  if (const auto rec = workspace_.record(filtered_name)) {
    const auto it = rec->inputs.find(tokens_name);
    if (it == rec->inputs.end() || it->second != workspace_.hash(tokens_name)) {
      throw Error(ErrorCode::MissingArtifact, "filtered corpus is out of date with the ingested corpus; run filter again");
    }
    chosen = filtered_name;
  }
  if (artifact_name) *artifact_name = chosen;
  return parse_tokenized_jsonl(workspace_.read(chosen));
}

BagOfWords Project::bag_of_words(Lang lang, std::shared_ptr<const Vocabulary>* vocab, std::string* tokens_name) {
  auto docs = working_tokens(lang, tokens_name);
  if (config_.lowercase_terms) {
    for (auto& d : docs) {
      for (auto& t : d.tokens) {
        t.surface = text::ascii_lower(t.surface);
        t.lemma = text::ascii_lower(t.lemma);
      }
    }
  }
  auto v = std::make_shared<const Vocabulary>(build_vocabulary(docs, config_.min_df, config_.term_form));
  auto bow = to_bag_of_words(docs, *v, config_.term_form);
  *vocab = std::move(v);
  return bow;
}

// ---------------------------------------------------------------------------
// Topic modelling

json Project::train(std::optional<Lang> lang_opt, const TrainOptions& options, const std::string& command) {
  const auto lang = resolve_lang(lang_opt);
  std::shared_ptr<const Vocabulary> vocab;
  std::string tokens_name;
  const auto bow = bag_of_words(lang, &vocab, &tokens_name);
  auto cfg = with_iterations(config_.lda, options.iterations);
  if (options.num_topics) {
    cfg.num_topics = *options.num_topics;
  }
  if (options.seed) cfg.seed = *options.seed;
  const auto model = lda::train_lda(bow, vocab, cfg);
  std::vector<lda::TopicKeywords> topics;
  const auto k = std::min(config_.top_keywords, vocab->size());
  for (std::size_t t = 0; t < model.num_topics(); ++t) topics.push_back(lda::top_keywords(model, t, k));
  const std::map<std::string, std::string> inputs{{tokens_name, workspace_.hash(tokens_name)},
                                                  {"param:num_topics", std::to_string(cfg.num_topics)},
                                                  {"param:iterations", std::to_string(cfg.iterations)},
                                                  {"param:seed", std::to_string(cfg.seed)}};
  const auto model_rec = workspace_.put(name_for("model", lang), "json", lda::model_to_json(model), command, inputs);
  const auto topics_rec = workspace_.put(name_for("topics", lang), "json", lda::topics_to_json(topics), command,
                                         {{name_for("model", lang), model_rec.sha256}});
  return {{"lang", lang_name(lang)},  {"num_topics", cfg.num_topics}, {"documents", bow.docs.size()},
          {"tokens", bow.total_tokens()}, {"vocabulary", vocab->size()}, {"iterations", cfg.iterations},
          {"seed", cfg.seed},           {"model", model_rec.path},       {"topics", topics_rec.path}};
}

json Project::sweep(std::optional<Lang> lang_opt, const SweepOptions& options, const std::string& command) {
  const auto lang = resolve_lang(lang_opt);
  const auto k_min = options.k_min.value_or(config_.sweep.k_min);
  const auto k_max = options.k_max.value_or(config_.sweep.k_max);
  if (k_min < 2 || k_max > 64 || k_min > k_max) {
    throw Error(ErrorCode::InvalidConfig, "sweep range must satisfy 2 <= kmin <= kmax <= 64");
  }
  const auto metric = options.metric.value_or(config_.sweep.metric);
  const auto top_n = options.top_n.value_or(config_.sweep.top_n);
  std::shared_ptr<const Vocabulary> vocab;
  std::string tokens_name;
  const auto bow = bag_of_words(lang, &vocab, &tokens_name);
  auto base = with_iterations(config_.lda, options.iterations ? options.iterations : config_.sweep.iterations);
  if (options.seed) base.seed = *options.seed;
  const auto curve = lda::sweep_topic_count(bow, vocab, k_min, k_max, base, top_n, metric, options.threads);
  const std::map<std::string, std::string> inputs{{tokens_name, workspace_.hash(tokens_name)},
                                                  {"param:range", std::to_string(k_min) + "-" + std::to_string(k_max)},
                                                  {"param:metric", std::string(lda::metric_name(metric))},
                                                  {"param:top_n", std::to_string(top_n)},
                                                  {"param:iterations", std::to_string(base.iterations)},
                                                  {"param:seed", std::to_string(base.seed)}};
  const auto rec = workspace_.put(name_for("coherence", lang), "csv", curve.to_csv(), command, inputs);
  json points = json::array();
  for (const auto& p : curve.points) points.push_back({{"k", p.k}, {"score", p.score}});
  return {{"lang", lang_name(lang)}, {"metric", lda::metric_name(metric)}, {"best_k", curve.best_k},
          {"points", points},        {"csv", rec.path}};
}

json Project::merge(std::optional<Lang> lang_opt, const std::string& mapping, std::size_t top_k,
                    const std::string& command) {
  const auto lang = resolve_lang(lang_opt);
  const auto topics_name = name_for("topics", lang);
  const auto raw = lda::topics_from_json(workspace_.read(topics_name));
  const auto spec = lda::parse_merge_spec(mapping);
  const auto set = lda::merge_topics(raw, spec, top_k);
  const auto rec = workspace_.put(name_for("analysis", lang), "json", lda::analysis_to_json(set), command,
                                  {{topics_name, workspace_.hash(topics_name)},
                                   {"param:mapping", text::sha256_hex(mapping)},
                                   {"param:top_k", std::to_string(top_k)}});
  {
    std::lock_guard lock(cards_mu_);
    load_cards(lang);  // rebuilds the cards for the new topic set
  }
  json log = json::object();
  for (const auto& [r, a] : set.merge_log) log[std::to_string(r)] = a ? json(*a) : json("dropped");
  return {{"lang", lang_name(lang)}, {"raw_topics", raw.size()}, {"analysis_topics", set.topics.size()},
          {"merge_log", log},        {"analysis", rec.path}};
}

std::optional<lda::AnalysisTopicSet> Project::current_analysis(Lang lang) {
  const auto rec = workspace_.record(name_for("analysis", lang));
  if (!rec) return std::nullopt;
  const auto topics_name = name_for("topics", lang);
  const auto it = rec->inputs.find(topics_name);
  if (!workspace_.has(topics_name) || it == rec->inputs.end() || it->second != workspace_.hash(topics_name)) {
    return std::nullopt;  // merge of an older model
  }
  return lda::analysis_from_json(workspace_.read(name_for("analysis", lang)));
}

json Project::raw_topics(std::optional<Lang> lang_opt, std::size_t k) {
  const auto lang = resolve_lang(lang_opt);
  const auto model = lda::model_from_json(workspace_.read(name_for("model", lang)));
  json arr = json::array();
  for (std::size_t t = 0; t < model.num_topics(); ++t) {
    const auto kw = lda::top_keywords(model, t, std::min(k, model.vocab_size()));
    json items = json::array();
    for (const auto& i : kw.items) items.push_back({{"word", i.word}, {"weight", i.weight}});
    arr.push_back({{"topic_id", t}, {"keywords", items}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Topic cards

Project::CardStore Project::load_cards(Lang lang) {
  const auto topics_name = name_for("topics", lang);
  if (!workspace_.has(topics_name)) throw Error(ErrorCode::MissingArtifact, "no trained model; run train first");
  const auto analysis = current_analysis(lang);
  const auto source = analysis ? workspace_.hash(name_for("analysis", lang)) : workspace_.hash(topics_name);

  CardStore stored;
  const auto path = workspace_.stores_dir() / ("cards." + lang_suffix(lang) + ".json");
  if (fs::exists(path)) {
    try {
      const auto j = json::parse(text::read_file(path));
      stored.source = j.at("source").get<std::string>();
      stored.cards = llm::cards_from_json(j.at("cards").dump());
      const auto revisions = j.value("revisions", json::object());
      for (const auto& [k, v] : revisions.items()) stored.revisions[std::stoul(k)] = v.get<std::size_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptWorkspace, "cards store is unreadable: " + std::string(e.what()));
    }
  }
  if (stored.source == source) return stored;

  // New topic set: keep analyst and LLM work for topics whose keywords did not change.
  CardStore fresh;
  fresh.source = source;
  fresh.cards = analysis ? cards_from_analysis(*analysis) : cards_from_topics(lda::topics_from_json(workspace_.read(topics_name)));
  for (auto& c : fresh.cards) {
    for (const auto& old : stored.cards) {
      if (old.topic_id == c.topic_id && old.keywords == c.keywords) {
        c.senses = old.senses;
        c.description = old.description;
        c.implication = old.implication;
        if (stored.revisions.count(c.topic_id)) fresh.revisions[c.topic_id] = stored.revisions.at(c.topic_id);
      }
    }
  }
  save_cards(lang, fresh);
  return fresh;
}

void Project::save_cards(Lang lang, const CardStore& store) {
  json revisions = json::object();
  for (const auto& [k, v] : store.revisions) revisions[std::to_string(k)] = v;
  const json j = {{"source", store.source}, {"revisions", revisions}, {"cards", json::parse(llm::cards_to_json(store.cards))}};
  const auto path = workspace_.stores_dir() / ("cards." + lang_suffix(lang) + ".json");
  const auto tmp = fs::path(path.string() + ".tmp");
  text::write_file(tmp, j.dump(2) + "\n");
  fs::rename(tmp, path);
}

llm::TopicCard& Project::find_card(CardStore& store, std::size_t id) {
  for (auto& c : store.cards) {
    if (c.topic_id == id) return c;
  }
  throw Error(ErrorCode::TopicOutOfRange, "no topic " + std::to_string(id));
}

json Project::card_json(Lang lang, const llm::TopicCard& card, const CardStore& store) {
  auto j = json::parse(llm::cards_to_json({card})).at(0);
  json raws = json::array({card.topic_id});
  if (const auto a = current_analysis(lang)) {
    for (const auto& t : a->topics) {
      if (t.id == card.topic_id) raws = t.raw_topics;
    }
  }
  j["raw_topics"] = raws;
  j["revision"] = store.revisions.count(card.topic_id) ? store.revisions.at(card.topic_id) : 0;
  j["ready_to_label"] = card.description.ready();
  return j;
}

std::vector<llm::TopicCard> Project::cards(Lang lang) {
  std::lock_guard lock(cards_mu_);
  return load_cards(lang).cards;
}

json Project::topics(std::optional<Lang> lang_opt) {
  const auto lang = resolve_lang(lang_opt);
  std::lock_guard lock(cards_mu_);
  if (!workspace_.has(name_for("topics", lang))) return json::array();
  const auto store = load_cards(lang);
  json arr = json::array();
  for (const auto& c : store.cards) arr.push_back(card_json(lang, c, store));
  return arr;
}

json Project::topic(std::optional<Lang> lang_opt, std::size_t id) {
  const auto lang = resolve_lang(lang_opt);
  std::lock_guard lock(cards_mu_);
  auto store = load_cards(lang);
  return card_json(lang, find_card(store, id), store);
}

json Project::describe(std::optional<Lang> lang_opt, std::size_t id, std::optional<std::string> description) {
  const auto lang = resolve_lang(lang_opt);
  if (description && text::trim(*description).empty()) {
    throw Error(ErrorCode::InvalidConfig, "description is empty; mark the topic as skipped instead");
  }
  std::lock_guard lock(cards_mu_);
  auto store = load_cards(lang);
  auto& card = find_card(store, id);
  card.description = description ? llm::ManualDescription::provided_text(std::string(text::trim(*description)))
                                 : llm::ManualDescription::skip();
  ++store.revisions[id];
  save_cards(lang, store);
  return card_json(lang, card, store);
}

json Project::describe_from_file(std::optional<Lang> lang_opt, const fs::path& path) {
  json out = json::array();
  for (const auto& [id, desc] : text::read_pair_list(path)) {
    std::size_t topic_id = 0;
    try {
      topic_id = std::stoul(id);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, path.string() + ": '" + id + "' is not a topic id");
    }
    out.push_back(describe(lang_opt, topic_id, desc == "-" ? std::nullopt : std::optional<std::string>(desc)));
  }
  return out;
}

llm::PromptInstructionSet Project::instructions(llm::InstructionId id) const {
  switch (id) {
    case llm::InstructionId::sense:
      return config_.llm.sense_template ? llm::PromptInstructionSet::from_file(id, *config_.llm.sense_template)
                                        : llm::PromptInstructionSet::default_sense();
    case llm::InstructionId::implication:
      return config_.llm.implication_template
                 ? llm::PromptInstructionSet::from_file(id, *config_.llm.implication_template)
                 : llm::PromptInstructionSet::default_implication();
    case llm::InstructionId::clean:
      return config_.llm.clean_template ? llm::PromptInstructionSet::from_file(id, *config_.llm.clean_template)
                                        : llm::PromptInstructionSet::default_clean();
  }
  return llm::PromptInstructionSet::default_sense();
}

llm::ExchangeLog& Project::exchange_log(Lang lang) {
  std::lock_guard lock(stores_mu_);
  auto& slot = exchange_logs_[lang];
  if (!slot) slot = std::make_unique<llm::ExchangeLog>(workspace_.stores_dir() / ("exchanges." + lang_suffix(lang) + ".jsonl"));
  return *slot;
}

json Project::senses(std::optional<Lang> lang_opt, std::optional<std::size_t> topic, bool per_keyword) {
  const auto lang = resolve_lang(lang_opt);
  const auto set = instructions(llm::InstructionId::sense);
  auto& log = exchange_log(lang);
  std::lock_guard lock(cards_mu_);
  auto store = load_cards(lang);
  json out = json::array();
  for (auto& card : store.cards) {
    if (topic && card.topic_id != *topic) continue;
    {
      std::lock_guard llm_lock(llm_mu_);
      card = llm::retrieve_keyword_senses(*client_, log, card, set, {per_keyword});
    }
    save_cards(lang, store);
    out.push_back(card_json(lang, card, store));
  }
  if (topic && out.empty()) throw Error(ErrorCode::TopicOutOfRange, "no topic " + std::to_string(*topic));
  return out;
}

json Project::label(std::optional<Lang> lang_opt, std::optional<std::size_t> topic, bool per_keyword) {
  const auto lang = resolve_lang(lang_opt);
  const auto sense_set = instructions(llm::InstructionId::sense);
  const auto impl_set = instructions(llm::InstructionId::implication);
  auto& log = exchange_log(lang);
  std::lock_guard lock(cards_mu_);
  auto store = load_cards(lang);
  std::vector<llm::TopicCard*> selected;
  for (auto& card : store.cards) {
    if (!topic || card.topic_id == *topic) selected.push_back(&card);
  }
  if (topic && selected.empty()) throw Error(ErrorCode::TopicOutOfRange, "no topic " + std::to_string(*topic));
  for (auto* card : selected) {
    if (!card->description.ready()) {
      throw Error(ErrorCode::MissingDescription,
                  "topic " + std::to_string(card->topic_id) + " has no description; describe it or mark it skipped");
    }
  }
  json out = json::array();
  for (auto* card : selected) {
    {
      std::lock_guard llm_lock(llm_mu_);
      *card = llm::label_topics(*client_, log, {*card}, sense_set, impl_set, {per_keyword}).front();
    }
    save_cards(lang, store);
    out.push_back(card_json(lang, *card, store));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phraseology

std::shared_ptr<const phrase::PositionIndex> Project::index(Lang lang) {
  std::string name;
  {
    std::lock_guard lock(index_mu_);
    const auto tokens_name = workspace_.has(name_for("filtered-tokens", lang)) ? name_for("filtered-tokens", lang)
                                                                               : name_for("tokens", lang);
    if (workspace_.has(tokens_name)) {
      const auto hash = workspace_.hash(tokens_name);
      auto it = index_cache_.find(lang);
      if (it != index_cache_.end() && it->second.first == hash) return it->second.second;
    }
  }
  auto docs = working_tokens(lang, &name);
  const auto hash = workspace_.hash(name);
  auto idx = std::make_shared<const phrase::PositionIndex>(phrase::build_index(std::move(docs)));
  std::lock_guard lock(index_mu_);
  index_cache_[lang] = {hash, idx};
  return idx;
}

json Project::kwic(std::optional<Lang> lang_opt, const std::string& node, std::size_t window,
                   std::optional<std::size_t> limit, std::size_t offset) {
  const auto lang = resolve_lang(lang_opt);
  const auto idx = index(lang);
  const auto lines = phrase::kwic(*idx, node, window);
  const auto rows = paginate<phrase::ConcordanceLine>(lines, offset, limit, [&](const phrase::ConcordanceLine& l) {
    return json{{"doc_id", l.doc_id},
                {"node_begin", l.node_begin},
                {"left", phrase::join_tokens(l.left, lang)},
                {"node", l.node_surface},
                {"right", phrase::join_tokens(l.right, lang)}};
  });
  return {{"node", node}, {"window", window}, {"total", lines.size()}, {"offset", offset}, {"lines", rows}};
}

json Project::collocates(std::optional<Lang> lang_opt, const std::string& node, std::size_t window,
                         std::size_t min_freq, phrase::CollocationMeasure measure, std::size_t offset,
                         std::optional<std::size_t> limit) {
  const auto lang = resolve_lang(lang_opt);
  const auto idx = index(lang);
  const auto cs = phrase::collocates(*idx, node, window, min_freq, measure);
  const auto rows = paginate<phrase::Collocate>(cs, offset, limit, [](const phrase::Collocate& c) {
    return json{{"form", c.form}, {"stat", c.stat}, {"freq", c.freq}};
  });
  return {{"node", node},     {"window", window}, {"measure", phrase::measure_name(measure)},
          {"total", cs.size()}, {"offset", offset}, {"collocates", rows}};
}

const std::vector<phrase::SlotPattern>& Project::loaded_patterns() {
  std::lock_guard lock(stores_mu_);
  if (!patterns_) {
    if (!config_.patterns) throw Error(ErrorCode::InvalidConfig, "no pattern file configured");
    patterns_ = phrase::parse_pattern_file(text::read_file(*config_.patterns));
  }
  return *patterns_;
}

const phrase::SlotPattern& Project::find_pattern(const std::string& name) {
  for (const auto& p : loaded_patterns()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown pattern '" + name + "'");
}

json Project::patterns() {
  json arr = json::array();
  if (!config_.patterns) return arr;
  for (const auto& p : loaded_patterns()) {
    json slots = json::array();
    for (const auto& s : p.slots) slots.push_back({{"label", s.text}, {"optional", s.group >= 0}});
    arr.push_back({{"name", p.name}, {"source", p.source}, {"slots", slots}});
  }
  return arr;
}

phrase::SemanticClassScheme Project::load_scheme(const std::string& name) const {
  const auto it = config_.schemes.find(name);
  if (it == config_.schemes.end()) throw Error(ErrorCode::InvalidConfig, "unknown scheme '" + name + "'");
  return phrase::SemanticClassScheme::parse(text::read_file(it->second), name);
}

phrase::AnnotationStore& Project::annotations(Lang lang) {
  std::lock_guard lock(stores_mu_);
  auto& slot = annotation_stores_[lang];
  if (!slot) slot = std::make_unique<phrase::AnnotationStore>(workspace_.stores_dir() / ("annotations." + lang_suffix(lang)));
  return *slot;
}

std::vector<PatternQuery> Project::recorded_queries(Lang lang) {
  std::vector<PatternQuery> out;
  const auto path = workspace_.stores_dir() / ("analyses." + lang_suffix(lang) + ".json");
  if (!fs::exists(path)) return out;
  try {
    for (const auto& j : json::parse(text::read_file(path))) {
      PatternQuery q{j.at("pattern").get<std::string>(), j.at("node").get<std::string>(), std::nullopt, std::nullopt};
      if (j.contains("scheme") && !j.at("scheme").is_null()) q.scheme = j.at("scheme").get<std::string>();
      if (j.contains("slot") && !j.at("slot").is_null()) q.slot = j.at("slot").get<std::string>();
      out.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptWorkspace, "analyses store is unreadable: " + std::string(e.what()));
  }
  return out;
}

void Project::record_query(Lang lang, const PatternQuery& q) {
  std::lock_guard lock(cards_mu_);
  auto all = recorded_queries(lang);
  for (const auto& r : all) {
    if (r.name == q.name && r.node == q.node && r.scheme == q.scheme && r.slot == q.slot) return;
  }
  all.push_back(q);
  json arr = json::array();
  for (const auto& r : all) {
    arr.push_back({{"pattern", r.name},
                   {"node", r.node},
                   {"scheme", r.scheme ? json(*r.scheme) : json(nullptr)},
                   {"slot", r.slot ? json(*r.slot) : json(nullptr)}});
  }
  const auto path = workspace_.stores_dir() / ("analyses." + lang_suffix(lang) + ".json");
  text::write_file(path, arr.dump(2) + "\n");
}

json Project::pattern_matches(std::optional<Lang> lang_opt, const PatternQuery& q, bool record, std::size_t offset,
                              std::optional<std::size_t> limit) {
  const auto lang = resolve_lang(lang_opt);
  const auto pat = find_pattern(q.name);
  const auto idx = index(lang);
  const auto matches = phrase::match_pattern(*idx, pat, q.node);
  std::optional<std::size_t> slot;
  if (q.slot) {
    slot = phrase::find_slot(pat, *q.slot);
    if (!slot) throw Error(ErrorCode::SlotOutOfRange, "pattern '" + pat.name + "' has no slot '" + *q.slot + "'");
  }
  annotations(lang).register_matches(matches);
  if (record) record_query(lang, q);
  json out = {{"pattern", pat.name}, {"source", pat.source}, {"node", q.node},
              {"total", matches.size()}, {"offset", offset}};
  out["matches"] = paginate<phrase::PatternMatch>(matches, offset, limit, [&](const phrase::PatternMatch& m) {
    return match_json(m, pat, *idx);
  });
  if (q.scheme) {
    const auto scheme = load_scheme(*q.scheme);
    const auto s = slot.value_or(default_slot(pat));
    const auto cls = phrase::classify_slot_fillers(matches, pat, s, scheme, *idx);
    json groups = json::array();
    for (const auto& g : cls.groups) groups.push_back({{"label", g.label}, {"count", g.count}, {"fillers", g.fillers}});
    out["classification"] = {{"scheme", *q.scheme}, {"slot", s}, {"slot_label", pat.slots[s].text}, {"groups", groups}};
  }
  return out;
}

json Project::annotate(std::optional<Lang> lang_opt, const std::string& match_id, phrase::ProsodyLabel label,
                       const std::string& annotator, const std::string& note) {
  const auto lang = resolve_lang(lang_opt);
  auto& store = annotations(lang);
  const auto a = store.annotate(match_id, label, annotator, note);
  auto j = annotation_json(a);
  j["history"] = store.history(match_id, annotator).size();
  return j;
}

json Project::prosody(std::optional<Lang> lang_opt, const std::string& scope, phrase::ProsodyScope kind) {
  const auto lang = resolve_lang(lang_opt);
  const auto s = phrase::prosody_summary(annotations(lang), scope, kind);
  json by = json::object();
  for (const auto& [who, c] : s.by_annotator) {
    by[who] = {{"positive", c.positive},
               {"neutral", c.neutral},
               {"negative", c.negative},
               {"unannotated", c.unannotated},
               {"proportions",
                {{"positive", c.proportion(phrase::ProsodyLabel::positive)},
                 {"neutral", c.proportion(phrase::ProsodyLabel::neutral)},
                 {"negative", c.proportion(phrase::ProsodyLabel::negative)}}}};
  }
  return {{"scope", s.scope}, {"total_matches", s.total_matches}, {"unannotated", s.unannotated}, {"by_annotator", by}};
}

// ---------------------------------------------------------------------------
// Report

std::string Project::report(std::optional<Lang> lang_opt, phrase::ReportFormat format,
                            const std::set<phrase::ReportSection>& requested, const std::string& command) {
  const auto lang = resolve_lang(lang_opt);
  phrase::ReportInputs in;
  in.title = "Corpus analysis report (" + std::string(lang_name(lang)) + ")";
  std::map<std::string, std::string> inputs;
  if (workspace_.has(name_for("topics", lang))) {
    in.cards = cards(lang);
    in.analysis = current_analysis(lang);
    inputs[name_for("topics", lang)] = workspace_.hash(name_for("topics", lang));
    if (in.analysis) inputs[name_for("analysis", lang)] = workspace_.hash(name_for("analysis", lang));
    const auto cards_path = workspace_.stores_dir() / ("cards." + lang_suffix(lang) + ".json");
    inputs["store:cards"] = text::sha256_hex(text::read_file(cards_path));
  }
  const auto queries = recorded_queries(lang);
  std::set<std::string> pattern_names;
  if (!queries.empty()) {
    std::string tokens_name;
    working_tokens(lang, &tokens_name);
    inputs[tokens_name] = workspace_.hash(tokens_name);
    const auto idx = index(lang);
    for (const auto& q : queries) {
      const auto pat = find_pattern(q.name);
      const auto matches = phrase::match_pattern(*idx, pat, q.node);
      std::size_t s = default_slot(pat);
      if (q.slot) {
        const auto found = phrase::find_slot(pat, *q.slot);
        if (!found) throw Error(ErrorCode::SlotOutOfRange, "pattern '" + pat.name + "' has no slot '" + *q.slot + "'");
        s = *found;
      }
      const auto scheme = q.scheme ? load_scheme(*q.scheme) : phrase::SemanticClassScheme{};
      const auto cls = phrase::classify_slot_fillers(matches, pat, s, scheme, *idx);
      in.patterns.push_back(phrase::make_pattern_table(pat, q.node, q.scheme.value_or(""), matches, cls, *idx));
      pattern_names.insert(pat.name);
    }
    auto& store = annotations(lang);
    if (!store.all_annotations().empty()) {
      for (const auto& name : pattern_names) in.prosody.push_back(phrase::prosody_summary(store, name));
      inputs["store:annotations"] = store.content_hash();
    }
  }
  auto sections = requested;
  if (sections.empty()) {
    if (!in.cards.empty()) sections.insert(phrase::ReportSection::topics);
    if (!in.patterns.empty()) sections.insert(phrase::ReportSection::patterns);
    if (!in.prosody.empty()) sections.insert(phrase::ReportSection::prosody);
  }
  auto doc = phrase::render_report(in, format, sections);
  std::string names;
  for (auto s : sections) names += std::string(names.empty() ? "" : ",") + std::string(phrase::section_name(s));
  inputs["param:sections"] = names;
  workspace_.put(name_for("report", lang), format == phrase::ReportFormat::csv ? "csv" : "md", doc, command, inputs);
  return doc;
}

}  // namespace corpuslens::cli

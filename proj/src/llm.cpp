#include "corpuslens/llm.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace corpuslens::llm {

using json = nlohmann::json;

std::string_view instruction_name(InstructionId id) {
  switch (id) {
    case InstructionId::sense: return "sense";
    case InstructionId::implication: return "implication";
    case InstructionId::clean: return "clean";
  }
  return "sense";
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::sense: return "sense";
    case Stage::implication: return "implication";
    case Stage::clean: return "clean";
  }
  return "sense";
}

namespace {

// Keep in sync with data/prompts/*.txt (checked by the unit tests).
constexpr std::string_view kSenseTemplate =
    R"(You are assisting a media discourse analysis of news reports.
Topic {{topic_id}} of an LDA topic model is represented by its top {{k}} keywords:
{{keywords}}

For each keyword, give its detailed meaning in the context of news reporting on this topic.
Answer with exactly {{k}} lines numbered to match the list above, each of the form "<number>. <meaning>", and nothing else.
)";

constexpr std::string_view kImplicationTemplate =
    R"(You are assisting a media discourse analysis of news reports.
Topic {{topic_id}} is represented by {{k}} keywords, each with its topic weight and detailed meaning:
{{keyword_block}}

Analyst description of the probable general content of the topic:
{{description}}

Using the keywords, their weights, their meanings and the analyst description, explain in one paragraph the media discourse implications of this topic.
)";

constexpr std::string_view kCleanTemplate =
    R"(Remove irrelevant text (advertisements, navigation, bylines, copyright notices) and garbled characters from the news report below. Return only the cleaned report body, with no commentary.

Title: {{title}}

{{body}}
)";

void warn(const std::string& msg) { std::clog << "[corpuslens] warning: " << msg << '\n'; }

}  // namespace

PromptInstructionSet PromptInstructionSet::default_sense() {
  return {InstructionId::sense, std::string(kSenseTemplate), {}};
}
PromptInstructionSet PromptInstructionSet::default_implication() {
  return {InstructionId::implication, std::string(kImplicationTemplate), {}};
}
PromptInstructionSet PromptInstructionSet::default_clean() {
  return {InstructionId::clean, std::string(kCleanTemplate), {}};
}

PromptInstructionSet PromptInstructionSet::from_file(InstructionId id, const std::filesystem::path& path,
                                                     DecodingParams params) {
  return {id, text::read_file(path), params};
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::TemplateError, "unterminated placeholder at offset " + std::to_string(open));
    }
    const auto name = std::string(text::trim(tmpl.substr(open + 2, close - open - 2)));
    auto it = values.find(name);
    if (it == values.end()) throw Error(ErrorCode::TemplateError, "unresolved placeholder '{{" + name + "}}'");
    out.append(it->second);
    i = close + 2;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cards

namespace {

std::string_view description_state_name(ManualDescription::State s) {
  switch (s) {
    case ManualDescription::State::missing: return "missing";
    case ManualDescription::State::skipped: return "skipped";
    case ManualDescription::State::provided: return "provided";
  }
  return "missing";
}

}  // namespace

std::string cards_to_json(const std::vector<TopicCard>& cards) {
  json arr = json::array();
  for (const auto& c : cards) {
    json kws = json::array();
    for (const auto& k : c.keywords) kws.push_back({{"word", k.word}, {"weight", k.weight}});
    arr.push_back({{"topic_id", c.topic_id},
                   {"k", c.k()},
                   {"keywords", kws},
                   {"senses", c.senses},
                   {"description", {{"state", description_state_name(c.description.state)}, {"text", c.description.text}}},
                   {"implication", c.implication}});
  }
  return arr.dump(2);
}

std::vector<TopicCard> cards_from_json(const std::string& content) {
  try {
    std::vector<TopicCard> cards;
    for (const auto& j : json::parse(content)) {
      TopicCard c;
      c.topic_id = j.at("topic_id").get<std::size_t>();
      for (const auto& k : j.at("keywords")) c.keywords.push_back({k.at("word").get<std::string>(), k.at("weight").get<double>()});
      c.senses = j.value("senses", std::vector<std::string>{});
      const auto& d = j.at("description");
      const auto state = d.at("state").get<std::string>();
      c.description.state = state == "provided"  ? ManualDescription::State::provided
                            : state == "skipped" ? ManualDescription::State::skipped
                                                 : ManualDescription::State::missing;
      c.description.text = d.value("text", "");
      c.implication = j.value("implication", "");
      cards.push_back(std::move(c));
    }
    return cards;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cards file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Clients

std::string ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}}.dump();
}

HttpLlmClient::HttpLlmClient(HttpClientSettings settings) : settings_(std::move(settings)) {
  if (settings_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "LLM endpoint is empty");
}

std::string HttpLlmClient::complete(const ChatRequest& request) {
  const auto scheme_end = settings_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "LLM endpoint needs a scheme");
  const auto path_start = settings_.endpoint.find('/', scheme_end + 3);
  const auto base = settings_.endpoint.substr(0, path_start);
  const auto path = path_start == std::string::npos ? std::string("/") : settings_.endpoint.substr(path_start);

  httplib::Client cli(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(settings_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(settings_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!settings_.auth_env.empty()) {
    if (const char* token = std::getenv(settings_.auth_env.c_str()); token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const auto body = request.to_json();
  std::string last_error;
  for (int attempt = 0; attempt <= settings_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(settings_.retry_backoff * attempt);
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::LlmUnavailable, "HTTP " + std::to_string(res->status) + " from LLM endpoint");
    }
    json j;
    try {
      j = json::parse(res->body);
    } catch (const json::exception&) {
      throw Error(ErrorCode::MalformedResponse, "LLM endpoint returned non-JSON body");
    }
    if (j.contains("content") && j["content"].is_string()) return j["content"].get<std::string>();
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::MalformedResponse, "LLM response has no content field");
    }
  }
  throw Error(ErrorCode::LlmUnavailable,
              "no response after " + std::to_string(settings_.retries + 1) + " attempts (" + last_error + ")");
}

CachingClient::CachingClient(std::shared_ptr<LlmClient> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
  std::filesystem::create_directories(dir_);
}

std::string CachingClient::cache_key(const ChatRequest& request) { return text::sha256_hex(request.to_json()); }

std::string CachingClient::complete(const ChatRequest& request) {
  const auto key = cache_key(request);
  const auto file = dir_ / (key + ".json");
  {
    std::lock_guard lock(mu_);
    if (std::filesystem::exists(file)) {
      try {
        const auto j = json::parse(text::read_file(file));
        ++hits_;
        return j.at("response").get<std::string>();
      } catch (const json::exception&) {
        warn("ignoring unreadable cache entry " + file.string());
      }
    }
    ++misses_;
  }
  auto response = inner_->complete(request);
  std::lock_guard lock(mu_);
  const auto tmp = dir_ / (key + ".tmp");
  text::write_file(tmp, json{{"request", json::parse(request.to_json())}, {"response", response}}.dump(2));
  std::filesystem::rename(tmp, file);
  return response;
}

MockLlmClient::MockLlmClient(Responder responder, std::string model)
    : responder_(std::move(responder)), model_(std::move(model)) {}

std::string MockLlmClient::complete(const ChatRequest& request) {
  ++calls_;
  if (responder_) return responder_(request);
  if (request.purpose == "sense") {
    std::string out;
    std::size_t n = 0;
    std::istringstream in(request.context.count("keywords") ? request.context.at("keywords") : "");
    std::string line;
    while (std::getline(in, line)) {
      const auto dot = line.find(". ");
      if (dot == std::string::npos) continue;
      const auto word = line.substr(dot + 2);
      out += std::to_string(++n) + ". " + "the sense of \"" + word + "\" in this topic\n";
    }
    return out;
  }
  if (request.purpose == "clean" && request.context.count("body")) return request.context.at("body");
  const auto prompt = request.messages.empty() ? std::string() : request.messages.back().content;
  return "Mock implication " + text::sha256_hex(prompt).substr(0, 12) + ": the topic frames its keywords as a coherent news narrative.";
}

// ---------------------------------------------------------------------------
// Exchange log

ExchangeLog::ExchangeLog(std::optional<std::filesystem::path> path, Clock clock)
    : path_(std::move(path)), clock_(std::move(clock)) {
  if (path_ && path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
}

std::string ExchangeLog::now() const {
  return clock_ ? clock_() : text::utc_now_iso();
}

std::string ExchangeLog::to_jsonl(const ExchangeRecord& r) {
  json j = {{"stage", stage_name(r.stage)}, {"prompt", r.prompt},       {"response", r.response},
            {"model", r.model_name},        {"timestamp", r.timestamp}, {"status", r.status}};
  if (r.topic_id) j["topic_id"] = *r.topic_id;
  if (!r.diff.empty()) j["diff"] = r.diff;
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

void ExchangeLog::append(ExchangeRecord record) {
  if (record.timestamp.empty()) record.timestamp = now();
  std::lock_guard lock(mu_);
  if (path_) {
    // one write per record keeps lines whole under concurrent appenders
    const auto line = to_jsonl(record);
    std::ofstream out(*path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path_->string());
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  records_.push_back(std::move(record));
}

std::vector<ExchangeRecord> ExchangeLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t ExchangeLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::size_t ExchangeLog::ok_count() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& r : records_) n += r.status == "ok" ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------
// Stage 1: keyword senses

namespace {

std::string enumerate_keywords(const std::vector<Keyword>& keywords) {
  std::string out;
  for (std::size_t j = 0; j < keywords.size(); ++j) {
    if (j > 0) out.push_back('\n');
    out += std::to_string(j + 1) + ". " + keywords[j].word;
  }
  return out;
}

ChatRequest make_request(const LlmClient& client, const PromptInstructionSet& instructions, std::string prompt,
                         std::string purpose, std::map<std::string, std::string> context) {
  ChatRequest req;
  req.model = client.model_name();
  req.messages.push_back({"user", std::move(prompt)});
  req.temperature = instructions.params.temperature;
  req.max_tokens = instructions.params.max_tokens;
  req.purpose = std::move(purpose);
  req.context = std::move(context);
  return req;
}

std::string sense_prompt_for(const TopicCard& card, const std::vector<Keyword>& keywords,
                             const PromptInstructionSet& instructions) {
  if (keywords.empty()) {
    throw Error(ErrorCode::TemplateError, "topic " + std::to_string(card.topic_id) + " has no keywords");
  }
  return render_template(instructions.template_text, {{"topic_id", std::to_string(card.topic_id)},
                                                      {"k", std::to_string(keywords.size())},
                                                      {"keywords", enumerate_keywords(keywords)}});
}

}  // namespace

std::string build_sense_prompt(const TopicCard& card, const PromptInstructionSet& instructions) {
  return sense_prompt_for(card, card.keywords, instructions);
}

std::vector<std::string> parse_enumerated(std::string_view response, std::size_t expected) {
  std::vector<std::string> items;
  bool started = false;
  for (const auto& raw : text::split(response, '\n')) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    std::size_t digits = 0;
    while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
    const bool numbered = digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')') &&
                          (digits + 1 == line.size() || line[digits + 1] == ' ' || line[digits + 1] == '\t');
    if (numbered) {
      const auto n = std::stoul(std::string(line.substr(0, digits)));
      if (n != items.size() + 1) {
        throw Error(ErrorCode::MalformedResponse,
                    "expected item " + std::to_string(items.size() + 1) + ", found " + std::to_string(n));
      }
      items.emplace_back(text::trim(line.substr(digits + 1)));
      started = true;
    } else if (started) {
      items.back() += " ";
      items.back() += line;
    }
    // text before the first numbered line is ignored
  }
  if (items.size() != expected) {
    throw Error(ErrorCode::MalformedResponse,
                "expected " + std::to_string(expected) + " enumerated items, found " + std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].empty()) throw Error(ErrorCode::MalformedResponse, "item " + std::to_string(i + 1) + " is empty");
  }
  return items;
}

TopicCard retrieve_keyword_senses(LlmClient& client, ExchangeLog& log, const TopicCard& card,
                                  const PromptInstructionSet& instructions, SenseOptions options) {
  std::vector<std::vector<Keyword>> batches;
  if (options.per_keyword) {
    for (const auto& k : card.keywords) batches.push_back({k});
  } else {
    batches.push_back(card.keywords);
  }
  TopicCard out = card;
  out.senses.clear();
  for (const auto& batch : batches) {
    const auto prompt = sense_prompt_for(card, batch, instructions);
    auto req = make_request(client, instructions, prompt, "sense", {{"keywords", enumerate_keywords(batch)}});
    const auto response = client.complete(req);
    std::vector<std::string> senses;
    try {
      senses = parse_enumerated(response, batch.size());
    } catch (const Error&) {
      log.append({Stage::sense, prompt, response, client.model_name(), {}, "malformed", card.topic_id, {}});
      throw;
    }
    log.append({Stage::sense, prompt, response, client.model_name(), {}, "ok", card.topic_id, {}});
    out.senses.insert(out.senses.end(), senses.begin(), senses.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: topic implication

std::string build_topic_prompt(const TopicCard& card, const PromptInstructionSet& instructions) {
  if (card.keywords.empty()) {
    throw Error(ErrorCode::TemplateError, "topic " + std::to_string(card.topic_id) + " has no keywords");
  }
  if (card.senses.size() != card.keywords.size()) {
    throw Error(ErrorCode::MissingSenses, "topic " + std::to_string(card.topic_id) + " has " +
                                              std::to_string(card.senses.size()) + " senses for " +
                                              std::to_string(card.keywords.size()) + " keywords");
  }
  if (!card.description.ready()) {
    throw Error(ErrorCode::MissingDescription,
                "topic " + std::to_string(card.topic_id) + " needs an analyst description or an explicit skip");
  }
  std::string block;
  for (std::size_t j = 0; j < card.keywords.size(); ++j) {
    if (j > 0) block.push_back('\n');
    block += std::to_string(j + 1) + ". " + card.keywords[j].word + " (weight=" + text::fixed(card.keywords[j].weight, 4) +
             "): " + card.senses[j];
  }
  const auto description = card.description.state == ManualDescription::State::provided
                               ? card.description.text
                               : std::string(kSkippedDescriptionClause);
  return render_template(instructions.template_text, {{"topic_id", std::to_string(card.topic_id)},
                                                      {"k", std::to_string(card.keywords.size())},
                                                      {"keyword_block", block},
                                                      {"description", description}});
}

TopicCard generate_topic_implication(LlmClient& client, ExchangeLog& log, const TopicCard& card,
                                     const PromptInstructionSet& instructions) {
  const auto prompt = build_topic_prompt(card, instructions);
  auto req = make_request(client, instructions, prompt, "implication", {{"topic_id", std::to_string(card.topic_id)}});
  const auto response = client.complete(req);
  const auto trimmed = std::string(text::trim(response));
  if (trimmed.empty()) {
    throw Error(ErrorCode::EmptyResponse, "empty implication for topic " + std::to_string(card.topic_id));
  }
  log.append({Stage::implication, prompt, response, client.model_name(), {}, "ok", card.topic_id, {}});
  TopicCard out = card;
  out.implication = trimmed;
  return out;
}

std::vector<TopicCard> label_topics(LlmClient& client, ExchangeLog& log, std::vector<TopicCard> cards,
                                    const PromptInstructionSet& sense, const PromptInstructionSet& implication,
                                    SenseOptions options) {
  for (auto& card : cards) {
    if (card.senses.size() != card.keywords.size()) card = retrieve_keyword_senses(client, log, card, sense, options);
    card = generate_topic_implication(client, log, card, implication);
  }
  return cards;
}

// ---------------------------------------------------------------------------
// Cleaning pre-pass

std::string line_diff(std::string_view before, std::string_view after) {
  const auto a = text::split(before, '\n');
  const auto b = text::split(after, '\n');
  const std::multiset<std::string> in_a(a.begin(), a.end());
  const std::multiset<std::string> in_b(b.begin(), b.end());
  std::string out;
  for (const auto& line : a) {
    if (!in_b.count(line)) out += "- " + line + "\n";
  }
  for (const auto& line : b) {
    if (!in_a.count(line)) out += "+ " + line + "\n";
  }
  return out;
}

Document assist_clean(LlmClient& client, ExchangeLog& log, const Document& doc,
                      const PromptInstructionSet& instructions, const CleaningRules& fallback_rules) {
  const auto prompt = render_template(instructions.template_text, {{"title", doc.title}, {"body", doc.body}});
  auto req = make_request(client, instructions, prompt, "clean", {{"title", doc.title}, {"body", doc.body}});
  std::string response;
  try {
    response = client.complete(req);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LlmUnavailable) throw;
    warn("LLM cleaning unavailable for '" + doc.id + "', using deterministic cleaning: " + e.detail());
    return clean_document(doc, fallback_rules);
  }
  const auto body = std::string(text::trim(response));
  if (body.empty()) {
    warn("LLM cleaning returned an empty body for '" + doc.id + "', using deterministic cleaning");
    return clean_document(doc, fallback_rules);
  }
  log.append({Stage::clean, prompt, response, client.model_name(), {}, "ok", std::nullopt, line_diff(doc.body, body)});
  Document out = doc;
  out.body = body;
  return out;
}

}  // namespace corpuslens::llm

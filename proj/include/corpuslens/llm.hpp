#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "corpuslens/corpus.hpp"

namespace corpuslens::llm {

// ---------------------------------------------------------------------------
// Instruction sets and topic cards

enum class InstructionId { sense, implication, clean };

std::string_view instruction_name(InstructionId id);

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct PromptInstructionSet {
  InstructionId id = InstructionId::sense;
  // `{{name}}` placeholders; see the builders below for the names each stage
  // provides.
  std::string template_text;
  DecodingParams params;

  static PromptInstructionSet default_sense();
  static PromptInstructionSet default_implication();
  static PromptInstructionSet default_clean();
  static PromptInstructionSet from_file(InstructionId id, const std::filesystem::path& path,
                                        DecodingParams params = {});
};

// Fills every `{{name}}` from `values`. Unknown or unterminated placeholders
// throw TemplateError.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

struct Keyword {
  std::string word;
  double weight = 0.0;
  bool operator==(const Keyword&) const = default;
};

// Analyst description of a topic. A topic whose keywords are too abstract is
// explicitly skipped instead of described.
struct ManualDescription {
  enum class State { missing, skipped, provided };
  State state = State::missing;
  std::string text;

  static ManualDescription provided_text(std::string t) { return {State::provided, std::move(t)}; }
  static ManualDescription skip() { return {State::skipped, {}}; }
  bool ready() const { return state != State::missing; }
  bool operator==(const ManualDescription&) const = default;
};

struct TopicCard {
  std::size_t topic_id = 0;
  std::vector<Keyword> keywords;
  std::vector<std::string> senses;  // empty, or one per keyword
  ManualDescription description;
  std::string implication;

  std::size_t k() const { return keywords.size(); }
  bool operator==(const TopicCard&) const = default;
};

std::string cards_to_json(const std::vector<TopicCard>& cards);
std::vector<TopicCard> cards_from_json(const std::string& content);

// ---------------------------------------------------------------------------
// Client contract

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  // Local-only metadata (stage name and the placeholder values the prompt was
  // built from). Never sent over the wire nor part of the cache key.
  std::string purpose;
  std::map<std::string, std::string> context;

  // Canonical JSON body of the wire request.
  std::string to_json() const;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Throws LlmUnavailable when no response could be obtained.
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string model_name() const = 0;
};

struct HttpClientSettings {
  std::string endpoint;       // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string auth_env;       // name of the environment variable holding the token
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds retry_backoff{250};
};

// JSON chat-completion over HTTP. Accepts either `{"content": ...}` or the
// `choices[0].message.content` response shape.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpClientSettings settings);
  std::string complete(const ChatRequest& request) override;
  std::string model_name() const override { return settings_.model; }

 private:
  HttpClientSettings settings_;
};

// Content-addressed response cache in front of another client. Keys are the
// SHA-256 of the canonical request JSON; one file per key.
class CachingClient final : public LlmClient {
 public:
  CachingClient(std::shared_ptr<LlmClient> inner, std::filesystem::path cache_dir);
  std::string complete(const ChatRequest& request) override;
  std::string model_name() const override { return inner_->model_name(); }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  static std::string cache_key(const ChatRequest& request);

 private:
  std::shared_ptr<LlmClient> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Deterministic offline client. With a responder it answers from that
// function; otherwise it answers from the request context: sense requests get
// one numbered line per keyword, clean requests echo the body, anything else
// gets a fixed paragraph derived from the prompt hash.
class MockLlmClient final : public LlmClient {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;
  explicit MockLlmClient(Responder responder = {}, std::string model = "mock");
  std::string complete(const ChatRequest& request) override;
  std::string model_name() const override { return model_; }
  std::size_t calls() const { return calls_; }

 private:
  Responder responder_;
  std::string model_;
  std::size_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// Exchange log

enum class Stage { sense, implication, clean };
std::string_view stage_name(Stage s);

struct ExchangeRecord {
  Stage stage = Stage::sense;
  std::string prompt;
  std::string response;
  std::string model_name;
  std::string timestamp;
  std::string status = "ok";  // "ok" or "malformed"
  std::optional<std::size_t> topic_id;
  std::string diff;           // clean stage only
};

// Append-only. When a path is given every record is also appended to that
// JSONL file as it is written.
class ExchangeLog {
 public:
  using Clock = std::function<std::string()>;
  explicit ExchangeLog(std::optional<std::filesystem::path> path = std::nullopt, Clock clock = {});
  void append(ExchangeRecord record);
  std::vector<ExchangeRecord> records() const;
  std::size_t size() const;
  std::size_t ok_count() const;
  std::string now() const;

  static std::string to_jsonl(const ExchangeRecord& r);

 private:
  std::optional<std::filesystem::path> path_;
  Clock clock_;
  mutable std::mutex mu_;
  std::vector<ExchangeRecord> records_;
};

// ---------------------------------------------------------------------------
// Stage operations

// Sense prompt enumerating every keyword ("1. gold\n2. medal").
// Placeholders: {{topic_id}}, {{k}}, {{keywords}}.
std::string build_sense_prompt(const TopicCard& card, const PromptInstructionSet& instructions);

// Parses "1. ...\n2. ..." into exactly `expected` items, numbered 1..expected
// in order. Continuation lines join the preceding item. Throws
// MalformedResponse.
std::vector<std::string> parse_enumerated(std::string_view response, std::size_t expected);

struct SenseOptions {
  // One request per keyword instead of one per topic.
  bool per_keyword = false;
};

TopicCard retrieve_keyword_senses(LlmClient& client, ExchangeLog& log, const TopicCard& card,
                                  const PromptInstructionSet& instructions, SenseOptions options = {});

// Implication prompt: one line per keyword "j. word (weight=0.0200): sense",
// followed by the analyst description or an explicit skip clause.
// Placeholders: {{topic_id}}, {{k}}, {{keyword_block}}, {{description}}.
std::string build_topic_prompt(const TopicCard& card, const PromptInstructionSet& instructions);

TopicCard generate_topic_implication(LlmClient& client, ExchangeLog& log, const TopicCard& card,
                                     const PromptInstructionSet& instructions);

// Both stages for every card, in card order.
std::vector<TopicCard> label_topics(LlmClient& client, ExchangeLog& log, std::vector<TopicCard> cards,
                                    const PromptInstructionSet& sense, const PromptInstructionSet& implication,
                                    SenseOptions options = {});

// Optional LLM cleaning pre-pass. Placeholders: {{title}}, {{body}}.
// Falls back to clean_document when the client is unavailable or returns an
// empty body.
Document assist_clean(LlmClient& client, ExchangeLog& log, const Document& doc,
                      const PromptInstructionSet& instructions, const CleaningRules& fallback_rules);

// Line-level diff summary ("- removed" / "+ added" lines).
std::string line_diff(std::string_view before, std::string_view after);

inline constexpr std::string_view kSkippedDescriptionClause =
    "(no analyst description provided; the analyst marked this topic as too abstract to describe)";

}  // namespace corpuslens::llm

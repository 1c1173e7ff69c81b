#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "corpuslens/corpus.hpp"
#include "corpuslens/llm.hpp"
#include "corpuslens/topic_model.hpp"

namespace corpuslens::cli {

inline constexpr int kConfigVersion = 1;

struct LanguageConfig {
  Lang lang = Lang::en;
  std::filesystem::path corpus;
  CorpusFormat format = CorpusFormat::jsonl;
  std::optional<std::filesystem::path> stoplist;
  std::optional<std::filesystem::path> lemmas;
  std::optional<std::filesystem::path> tagger;
  std::optional<std::filesystem::path> segmenter_lexicon;  // zh
  std::optional<std::filesystem::path> boilerplate;
  std::vector<std::string> keywords;
  std::size_t min_keyword_hits = 2;
};

struct SweepConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 20;
  lda::CoherenceMetric metric = lda::CoherenceMetric::umass;
  std::size_t top_n = 10;
  std::optional<std::size_t> iterations;  // overrides lda.iterations for sweeps
};

struct LlmConfig {
  std::string provider = "mock";  // "mock" or "http"
  llm::HttpClientSettings http;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> sense_template;
  std::optional<std::filesystem::path> implication_template;
  std::optional<std::filesystem::path> clean_template;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Loaded from a versioned JSON file; relative paths resolve against the file's
// directory.
struct ProjectConfig {
  int version = kConfigVersion;
  std::filesystem::path config_path;
  std::filesystem::path workspace;
  std::vector<LanguageConfig> languages;
  lda::LdaConfig lda;
  std::size_t min_df = 2;
  TermForm term_form = TermForm::surface;
  bool lowercase_terms = true;  // ASCII case folding before the vocabulary is built
  std::size_t top_keywords = 10;
  SweepConfig sweep;
  LlmConfig llm;
  std::optional<std::filesystem::path> patterns;
  std::map<std::string, std::filesystem::path> schemes;
  ServerConfig server;

  const LanguageConfig& language(std::optional<Lang> lang) const;
  // Throws InvalidConfig naming the first problem.
  void validate() const;
};

ProjectConfig parse_config(const std::string& content, const std::filesystem::path& base_dir);
ProjectConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Workspace: content-addressed artifacts plus a manifest

struct ArtifactRecord {
  std::string name;
  std::string path;  // relative to the workspace
  std::string sha256;
  std::string command;
  std::map<std::string, std::string> inputs;  // artifact name -> sha256
  std::string timestamp;
};

// `manifest.json` maps each artifact name to its current version; every
// version lives in `artifacts/<name>-<hash12>.<ext>` and is never rewritten.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path stores_dir() const { return dir_ / "stores"; }

  // Rehashes every current artifact; throws CorruptWorkspace on mismatch.
  void verify() const;

  ArtifactRecord put(const std::string& name, const std::string& ext, std::string_view content,
                     const std::string& command, const std::map<std::string, std::string>& inputs);
  bool has(const std::string& name) const;
  std::optional<ArtifactRecord> record(const std::string& name) const;
  std::vector<ArtifactRecord> records() const;
  std::vector<ArtifactRecord> history(const std::string& name) const;
  // Reads the current version and checks its hash. Throws MissingArtifact,
  // CorruptWorkspace.
  std::string read(const std::string& name) const;
  std::string hash(const std::string& name) const;

 private:
  void load();
  void save() const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, ArtifactRecord> current_;
  std::map<std::string, std::vector<ArtifactRecord>> history_;
};

}  // namespace corpuslens::cli

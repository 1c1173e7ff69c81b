#include "corpuslens/workspace.hpp"

#include <algorithm>
#include <set>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"
#include "json.hpp"

namespace corpuslens::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) bad(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) bad("unknown key '" + where + "." + key + "'");
  }
}

fs::path resolve(const fs::path& base, const json& v, const std::string& where) {
  if (!v.is_string() || v.get<std::string>().empty()) bad(where + " must be a non-empty path string");
  fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::optional<fs::path> opt_path(const fs::path& base, const json& obj, const std::string& key,
                                 const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return resolve(base, obj.at(key), where + "." + key);
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

std::size_t get_count(const json& obj, const std::string& key, std::size_t fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) bad(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

const LanguageConfig& ProjectConfig::language(std::optional<Lang> lang) const {
  if (!lang) {
    if (languages.size() == 1) return languages.front();
    throw Error(ErrorCode::UsageError, "several languages are configured; pass --lang");
  }
  for (const auto& l : languages) {
    if (l.lang == *lang) return l;
  }
  throw Error(ErrorCode::InvalidConfig, "language '" + std::string(lang_name(*lang)) + "' is not configured");
}

void ProjectConfig::validate() const {
  if (version != kConfigVersion) bad("unsupported config version " + std::to_string(version));
  if (workspace.empty()) bad("workspace path is empty");
  if (languages.empty()) bad("no languages configured");
  auto must_exist = [](const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) bad(what + " not found: " + p.string());
  };
  for (const auto& l : languages) {
    const auto where = "languages." + std::string(lang_name(l.lang));
    must_exist(l.corpus, where + ".corpus");
    for (const auto& [opt, key] : {std::pair{&l.stoplist, "stoplist"}, {&l.lemmas, "lemmas"}, {&l.tagger, "tagger"},
                                   {&l.segmenter_lexicon, "segmenter_lexicon"}, {&l.boilerplate, "boilerplate"}}) {
      if (*opt) must_exist(**opt, where + "." + key);
    }
    if (l.min_keyword_hits < 1) bad(where + ".min_keyword_hits must be >= 1");
  }
  lda.validate();
  if (sweep.k_min < 2 || sweep.k_max > 64 || sweep.k_min > sweep.k_max) {
    bad("sweep range must satisfy 2 <= kmin <= kmax <= 64");
  }
  if (sweep.top_n < 2) bad("sweep.top_n must be >= 2");
  if (top_keywords < 1) bad("lda.top_keywords must be >= 1");
  if (min_df < 1) bad("lda.min_df must be >= 1");
  if (llm.provider != "mock" && llm.provider != "http") bad("llm.provider must be 'mock' or 'http'");
  if (llm.provider == "http" && (llm.http.endpoint.empty() || llm.http.model.empty())) {
    bad("llm.endpoint and llm.model are required for the http provider");
  }
  for (const auto& t : {llm.sense_template, llm.implication_template, llm.clean_template}) {
    if (t) must_exist(*t, "llm template");
  }
  if (patterns) must_exist(*patterns, "patterns");
  for (const auto& [name, path] : schemes) must_exist(path, "scheme '" + name + "'");
  if (server.port < 0 || server.port > 65535) bad("server.port out of range");
}

ProjectConfig parse_config(const std::string& content, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config", {"version", "workspace", "languages", "lda", "sweep", "llm", "patterns", "schemes", "server"});
  ProjectConfig cfg;
  cfg.version = get_or<int>(root, "version", 0, "config");
  if (!root.contains("workspace")) bad("config.workspace is required");
  cfg.workspace = resolve(base_dir, root.at("workspace"), "config.workspace");

  if (!root.contains("languages")) bad("config.languages is required");
  const auto& langs = root.at("languages");
  if (!langs.is_object()) bad("config.languages must be an object keyed by language code");
  for (const auto& [code, obj] : langs.items()) {
    const auto where = "languages." + code;
    check_keys(obj, where, {"corpus", "format", "stoplist", "lemmas", "tagger", "segmenter_lexicon", "boilerplate",
                            "keywords", "min_keyword_hits"});
    LanguageConfig l;
    try {
      l.lang = parse_lang(code);
    } catch (const Error&) {
      bad("unsupported language '" + code + "'");
    }
    if (!obj.contains("corpus")) bad(where + ".corpus is required");
    l.corpus = resolve(base_dir, obj.at("corpus"), where + ".corpus");
    const auto fmt = get_or<std::string>(obj, "format", "jsonl", where);
    if (fmt == "jsonl") l.format = CorpusFormat::jsonl;
    else if (fmt == "csv") l.format = CorpusFormat::csv;
    else bad(where + ".format must be 'jsonl' or 'csv'");
    l.stoplist = opt_path(base_dir, obj, "stoplist", where);
    l.lemmas = opt_path(base_dir, obj, "lemmas", where);
    l.tagger = opt_path(base_dir, obj, "tagger", where);
    l.segmenter_lexicon = opt_path(base_dir, obj, "segmenter_lexicon", where);
    l.boilerplate = opt_path(base_dir, obj, "boilerplate", where);
    l.keywords = get_or<std::vector<std::string>>(obj, "keywords", {}, where);
    l.min_keyword_hits = get_count(obj, "min_keyword_hits", 2, where);
    cfg.languages.push_back(std::move(l));
  }

  if (root.contains("lda")) {
    const auto& o = root.at("lda");
    check_keys(o, "lda", {"num_topics", "alpha", "beta", "iterations", "burn_in", "seed", "average_samples",
                          "sample_lag", "min_df", "term_form", "top_keywords", "lowercase"});
    cfg.lda.num_topics = get_count(o, "num_topics", cfg.lda.num_topics, "lda");
    if (o.contains("alpha") && !o.at("alpha").is_null()) cfg.lda.alpha = get_or<double>(o, "alpha", 0.0, "lda");
    cfg.lda.beta = get_or<double>(o, "beta", cfg.lda.beta, "lda");
    cfg.lda.iterations = get_count(o, "iterations", cfg.lda.iterations, "lda");
    cfg.lda.burn_in = get_count(o, "burn_in", cfg.lda.burn_in, "lda");
    cfg.lda.seed = get_or<std::uint64_t>(o, "seed", cfg.lda.seed, "lda");
    cfg.lda.average_samples = get_or<bool>(o, "average_samples", false, "lda");
    cfg.lda.sample_lag = get_count(o, "sample_lag", cfg.lda.sample_lag, "lda");
    cfg.min_df = get_count(o, "min_df", cfg.min_df, "lda");
    const auto form = get_or<std::string>(o, "term_form", "surface", "lda");
    if (form == "surface") cfg.term_form = TermForm::surface;
    else if (form == "lemma") cfg.term_form = TermForm::lemma;
    else bad("lda.term_form must be 'surface' or 'lemma'");
    cfg.top_keywords = get_count(o, "top_keywords", cfg.top_keywords, "lda");
    cfg.lowercase_terms = get_or<bool>(o, "lowercase", true, "lda");
  }
  if (root.contains("sweep")) {
    const auto& o = root.at("sweep");
    check_keys(o, "sweep", {"kmin", "kmax", "metric", "top_n", "iterations"});
    cfg.sweep.k_min = get_count(o, "kmin", cfg.sweep.k_min, "sweep");
    cfg.sweep.k_max = get_count(o, "kmax", cfg.sweep.k_max, "sweep");
    try {
      cfg.sweep.metric = lda::parse_metric(get_or<std::string>(o, "metric", "umass", "sweep"));
    } catch (const Error& e) {
      bad(e.detail());
    }
    cfg.sweep.top_n = get_count(o, "top_n", cfg.sweep.top_n, "sweep");
    if (o.contains("iterations") && !o.at("iterations").is_null()) {
      cfg.sweep.iterations = get_count(o, "iterations", 0, "sweep");
    }
  }
  if (root.contains("llm")) {
    const auto& o = root.at("llm");
    check_keys(o, "llm", {"provider", "endpoint", "model", "auth_env", "timeout_ms", "retries", "cache_dir",
                          "sense_template", "implication_template", "clean_template"});
    cfg.llm.provider = get_or<std::string>(o, "provider", "mock", "llm");
    cfg.llm.http.endpoint = get_or<std::string>(o, "endpoint", "", "llm");
    cfg.llm.http.model = get_or<std::string>(o, "model", cfg.llm.provider == "mock" ? "mock" : "", "llm");
    cfg.llm.http.auth_env = get_or<std::string>(o, "auth_env", "", "llm");
    cfg.llm.http.timeout = std::chrono::milliseconds(get_count(o, "timeout_ms", 30000, "llm"));
    cfg.llm.http.retries = static_cast<int>(get_count(o, "retries", 2, "llm"));
    cfg.llm.cache_dir = opt_path(base_dir, o, "cache_dir", "llm");
    cfg.llm.sense_template = opt_path(base_dir, o, "sense_template", "llm");
    cfg.llm.implication_template = opt_path(base_dir, o, "implication_template", "llm");
    cfg.llm.clean_template = opt_path(base_dir, o, "clean_template", "llm");
  } else {
    cfg.llm.http.model = "mock";
  }
  cfg.patterns = opt_path(base_dir, root, "patterns", "config");
  if (root.contains("schemes")) {
    const auto& o = root.at("schemes");
    if (!o.is_object()) bad("config.schemes must map scheme names to files");
    for (const auto& [name, v] : o.items()) cfg.schemes[name] = resolve(base_dir, v, "schemes." + name);
  }
  if (root.contains("server")) {
    const auto& o = root.at("server");
    check_keys(o, "server", {"host", "port"});
    cfg.server.host = get_or<std::string>(o, "host", cfg.server.host, "server");
    cfg.server.port = get_or<int>(o, "port", cfg.server.port, "server");
  }
  cfg.validate();
  return cfg;
}

ProjectConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::InvalidConfig, "config file not found: " + path.string());
  auto cfg = parse_config(text::read_file(path), fs::absolute(path).parent_path());
  cfg.config_path = fs::absolute(path);
  return cfg;
}

// ---------------------------------------------------------------------------
// Workspace

namespace {

json record_to_json(const ArtifactRecord& r) {
  return {{"name", r.name},       {"path", r.path},   {"sha256", r.sha256},
          {"command", r.command}, {"inputs", r.inputs}, {"timestamp", r.timestamp}};
}

ArtifactRecord record_from_json(const json& j) {
  return {j.at("name").get<std::string>(),
          j.at("path").get<std::string>(),
          j.at("sha256").get<std::string>(),
          j.value("command", ""),
          j.value("inputs", std::map<std::string, std::string>{}),
          j.value("timestamp", "")};
}

}  // namespace

Workspace::Workspace(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "artifacts");
  fs::create_directories(stores_dir());
  load();
}

void Workspace::load() {
  const auto path = dir_ / "manifest.json";
  if (!fs::exists(path)) return;
  try {
    const auto root = json::parse(text::read_file(path));
    for (const auto& [name, versions] : root.at("artifacts").items()) {
      for (const auto& v : versions) history_[name].push_back(record_from_json(v));
      if (!history_[name].empty()) current_[name] = history_[name].back();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptWorkspace, "manifest.json is unreadable: " + std::string(e.what()));
  }
}

void Workspace::save() const {
  json artifacts = json::object();
  for (const auto& [name, versions] : history_) {
    json arr = json::array();
    for (const auto& r : versions) arr.push_back(record_to_json(r));
    artifacts[name] = std::move(arr);
  }
  const json root = {{"version", 1}, {"artifacts", std::move(artifacts)}};
  const auto tmp = dir_ / "manifest.json.tmp";
  text::write_file(tmp, root.dump(2) + "\n");
  fs::rename(tmp, dir_ / "manifest.json");
}

void Workspace::verify() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> stale;
  for (const auto& [name, r] : current_) {
    const auto p = dir_ / r.path;
    if (!fs::exists(p) || text::sha256_hex(text::read_file(p)) != r.sha256) stale.push_back(name);
  }
  if (!stale.empty()) {
    std::string names;
    for (const auto& s : stale) names += (names.empty() ? "" : ", ") + s;
    throw Error(ErrorCode::CorruptWorkspace, "stale or missing artifacts: " + names);
  }
}

ArtifactRecord Workspace::put(const std::string& name, const std::string& ext, std::string_view content,
                              const std::string& command, const std::map<std::string, std::string>& inputs) {
  std::lock_guard lock(mu_);
  const auto hash = text::sha256_hex(content);
  auto cur = current_.find(name);
  if (cur != current_.end() && cur->second.sha256 == hash && cur->second.inputs == inputs) return cur->second;
  ArtifactRecord r;
  r.name = name;
  r.path = (fs::path("artifacts") / (name + "-" + hash.substr(0, 12) + "." + ext)).generic_string();
  r.sha256 = hash;
  r.command = command;
  r.inputs = inputs;
  r.timestamp = text::utc_now_iso();
  const auto full = dir_ / r.path;
  if (!fs::exists(full)) {
    const auto tmp = fs::path(full.string() + ".tmp");
    text::write_file(tmp, content);
    fs::rename(tmp, full);
  }
  history_[name].push_back(r);
  current_[name] = r;
  save();
  return r;
}

bool Workspace::has(const std::string& name) const {
  std::lock_guard lock(mu_);
  return current_.count(name) > 0;
}

std::optional<ArtifactRecord> Workspace::record(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = current_.find(name);
  if (it == current_.end()) return std::nullopt;
  return it->second;
}

std::vector<ArtifactRecord> Workspace::records() const {
  std::lock_guard lock(mu_);
  std::vector<ArtifactRecord> out;
  for (const auto& [_, r] : current_) out.push_back(r);
  return out;
}

std::vector<ArtifactRecord> Workspace::history(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = history_.find(name);
  return it == history_.end() ? std::vector<ArtifactRecord>{} : it->second;
}

std::string Workspace::read(const std::string& name) const {
  const auto r = record(name);
  if (!r) throw Error(ErrorCode::MissingArtifact, "artifact '" + name + "' has not been produced yet");
  const auto p = dir_ / r->path;
  if (!fs::exists(p)) throw Error(ErrorCode::CorruptWorkspace, "artifact file missing: " + r->path);
  auto content = text::read_file(p);
  if (text::sha256_hex(content) != r->sha256) {
    throw Error(ErrorCode::CorruptWorkspace, "artifact '" + name + "' does not match its recorded hash");
  }
  return content;
}

std::string Workspace::hash(const std::string& name) const {
  const auto r = record(name);
  if (!r) throw Error(ErrorCode::MissingArtifact, "artifact '" + name + "' has not been produced yet");
  return r->sha256;
}

}  // namespace corpuslens::cli

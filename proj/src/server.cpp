#include "corpuslens/server.hpp"

#include <csignal>
#include <iostream>

#include "corpuslens/error.hpp"
#include "corpuslens/text.hpp"
#include "httplib.h"

namespace corpuslens::cli {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownMatch:
    case ErrorCode::NodeAbsent:
    case ErrorCode::TopicOutOfRange:
    case ErrorCode::DocOutOfRange:
    case ErrorCode::MissingArtifact:
    case ErrorCode::SlotOutOfRange:
      return 404;
    case ErrorCode::MissingDescription:
    case ErrorCode::MissingSenses:
    case ErrorCode::JobRunning:
    case ErrorCode::MissingSection:
      return 409;
    case ErrorCode::LlmUnavailable:
    case ErrorCode::MalformedResponse:
    case ErrorCode::EmptyResponse:
      return 502;
    case ErrorCode::CorruptWorkspace:
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

// ---------------------------------------------------------------------------
// Jobs

JobRunner::~JobRunner() { wait(); }

std::string JobRunner::submit(std::string kind, std::function<json()> work) {
  std::lock_guard lock(mu_);
  if (busy_) throw Error(ErrorCode::JobRunning, "another job is still running");
  if (worker_.joinable()) worker_.join();
  const auto id = "job-" + std::to_string(next_++);
  jobs_[id] = {id, kind, "running", nullptr, nullptr};
  busy_ = true;
  worker_ = std::thread([this, id, work = std::move(work)] {
    json result, error;
    bool ok = true;
    try {
      result = work();
    } catch (const Error& e) {
      ok = false;
      error = {{"code", e.code_name()}, {"detail", e.detail()}};
    } catch (const std::exception& e) {
      ok = false;
      error = {{"code", "InternalError"}, {"detail", e.what()}};
    }
    std::lock_guard lock(mu_);
    auto& job = jobs_[id];
    job.state = ok ? "done" : "failed";
    job.result = std::move(result);
    job.error = std::move(error);
    busy_ = false;
  });
  return id;
}

std::optional<JobRunner::Job> JobRunner::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void JobRunner::wait() {
  std::thread t;
  {
    std::lock_guard lock(mu_);
    t = std::move(worker_);
  }
  if (t.joinable()) t.join();
}

// ---------------------------------------------------------------------------
// Routes

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
  send_json(res, {{"error", {{"code", code}, {"detail", detail}}}}, status);
}

std::optional<Lang> lang_param(const httplib::Request& req) {
  if (!req.has_param("lang")) return std::nullopt;
  try {
    return parse_lang(req.get_param_value("lang"));
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, "unsupported language '" + req.get_param_value("lang") + "'");
  }
}

std::size_t count_param(const httplib::Request& req, const std::string& key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const auto n = std::stoll(v, &used);
    if (used != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw Error(ErrorCode::UsageError, "query parameter '" + key + "' must be a non-negative integer");
  }
}

std::optional<std::size_t> opt_count(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) return std::nullopt;
  return count_param(req, key, 0);
}

std::string required_param(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key) || req.get_param_value(key).empty()) {
    throw Error(ErrorCode::UsageError, "query parameter '" + key + "' is required");
  }
  return req.get_param_value(key);
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::optional<Lang> body_lang(const json& body, const httplib::Request& req) {
  if (body.contains("lang") && body.at("lang").is_string()) return parse_lang(body.at("lang").get<std::string>());
  return lang_param(req);
}

json page(const json& arr, std::size_t offset, std::optional<std::size_t> limit) {
  json out = json::array();
  for (std::size_t i = offset; i < arr.size(); ++i) {
    if (limit && out.size() >= *limit) break;
    out.push_back(arr[i]);
  }
  return out;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), e.code_name(), e.detail());
    } catch (const json::exception& e) {
      send_error(res, 400, "ParseError", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  };
}

}  // namespace

ApiServer::ApiServer(Project& project) : project_(project), server_(std::make_unique<httplib::Server>()) { routes(); }

ApiServer::~ApiServer() { stop(); }

void ApiServer::routes() {
  auto& s = *server_;
  auto& p = project_;
  s.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header(std::string(kSchemaHeader), std::string(kSchemaVersion));
  });

  s.Get("/status", guarded([&p](const httplib::Request&, httplib::Response& res) {
          json langs = json::array();
          bool trained = false;
          for (const auto& l : p.config().languages) {
            const auto name = std::string(lang_name(l.lang));
            const bool has_model = p.workspace().has("topics." + name);
            trained = trained || has_model;
            langs.push_back({{"lang", name}, {"trained", has_model}, {"ingested", p.workspace().has("tokens." + name)}});
          }
          send_json(res, {{"mode", trained ? "full" : "ingest-only"}, {"languages", langs}});
        }));

  s.Get("/topics", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          send_json(res, page(p.topics(lang_param(req)), count_param(req, "offset", 0), opt_count(req, "limit")));
        }));
  s.Get(R"(/topics/(\d+))", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          send_json(res, p.topic(lang_param(req), std::stoul(req.matches[1])));
        }));
  s.Post(R"(/topics/(\d+)/description)", guarded([&p](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_json(req);
           const bool skipped = body.value("skipped", false);
           std::optional<std::string> text;
           if (!skipped) {
             if (!body.contains("text") || !body.at("text").is_string()) {
               throw Error(ErrorCode::UsageError, "body needs \"text\" or \"skipped\": true");
             }
             text = body.at("text").get<std::string>();
           }
           send_json(res, p.describe(body_lang(body, req), std::stoul(req.matches[1]), text));
         }));
  s.Post(R"(/label/(\d+))", guarded([&p](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_json(req);
           const auto out = p.label(body_lang(body, req), std::stoul(req.matches[1]), body.value("per_keyword", false));
           send_json(res, out.at(0));
         }));

  s.Get("/kwic", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          send_json(res, p.kwic(lang_param(req), required_param(req, "node"),
                                count_param(req, "window", phrase::kDefaultWindow), opt_count(req, "limit"),
                                count_param(req, "offset", 0)));
        }));
  s.Get("/collocates", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          const auto measure = phrase::parse_measure(req.has_param("measure") ? req.get_param_value("measure") : "raw");
          send_json(res, p.collocates(lang_param(req), required_param(req, "node"),
                                      count_param(req, "window", phrase::kDefaultWindow),
                                      count_param(req, "min_freq", 1), measure, count_param(req, "offset", 0),
                                      opt_count(req, "limit")));
        }));
  s.Get("/patterns", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          send_json(res, page(p.patterns(), count_param(req, "offset", 0), opt_count(req, "limit")));
        }));
  s.Get(R"(/patterns/([^/]+)/matches)", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          PatternQuery q{req.matches[1], required_param(req, "node"), std::nullopt, std::nullopt};
          if (req.has_param("scheme")) q.scheme = req.get_param_value("scheme");
          if (req.has_param("slot")) q.slot = req.get_param_value("slot");
          send_json(res, p.pattern_matches(lang_param(req), q, false, count_param(req, "offset", 0),
                                           opt_count(req, "limit")));
        }));
  s.Post("/annotations", guarded([&p](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_json(req);
           for (const auto* key : {"match_id", "label", "annotator"}) {
             if (!body.contains(key) || !body.at(key).is_string()) {
               throw Error(ErrorCode::UsageError, std::string("body needs string field \"") + key + "\"");
             }
           }
           send_json(res,
                     p.annotate(body_lang(body, req), body.at("match_id").get<std::string>(),
                                phrase::parse_prosody(body.at("label").get<std::string>()),
                                body.at("annotator").get<std::string>(), body.value("note", "")),
                     201);
         }));
  s.Get("/prosody", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          if (req.has_param("node")) {
            send_json(res, p.prosody(lang_param(req), req.get_param_value("node"), phrase::ProsodyScope::node));
          } else {
            send_json(res, p.prosody(lang_param(req), required_param(req, "pattern"), phrase::ProsodyScope::pattern));
          }
        }));
  s.Get("/report", guarded([&p](const httplib::Request& req, httplib::Response& res) {
          const auto format = phrase::parse_report_format(req.has_param("format") ? req.get_param_value("format") : "md");
          std::set<phrase::ReportSection> sections;
          if (req.has_param("sections")) {
            for (const auto& name : text::split(req.get_param_value("sections"), ',')) {
              if (!name.empty()) sections.insert(phrase::parse_report_section(name));
            }
          }
          const auto doc = p.report(lang_param(req), format, sections, "api: GET /report");
          res.set_content(doc, format == phrase::ReportFormat::csv ? "text/csv" : "text/markdown");
        }));

  s.Post("/jobs", guarded([this, &p](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_json(req);
           const auto kind = body.value("kind", "");
           const auto lang = body_lang(body, req);
           std::function<json()> work;
           if (kind == "train") {
             TrainOptions o;
             if (body.contains("num_topics")) o.num_topics = body.at("num_topics").get<std::size_t>();
             if (body.contains("iterations")) o.iterations = body.at("iterations").get<std::size_t>();
             if (body.contains("seed")) o.seed = body.at("seed").get<std::uint64_t>();
             work = [&p, lang, o] { return p.train(lang, o, "api: POST /jobs train"); };
           } else if (kind == "sweep") {
             SweepOptions o;
             if (body.contains("kmin")) o.k_min = body.at("kmin").get<std::size_t>();
             if (body.contains("kmax")) o.k_max = body.at("kmax").get<std::size_t>();
             if (body.contains("metric")) o.metric = lda::parse_metric(body.at("metric").get<std::string>());
             if (body.contains("iterations")) o.iterations = body.at("iterations").get<std::size_t>();
             work = [&p, lang, o] { return p.sweep(lang, o, "api: POST /jobs sweep"); };
           } else {
             throw Error(ErrorCode::UsageError, "job kind must be 'train' or 'sweep'");
           }
           const auto id = jobs_.submit(kind, std::move(work));
           send_json(res, {{"id", id}, {"kind", kind}, {"state", "running"}}, 202);
         }));
  s.Get(R"(/jobs/([A-Za-z0-9-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto job = jobs_.get(req.matches[1]);
          if (!job) return send_error(res, 404, "UnknownJob", "no job '" + std::string(req.matches[1]) + "'");
          send_json(res, {{"id", job->id}, {"kind", job->kind}, {"state", job->state}, {"result", job->result},
                          {"error", job->error}});
        }));
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::PortInUse, "no free port on " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::PortInUse, host + ":" + std::to_string(port) + " is unavailable");
  }
  return port;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_->is_running()) server_->stop();
  jobs_.wait();
}

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

void serve_api(Project& project, const std::string& host, int port, std::ostream& log) {
  project.workspace().verify();
  ApiServer server(project);
  const int bound = server.bind(host, port);
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&server] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  log << "listening on http://" << host << ":" << bound << std::endl;
  server.listen();
  g_stop = true;
  watcher.join();
  log << "stopped" << std::endl;
}

}  // namespace corpuslens::cli

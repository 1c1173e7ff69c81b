#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "corpuslens/error.hpp"
#include "corpuslens/project.hpp"

namespace httplib {
class Server;
}

namespace corpuslens::cli {

inline constexpr std::string_view kSchemaHeader = "X-Corpuslens-Schema";
inline constexpr std::string_view kSchemaVersion = "1";

// HTTP status used for a pipeline error code.
int http_status(ErrorCode code);

// One background train/sweep job at a time.
class JobRunner {
 public:
  struct Job {
    std::string id;
    std::string kind;
    std::string state;  // running | done | failed
    json result;
    json error;
  };

  ~JobRunner();
  // Throws JobRunning while another job is active.
  std::string submit(std::string kind, std::function<json()> work);
  std::optional<Job> get(const std::string& id) const;
  void wait();

 private:
  mutable std::mutex mu_;
  std::map<std::string, Job> jobs_;
  std::size_t next_ = 1;
  bool busy_ = false;
  std::thread worker_;
};

class ApiServer {
 public:
  explicit ApiServer(Project& project);
  ~ApiServer();

  // Port 0 binds any free port. Throws PortInUse.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  // Stops accepting requests and waits for a running job.
  void stop();

 private:
  void routes();

  Project& project_;
  std::unique_ptr<httplib::Server> server_;
  JobRunner jobs_;
};

// Verifies the workspace, binds and serves until SIGINT/SIGTERM.
void serve_api(Project& project, const std::string& host, int port, std::ostream& log);

}  // namespace corpuslens::cli

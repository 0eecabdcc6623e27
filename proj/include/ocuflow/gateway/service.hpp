#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ocuflow/gateway/runtime.hpp"
#include "ocuflow/gateway/store.hpp"

namespace httplib {
class Server;
}

namespace ocuflow::gateway {

struct ServiceOptions {
  bool enable_upload = false;  // the upload endpoint answers 501 either way
};

// HTTP front end over one Runtime:
//   POST /v1/cases                -> 202 {case_id}
//   GET  /v1/cases/{id}           -> case status
//   GET  /v1/cases/{id}/events    -> NDJSON stream: header line, then events
//   GET  /v1/cases/{id}/report    -> 200 report | 409 while running | 404
//   GET  /v1/tools?tier=n         -> catalog subset
//   POST /v1/feedback             -> 201 | 422 {errors}
//   GET  /v1/feedback/schema      -> accepted feedback document
//   POST /v1/uploads              -> 501 (404 unless enabled)
//   GET  /healthz
// Each case runs on its own worker; stop() drains them.
class Service {
 public:
  Service(const Runtime& runtime, Store& store, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Throws Error(Io) when the bind fails.
  int start(const std::string& host, int port);
  // Blocks the caller until stop() is called from another thread or a signal handler.
  void wait();
  // Stops accepting requests and waits for running cases to finish.
  void stop();
  int port() const noexcept { return port_; }

  // Submits a case directly (the POST handler uses this). Returns the case id.
  std::string submit(const ClinicalCase& c, int tier);
  // Blocks until the case reaches a terminal event.
  void wait_for(const std::string& case_id);

 private:
  struct LiveCase;
  void register_routes();
  std::shared_ptr<LiveCase> live(const std::string& case_id) const;

  const Runtime& runtime_;
  Store& store_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
  int port_ = 0;
  std::atomic<bool> stopping_{false};

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<LiveCase>> cases_;
  std::vector<std::thread> workers_;
  std::uint64_t next_id_ = 1;
};

}  // namespace ocuflow::gateway

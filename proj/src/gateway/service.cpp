#include "ocuflow/gateway/service.hpp"

#include <httplib.h>

#include "ocuflow/core/error.hpp"

namespace ocuflow::gateway {

struct Service::LiveCase {
  std::string case_id;
  std::shared_ptr<ReasoningTrace> trace;
  std::mutex mutex;
  std::condition_variable cv;
  std::vector<std::string> lines;  // header line, then one line per event
  bool done = false;
};

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, Json{{"error", message}});
}

Json field_errors_json(const std::vector<FieldError>& errors) {
  Json out = Json::array();
  for (const auto& e : errors) {
    Json j{{"field", e.field}, {"message", e.message}};
    if (!e.allowed.is_null()) j["allowed"] = e.allowed;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

Service::Service(const Runtime& runtime, Store& store, ServiceOptions options)
    : runtime_(runtime), store_(store), options_(options), server_(std::make_unique<httplib::Server>()) {
  register_routes();
}

Service::~Service() { stop(); }

std::shared_ptr<Service::LiveCase> Service::live(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  auto it = cases_.find(case_id);
  return it == cases_.end() ? nullptr : it->second;
}

std::string Service::submit(const ClinicalCase& input, int tier) {
  if (stopping_) throw Error(ErrorCode::InvalidArgument, "service is shutting down");
  auto c = input;
  auto lc = std::make_shared<LiveCase>();
  {
    std::lock_guard lock(mutex_);
    std::string id = c.case_id;
    while (cases_.contains(id) || store_.status(id)) id = c.case_id + "-" + std::to_string(next_id_++);
    c.case_id = id;
    lc->case_id = id;
    cases_[id] = lc;
  }
  store_.put_case(c.case_id, tier, to_json(c));
  lc->trace = std::make_shared<ReasoningTrace>(runtime_.orchestrator->header_for(c, tier));
  lc->lines.push_back(serialize_header(lc->trace->header()));
  store_.append_event_line(c.case_id, -1, lc->lines.back());
  lc->trace->subscribe([this, lc](const TraceEvent& e) {
    auto line = serialize_event(e);
    store_.append_event_line(lc->case_id, static_cast<std::int64_t>(e.seq), line);
    std::lock_guard lock(lc->mutex);
    lc->lines.push_back(std::move(line));
    lc->cv.notify_all();
  });

  std::lock_guard lock(mutex_);
  workers_.emplace_back([this, lc, c, tier] {
    auto outcome = runtime_.orchestrator->run(c, tier, lc->trace);
    if (outcome.report) store_.put_report(lc->case_id, to_json(*outcome.report));
    store_.set_status(lc->case_id, outcome.report ? "completed" : "failed");
    std::lock_guard l(lc->mutex);
    lc->done = true;
    lc->cv.notify_all();
  });
  return c.case_id;
}

void Service::wait_for(const std::string& case_id) {
  auto lc = live(case_id);
  if (!lc) return;
  std::unique_lock lock(lc->mutex);
  lc->cv.wait(lock, [&] { return lc->done; });
}

void Service::register_routes() {
  auto& s = *server_;

  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200,
              Json{{"status", "ok"},
                   {"catalog_hash", runtime_.registry->catalog_hash()},
                   {"tools", runtime_.registry->size()}});
  });

  s.Post("/v1/cases", [this](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::exception& e) {
      return send_error(res, 400, std::string("invalid JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("case")) return send_error(res, 400, "body must be {case, tier?}");
    int tier = runtime_.config.tier;
    if (body.contains("tier")) {
      if (!body["tier"].is_number_integer()) return send_error(res, 422, "tier must be an integer 1..5");
      tier = body["tier"].get<int>();
    }
    if (tier < kMinTier || tier > kMaxTier) return send_error(res, 422, "tier must be an integer 1..5");
    try {
      auto c = parse_case(body["case"], runtime_.registry->modalities());
      auto id = submit(c, tier);
      send_json(res, 202, Json{{"case_id", id}, {"tier", tier}, {"events", "/v1/cases/" + id + "/events"}});
    } catch (const Error& e) {
      send_error(res, 422, e.what());
    }
  });

  s.Get(R"(/v1/cases/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto id = req.matches[1].str();
    auto status = store_.status(id);
    if (!status) return send_error(res, 404, "unknown case " + id);
    send_json(res, 200, Json{{"case_id", id}, {"status", *status}});
  });

  s.Get(R"(/v1/cases/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    auto id = req.matches[1].str();
    auto lc = live(id);
    if (!lc) {
      auto lines = store_.event_lines(id);
      if (lines.empty()) return send_error(res, 404, "unknown case " + id);
      std::string body;
      for (const auto& l : lines) body += l + "\n";
      res.status = 200;
      res.set_content(body, "application/x-ndjson");
      return;
    }
    auto offset = std::make_shared<std::size_t>(0);
    res.set_chunked_content_provider("application/x-ndjson", [lc, offset](std::size_t, httplib::DataSink& sink) {
      std::unique_lock lock(lc->mutex);
      lc->cv.wait(lock, [&] { return lc->done || lc->lines.size() > *offset; });
      std::string chunk;
      for (; *offset < lc->lines.size(); ++*offset) chunk += lc->lines[*offset] + "\n";
      const bool finished = lc->done && *offset == lc->lines.size();
      lock.unlock();
      if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
      if (finished) sink.done();
      return true;
    });
  });

  s.Get(R"(/v1/cases/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
    auto id = req.matches[1].str();
    auto status = store_.status(id);
    if (!status) return send_error(res, 404, "unknown case " + id);
    if (auto report = store_.report(id)) return send_json(res, 200, Json{{"case_id", id}, {"report", *report}});
    if (*status == "running") return send_error(res, 409, "case " + id + " is still running");
    send_error(res, 422, "case " + id + " ended without a report");
  });

  s.Get("/v1/tools", [this](const httplib::Request& req, httplib::Response& res) {
    int tier = kMaxTier;
    if (req.has_param("tier")) {
      try {
        std::size_t used = 0;
        auto raw = req.get_param_value("tier");
        tier = std::stoi(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        return send_error(res, 400, "tier must be an integer 1..5");
      }
      if (tier < kMinTier || tier > kMaxTier) return send_error(res, 400, "tier must be an integer 1..5");
    }
    auto subset = runtime_.registry->tier_subset(tier);
    Json tools = Json::array();
    for (const auto& t : subset.tools()) tools.push_back(to_json(*t));
    send_json(res, 200, Json{{"tier", tier}, {"count", subset.size()}, {"tools", std::move(tools)}});
  });

  s.Post("/v1/feedback", [this](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::exception& e) {
      return send_error(res, 400, std::string("invalid JSON: ") + e.what());
    }
    auto v = validate_feedback(body);
    if (!v.ok()) return send_json(res, 422, Json{{"errors", field_errors_json(v.errors)}});
    if (!store_.status(v.record->case_id)) return send_error(res, 404, "unknown case " + v.record->case_id);
    auto id = store_.add_feedback(*v.record);
    send_json(res, 201, Json{{"feedback_id", id}, {"record", to_json(*v.record)}});
  });

  s.Get("/v1/feedback/schema", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, feedback_schema());
  });

  s.Post("/v1/uploads", [this](const httplib::Request&, httplib::Response& res) {
    if (!options_.enable_upload) return send_error(res, 404, "image upload is disabled");
    send_error(res, 501, "image upload is not implemented; reference pre-staged image ids");
  });
}

int Service::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void Service::wait() {
  if (listener_.joinable()) listener_.join();
}

void Service::stop() {
  if (stopping_.exchange(true)) {
    if (listener_.joinable()) listener_.join();
    return;
  }
  // Drain running cases before closing the listener so open streams finish.
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
  server_->stop();
  if (listener_.joinable()) listener_.join();
}

}  // namespace ocuflow::gateway

#include "ocuflow/adapters/backend.hpp"

#include "ocuflow/core/error.hpp"

namespace ocuflow {

Json make_request_document(std::string_view request_id, std::string_view tool_id,
                           const Json& inputs) {
  return Json{{"request_id", request_id}, {"tool_id", tool_id}, {"inputs", inputs}};
}

TransportResult TransportResult::ok(Json output, std::optional<double> latency) {
  TransportResult r;
  r.kind = Kind::Ok;
  r.output = std::move(output);
  r.latency_ms = latency;
  return r;
}

TransportResult TransportResult::transport_failure(std::string reason) {
  TransportResult r;
  r.kind = Kind::TransportFailure;
  r.error = std::move(reason);
  return r;
}

TransportResult TransportResult::tool_error(std::string reason) {
  TransportResult r;
  r.kind = Kind::ToolError;
  r.error = std::move(reason);
  return r;
}

TransportResult parse_response_document(const Json& response, std::string_view request_id) {
  if (!response.is_object() || !response.contains("status") || !response["status"].is_string()) {
    return TransportResult::transport_failure("malformed response document");
  }
  if (response.contains("request_id") && response["request_id"] != request_id) {
    return TransportResult::transport_failure("response request_id mismatch");
  }
  const auto status = response["status"].get<std::string>();
  if (status == "error") {
    auto reason = response.contains("error") && response["error"].is_string()
                      ? response["error"].get<std::string>()
                      : std::string("tool reported an error");
    return TransportResult::tool_error(std::move(reason));
  }
  if (status != "ok" || !response.contains("output")) {
    return TransportResult::transport_failure("malformed response document");
  }
  return TransportResult::ok(response["output"]);
}

void BackendRegistry::register_backend(std::string kind, BackendFactory factory) {
  if (factories_.contains(kind)) throw Error(ErrorCode::DuplicateBackendKind, kind);
  factories_.emplace(std::move(kind), std::move(factory));
}

bool BackendRegistry::has(std::string_view kind) const { return factories_.contains(kind); }

std::shared_ptr<Backend> BackendRegistry::backend_for(const AdapterBinding& binding) const {
  auto it = factories_.find(binding.kind);
  if (it == factories_.end()) return nullptr;
  std::lock_guard lock(cache_mutex_);
  auto key = std::make_pair(binding.kind, binding.locator);
  auto cached = cache_.find(key);
  if (cached != cache_.end()) return cached->second;
  auto backend = it->second(binding);
  cache_.emplace(std::move(key), backend);
  return backend;
}

}  // namespace ocuflow

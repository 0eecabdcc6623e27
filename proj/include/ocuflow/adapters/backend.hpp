#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "ocuflow/registry/descriptor.hpp"

namespace ocuflow {

// Wire documents shared by every transport:
//   request  {"request_id": str, "tool_id": str, "inputs": {...}}
//   response {"request_id": str, "status": "ok" | "error", "output": {...}, "error": str}
// A response with status "error" is a tool-level failure and is never retried.
Json make_request_document(std::string_view request_id, std::string_view tool_id,
                           const Json& inputs);

struct TransportResult {
  enum class Kind { Ok, TransportFailure, ToolError };

  Kind kind = Kind::TransportFailure;
  Json output;
  std::string error;
  // Backends that simulate work (fixtures) report their own latency.
  std::optional<double> latency_ms;

  static TransportResult ok(Json output, std::optional<double> latency = std::nullopt);
  static TransportResult transport_failure(std::string reason);
  static TransportResult tool_error(std::string reason);
};

// Interprets a response document; malformed documents are transport failures.
TransportResult parse_response_document(const Json& response, std::string_view request_id);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual TransportResult call(const ToolDescriptor& tool, const Json& request,
                               std::chrono::milliseconds deadline) = 0;
};

using BackendFactory = std::function<std::shared_ptr<Backend>(const AdapterBinding&)>;

class BackendRegistry {
 public:
  // Throws DuplicateBackendKind.
  void register_backend(std::string kind, BackendFactory factory);
  bool has(std::string_view kind) const;
  // nullptr when no factory is registered for the binding's kind. Instances
  // are cached per (kind, locator).
  std::shared_ptr<Backend> backend_for(const AdapterBinding& binding) const;

 private:
  std::map<std::string, BackendFactory, std::less<>> factories_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::string, std::string>, std::shared_ptr<Backend>> cache_;
};

}  // namespace ocuflow

#include "ocuflow/adapters/invoker.hpp"

#include "ocuflow/adapters/fixture_store.hpp"
#include "ocuflow/adapters/transport_backends.hpp"

namespace ocuflow {

std::string_view to_string(InvocationStatus s) noexcept {
  switch (s) {
    case InvocationStatus::Ok: return "ok";
    case InvocationStatus::ToolError: return "tool_error";
    case InvocationStatus::Timeout: return "timeout";
    case InvocationStatus::SchemaViolation: return "schema_violation";
  }
  return "tool_error";
}

Json to_json(const InvocationResult& r) {
  Json j{{"request_id", r.request_id},
         {"status", std::string(to_string(r.status))},
         {"latency_ms", r.latency_ms},
         {"attempts", r.attempts}};
  if (r.payload) j["payload"] = *r.payload;
  if (r.raw_payload) j["raw_payload"] = *r.raw_payload;
  if (!r.error.empty()) j["error"] = r.error;
  if (!r.violations.empty()) {
    Json v = Json::array();
    for (const auto& violation : r.violations) {
      v.push_back(Json{{"path", violation.path}, {"message", violation.message}});
    }
    j["violations"] = std::move(v);
  }
  return j;
}

ToolInvoker::ToolInvoker(std::shared_ptr<const BackendRegistry> backends, RetryPolicy policy)
    : backends_(std::move(backends)), policy_(policy) {}

InvocationResult ToolInvoker::invoke(const ToolDescriptor& tool,
                                     const Invocation& invocation) const noexcept {
  try {
    return invoke_checked(tool, invocation);
  } catch (const std::exception& e) {
    InvocationResult r;
    r.request_id = invocation.request_id;
    r.status = InvocationStatus::ToolError;
    r.error = std::string("adapter failure: ") + e.what();
    return r;
  } catch (...) {
    InvocationResult r;
    r.request_id = invocation.request_id;
    r.status = InvocationStatus::ToolError;
    r.error = "adapter failure";
    return r;
  }
}

InvocationResult ToolInvoker::invoke_checked(const ToolDescriptor& tool,
                                             const Invocation& invocation) const {
  InvocationResult result;
  result.request_id = invocation.request_id;

  auto input_check = validate_io(tool, invocation.inputs, Direction::Input);
  if (!input_check.ok) {
    result.status = InvocationStatus::SchemaViolation;
    result.violations = std::move(input_check.violations);
    result.error = "input rejected by input_schema";
    return result;
  }

  auto backend = backends_ ? backends_->backend_for(tool.backend) : nullptr;
  if (!backend) {
    result.status = InvocationStatus::ToolError;
    result.error = "no backend for kind '" + tool.backend.kind + "'";
    return result;
  }

  auto deadline = invocation.deadline.count() > 0 ? invocation.deadline : tool.backend.timeout;
  auto request = make_request_document(invocation.request_id, tool.tool_id, input_check.normalized);
  const int max_attempts = 1 + std::max(0, policy_.max_retries);

  result.attempts = 0;
  TransportResult transport;
  while (result.attempts < max_attempts) {
    ++result.attempts;
    auto started = std::chrono::steady_clock::now();
    transport = backend->call(tool, request, deadline);
    result.latency_ms += transport.latency_ms.value_or(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count());
    if (transport.kind != TransportResult::Kind::TransportFailure) break;
  }

  switch (transport.kind) {
    case TransportResult::Kind::TransportFailure:
      result.status = InvocationStatus::Timeout;
      result.error = transport.error;
      return result;
    case TransportResult::Kind::ToolError:
      result.status = InvocationStatus::ToolError;
      result.error = transport.error;
      return result;
    case TransportResult::Kind::Ok:
      break;
  }

  auto output_check = validate_io(tool, transport.output, Direction::Output);
  if (!output_check.ok) {
    result.status = InvocationStatus::SchemaViolation;
    result.raw_payload = std::move(transport.output);
    result.violations = std::move(output_check.violations);
    result.error = "output rejected by output_schema";
    return result;
  }
  result.status = InvocationStatus::Ok;
  result.payload = std::move(output_check.normalized);
  return result;
}

std::shared_ptr<BackendRegistry> make_standard_backends(std::shared_ptr<const FixtureStore> fixtures) {
  auto backends = std::make_shared<BackendRegistry>();
  backends->register_backend("fixture", [fixtures](const AdapterBinding&) -> std::shared_ptr<Backend> {
    return std::make_shared<FixtureBackend>(fixtures);
  });
  backends->register_backend("subprocess", [](const AdapterBinding& b) -> std::shared_ptr<Backend> {
    return std::make_shared<SubprocessBackend>(b.locator);
  });
  backends->register_backend("http", [](const AdapterBinding& b) -> std::shared_ptr<Backend> {
    return std::make_shared<HttpBackend>(b.locator);
  });
  return backends;
}

}  // namespace ocuflow

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ocuflow/adapters/backend.hpp"
#include "ocuflow/registry/registry.hpp"

namespace ocuflow {

class FixtureStore;

enum class InvocationStatus { Ok, ToolError, Timeout, SchemaViolation };

std::string_view to_string(InvocationStatus s) noexcept;

struct Invocation {
  std::string tool_id;
  Json inputs = Json::object();
  std::string request_id;
  std::chrono::milliseconds deadline{0};  // 0: use the binding's timeout
};

struct InvocationResult {
  std::string request_id;
  InvocationStatus status = InvocationStatus::ToolError;
  std::optional<Json> payload;      // present iff status == Ok; validated
  std::optional<Json> raw_payload;  // kept on schema violations for the trace
  std::vector<Violation> violations;
  std::string error;
  double latency_ms = 0.0;  // summed over attempts
  int attempts = 1;

  bool ok() const noexcept { return status == InvocationStatus::Ok; }
};

Json to_json(const InvocationResult& r);

struct RetryPolicy {
  int max_retries = 2;  // transport failures only
};

// Reentrant; any number of threads may invoke concurrently.
class ToolInvoker {
 public:
  explicit ToolInvoker(std::shared_ptr<const BackendRegistry> backends, RetryPolicy policy = {});

  // Never throws. Inputs and outputs are gated by validate_io; retries happen
  // only on transport failure and end in status timeout.
  InvocationResult invoke(const ToolDescriptor& tool, const Invocation& invocation) const noexcept;

  const RetryPolicy& policy() const noexcept { return policy_; }

 private:
  InvocationResult invoke_checked(const ToolDescriptor& tool, const Invocation& invocation) const;

  std::shared_ptr<const BackendRegistry> backends_;
  RetryPolicy policy_;
};

// Registers the fixture, subprocess, and http backend kinds.
std::shared_ptr<BackendRegistry> make_standard_backends(std::shared_ptr<const FixtureStore> fixtures);

}  // namespace ocuflow

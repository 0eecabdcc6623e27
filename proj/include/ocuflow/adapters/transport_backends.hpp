#pragma once

#include <string>

#include "ocuflow/adapters/backend.hpp"

namespace ocuflow {

// Runs `locator` (an executable path, optionally followed by space-separated
// arguments) once per attempt. The request document is written to stdin as a
// single line; the response document is read from stdout. Exit code 0 means
// the transport succeeded; tool-level failures ride in the response.
class SubprocessBackend : public Backend {
 public:
  explicit SubprocessBackend(std::string locator) : locator_(std::move(locator)) {}
  TransportResult call(const ToolDescriptor& tool, const Json& request,
                       std::chrono::milliseconds deadline) override;

 private:
  std::string locator_;
};

// One POST per attempt to `locator` (http://host:port/path) with the request
// document as the body. HTTP 200 carries a response document.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string url);
  TransportResult call(const ToolDescriptor& tool, const Json& request,
                       std::chrono::milliseconds deadline) override;

 private:
  std::string origin_;
  std::string path_;
  bool valid_ = false;
};

}  // namespace ocuflow

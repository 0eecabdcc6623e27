#include <httplib.h>

#include "ocuflow/adapters/transport_backends.hpp"

namespace ocuflow {

HttpBackend::HttpBackend(std::string url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) return;
  auto slash = url.find('/', scheme + 3);
  origin_ = slash == std::string::npos ? url : url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
  valid_ = url.compare(0, scheme, "http") == 0;
}

TransportResult HttpBackend::call(const ToolDescriptor&, const Json& request,
                                  std::chrono::milliseconds deadline) {
  if (!valid_) return TransportResult::transport_failure("unsupported http locator");
  const auto started = std::chrono::steady_clock::now();
  httplib::Client client(origin_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(deadline);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(deadline - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(path_, request.dump(), "application/json");
  double latency = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

  TransportResult result;
  if (!res) {
    result = TransportResult::transport_failure("http: " + httplib::to_string(res.error()));
  } else if (res->status != 200) {
    result = TransportResult::transport_failure("http status " + std::to_string(res->status));
  } else {
    auto doc = Json::parse(res->body, nullptr, false);
    result = doc.is_discarded()
                 ? TransportResult::transport_failure("http response is not a document")
                 : parse_response_document(doc, request.value("request_id", std::string()));
  }
  result.latency_ms = latency;
  return result;
}

}  // namespace ocuflow

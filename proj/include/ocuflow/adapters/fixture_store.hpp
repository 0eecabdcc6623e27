#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "ocuflow/adapters/backend.hpp"

namespace ocuflow {

// Canned tool outputs keyed by image_id + canonicalized params. Read-only
// after loading; lookups are exact-match and deterministic.
//
// File format (one per tool):
//   {"tool_id": str, "default_output": {...}?,
//    "entries": [{"image_id": str, "params": {...}?, "latency_ms": num?,
//                 "output": {...} | "transport_error": str | "tool_error": str}]}
class FixtureStore {
 public:
  struct Entry {
    TransportResult::Kind kind = TransportResult::Kind::Ok;
    Json output;
    std::string error;
    double latency_ms = 0.0;
  };

  // Key for an inputs document {"image_id"?, "params"?, ...}. Only image_id
  // and params participate; data-flow context does not.
  static std::string input_key(const Json& inputs);
  static std::string input_key(std::string_view image_id, const Json& params);

  static FixtureStore load_dir(const std::filesystem::path& root);

  // Merges one fixture document. Throws SchemaViolation on malformed files.
  void add_document(const Json& doc);
  void add(const std::string& tool_id, std::string_view image_id, Json output,
           double latency_ms = 0.0, const Json& params = Json::object());
  void add_failure(const std::string& tool_id, std::string_view image_id,
                   TransportResult::Kind kind, std::string reason,
                   const Json& params = Json::object());
  void set_default(const std::string& tool_id, Json output);

  std::optional<Entry> lookup(std::string_view tool_id, const Json& inputs) const;
  bool has_tool(std::string_view tool_id) const;
  std::size_t entry_count() const;

 private:
  struct ToolFixtures {
    std::map<std::string, Entry> entries;
    std::optional<Json> default_output;
  };
  std::map<std::string, ToolFixtures, std::less<>> tools_;
};

class FixtureBackend : public Backend {
 public:
  explicit FixtureBackend(std::shared_ptr<const FixtureStore> store) : store_(std::move(store)) {}

  // Misses fall back to default_output when declared, else a tool error.
  TransportResult call(const ToolDescriptor& tool, const Json& request,
                       std::chrono::milliseconds deadline) override;

 private:
  std::shared_ptr<const FixtureStore> store_;
};

}  // namespace ocuflow

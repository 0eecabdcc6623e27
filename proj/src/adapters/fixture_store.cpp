#include "ocuflow/adapters/fixture_store.hpp"

#include <algorithm>
#include <fstream>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow {

std::string FixtureStore::input_key(std::string_view image_id, const Json& params) {
  const Json& p = params.is_null() ? Json::object() : params;
  return std::string(image_id) + "#" + text::hex64(text::fnv1a64(p.dump()));
}

std::string FixtureStore::input_key(const Json& inputs) {
  std::string image_id;
  Json params = Json::object();
  if (inputs.is_object()) {
    if (inputs.contains("image_id") && inputs["image_id"].is_string()) {
      image_id = inputs["image_id"].get<std::string>();
    }
    if (inputs.contains("params") && inputs["params"].is_object()) params = inputs["params"];
  }
  return input_key(image_id, params);
}

FixtureStore FixtureStore::load_dir(const std::filesystem::path& root) {
  FixtureStore store;
  if (!std::filesystem::is_directory(root)) {
    throw Error(ErrorCode::Io, "fixture root is not a directory: " + root.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    try {
      store.add_document(Json::parse(in));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, path.filename().string() + ": " + e.what());
    }
  }
  return store;
}

void FixtureStore::add_document(const Json& doc) {
  if (!doc.is_object() || !doc.contains("tool_id") || !doc["tool_id"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, "fixture.tool_id");
  }
  auto tool_id = doc["tool_id"].get<std::string>();
  if (doc.contains("default_output")) set_default(tool_id, doc["default_output"]);
  if (!doc.contains("entries")) return;
  for (const auto& e : doc["entries"]) {
    auto image_id = e.value("image_id", std::string());
    Json params = e.contains("params") ? e["params"] : Json::object();
    if (e.contains("transport_error")) {
      add_failure(tool_id, image_id, TransportResult::Kind::TransportFailure,
                  e["transport_error"].get<std::string>(), params);
    } else if (e.contains("tool_error")) {
      add_failure(tool_id, image_id, TransportResult::Kind::ToolError,
                  e["tool_error"].get<std::string>(), params);
    } else if (e.contains("output")) {
      add(tool_id, image_id, e["output"], e.value("latency_ms", 0.0), params);
    } else {
      throw Error(ErrorCode::SchemaViolation, "fixture." + tool_id + ".entries.output");
    }
  }
}

void FixtureStore::add(const std::string& tool_id, std::string_view image_id, Json output,
                       double latency_ms, const Json& params) {
  Entry entry{TransportResult::Kind::Ok, std::move(output), {}, latency_ms};
  tools_[tool_id].entries[input_key(image_id, params)] = std::move(entry);
}

void FixtureStore::add_failure(const std::string& tool_id, std::string_view image_id,
                               TransportResult::Kind kind, std::string reason,
                               const Json& params) {
  Entry entry{kind, Json(), std::move(reason), 0.0};
  tools_[tool_id].entries[input_key(image_id, params)] = std::move(entry);
}

void FixtureStore::set_default(const std::string& tool_id, Json output) {
  tools_[tool_id].default_output = std::move(output);
}

std::optional<FixtureStore::Entry> FixtureStore::lookup(std::string_view tool_id,
                                                        const Json& inputs) const {
  auto tool = tools_.find(tool_id);
  if (tool == tools_.end()) return std::nullopt;
  auto it = tool->second.entries.find(input_key(inputs));
  if (it != tool->second.entries.end()) return it->second;
  if (tool->second.default_output) {
    return Entry{TransportResult::Kind::Ok, *tool->second.default_output, {}, 0.0};
  }
  return std::nullopt;
}

bool FixtureStore::has_tool(std::string_view tool_id) const { return tools_.contains(tool_id); }

std::size_t FixtureStore::entry_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tools_) n += t.entries.size();
  return n;
}

TransportResult FixtureBackend::call(const ToolDescriptor& tool, const Json& request,
                                     std::chrono::milliseconds) {
  if (!store_) return TransportResult::tool_error("fixture store not loaded");
  auto entry = store_->lookup(tool.tool_id, request.value("inputs", Json::object()));
  if (!entry) return TransportResult::tool_error("no fixture for " + FixtureStore::input_key(request.value("inputs", Json::object())));
  switch (entry->kind) {
    case TransportResult::Kind::Ok: return TransportResult::ok(entry->output, entry->latency_ms);
    case TransportResult::Kind::ToolError: return TransportResult::tool_error(entry->error);
    case TransportResult::Kind::TransportFailure: {
      auto r = TransportResult::transport_failure(entry->error);
      r.latency_ms = entry->latency_ms;
      return r;
    }
  }
  return TransportResult::tool_error("unreachable");
}

}  // namespace ocuflow

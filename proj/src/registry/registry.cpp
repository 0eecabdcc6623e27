#include "ocuflow/registry/registry.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow {

namespace {

int specificity(const ToolDescriptor& d) {
  if (!d.conditions.empty()) return 2;
  if (d.role != ToolRole::GeneralPractitioner) return 1;
  return 0;
}

bool by_id(const ToolPtr& a, const ToolPtr& b) { return a->tool_id < b->tool_id; }

}  // namespace

std::vector<ToolPtr> resolve(std::span<const ToolPtr> tools, const ResolveQuery& q) {
  std::vector<ToolPtr> out;
  for (const auto& t : tools) {
    if (q.modality && !t->accepts_modality(*q.modality)) continue;
    if (q.modality && q.modality->is_unknown() && !t->accepts_any_modality()) continue;
    if (q.task && t->task != *q.task) continue;
    if (q.condition && !t->addresses(*q.condition)) continue;
    if (q.role && t->role != *q.role) continue;
    out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [](const ToolPtr& a, const ToolPtr& b) {
    auto sa = specificity(*a), sb = specificity(*b);
    if (sa != sb) return sa > sb;
    if (a->task != b->task) return a->task < b->task;
    return a->tool_id < b->tool_id;
  });
  return out;
}

Toolset::Toolset(int tier, std::vector<ToolPtr> tools) : tier_(tier), tools_(std::move(tools)) {
  std::sort(tools_.begin(), tools_.end(), by_id);
}

bool Toolset::contains(std::string_view tool_id) const { return find(tool_id) != nullptr; }

ToolPtr Toolset::find(std::string_view tool_id) const {
  auto it = std::lower_bound(tools_.begin(), tools_.end(), tool_id,
                             [](const ToolPtr& t, std::string_view id) { return t->tool_id < id; });
  if (it != tools_.end() && (*it)->tool_id == tool_id) return *it;
  return nullptr;
}

std::vector<ToolPtr> Toolset::resolve(const ResolveQuery& query) const {
  return ocuflow::resolve(tools_, query);
}

std::vector<ToolPtr> Toolset::with_function(ToolFunction f) const {
  std::vector<ToolPtr> out;
  for (const auto& t : tools_) {
    if (t->function == f) out.push_back(t);
  }
  return out;
}

std::vector<std::string> Toolset::ids() const {
  std::vector<std::string> out;
  out.reserve(tools_.size());
  for (const auto& t : tools_) out.push_back(t->tool_id);
  return out;
}

Registry Registry::load_catalog(const Json& catalog, LoadOptions options) {
  if (!catalog.is_object()) throw Error(ErrorCode::SchemaViolation, "catalog");
  if (!catalog.contains("schema_version") || !catalog["schema_version"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, "schema_version");
  }
  Registry reg;
  reg.schema_version_ = catalog["schema_version"].get<std::string>();
  int major = -1;
  try {
    major = std::stoi(text::split(reg.schema_version_, '.').front());
  } catch (const std::exception&) {
  }
  if (major != kSupportedSchemaMajor) {
    throw Error(ErrorCode::UnsupportedSchemaVersion, reg.schema_version_);
  }
  if (catalog.contains("modalities")) {
    for (const auto& m : catalog["modalities"]) {
      auto code = m.at("code").get<std::string>();
      if (reg.modalities_.contains(code)) continue;
      reg.modalities_.extend(code, m.value("aliases", std::vector<std::string>{}));
    }
  }
  if (!catalog.contains("tools") || !catalog["tools"].is_array()) {
    throw Error(ErrorCode::SchemaViolation, "tools");
  }
  std::set<std::string> ids;
  for (const auto& doc : catalog["tools"]) {
    auto d = std::make_shared<const ToolDescriptor>(parse_descriptor(doc));
    if (!ids.insert(d->tool_id).second) throw Error(ErrorCode::DuplicateToolId, d->tool_id);
    reg.tools_.push_back(std::move(d));
  }
  std::sort(reg.tools_.begin(), reg.tools_.end(), by_id);
  if (!options.allow_sparse_tiers) {
    for (int tier = kMinTier; tier <= kMaxTier; ++tier) {
      bool introduced = std::any_of(reg.tools_.begin(), reg.tools_.end(),
                                    [&](const ToolPtr& t) { return t->tier == tier; });
      if (!introduced) throw Error(ErrorCode::TierGap, "tier " + std::to_string(tier));
    }
  }
  reg.catalog_hash_ = text::hex64(text::fnv1a64(catalog.dump()));
  return reg;
}

Registry Registry::load_file(const std::filesystem::path& path, LoadOptions options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open catalog " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("catalog parse: ") + e.what());
  }
  return load_catalog(doc, options);
}

ToolPtr Registry::find(std::string_view tool_id) const {
  auto it = std::lower_bound(tools_.begin(), tools_.end(), tool_id,
                             [](const ToolPtr& t, std::string_view id) { return t->tool_id < id; });
  if (it != tools_.end() && (*it)->tool_id == tool_id) return *it;
  return nullptr;
}

std::vector<ToolPtr> Registry::resolve(const ResolveQuery& query) const {
  return ocuflow::resolve(tools_, query);
}

Toolset Registry::tier_subset(int tier) const {
  if (tier < kMinTier || tier > kMaxTier) {
    throw Error(ErrorCode::TierOutOfRange, std::to_string(tier));
  }
  std::vector<ToolPtr> subset;
  for (const auto& t : tools_) {
    if (t->tier <= tier) subset.push_back(t);
  }
  return Toolset(tier, std::move(subset));
}

std::array<std::size_t, kMaxTier> Registry::tier_sizes() const {
  std::array<std::size_t, kMaxTier> sizes{};
  for (int tier = kMinTier; tier <= kMaxTier; ++tier) sizes[tier - 1] = tier_subset(tier).size();
  return sizes;
}

}  // namespace ocuflow

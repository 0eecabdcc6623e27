#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocuflow/registry/descriptor.hpp"

namespace ocuflow {

using ToolPtr = std::shared_ptr<const ToolDescriptor>;

struct ResolveQuery {
  std::optional<Modality> modality;
  std::optional<TaskType> task;
  std::optional<std::string> condition;
  std::optional<ToolRole> role;
};

// Matches every provided criterion. Ordered by tool specificity (condition
// specific > non-GP role > general), then task family, then tool_id.
std::vector<ToolPtr> resolve(std::span<const ToolPtr> tools, const ResolveQuery& query);

class Toolset {
 public:
  Toolset() = default;
  Toolset(int tier, std::vector<ToolPtr> tools);

  int tier() const noexcept { return tier_; }
  const std::vector<ToolPtr>& tools() const noexcept { return tools_; }
  std::size_t size() const noexcept { return tools_.size(); }
  bool empty() const noexcept { return tools_.empty(); }
  bool contains(std::string_view tool_id) const;
  ToolPtr find(std::string_view tool_id) const;
  std::vector<ToolPtr> resolve(const ResolveQuery& query) const;
  std::vector<ToolPtr> with_function(ToolFunction f) const;
  std::vector<std::string> ids() const;

 private:
  int tier_ = 0;
  std::vector<ToolPtr> tools_;  // sorted by tool_id
};

struct LoadOptions {
  bool allow_sparse_tiers = false;
};

inline constexpr int kMinTier = 1;
inline constexpr int kMaxTier = 5;
inline constexpr int kSupportedSchemaMajor = 1;

// Immutable once loaded; safe for concurrent reads.
class Registry {
 public:
  // Catalog document: {schema_version: "1.x", modalities?: [{code, aliases?}],
  // tools: [descriptor...]}. Throws DuplicateToolId, MalformedDescriptor,
  // TierGap, UnsupportedSchemaVersion.
  static Registry load_catalog(const Json& catalog, LoadOptions options = {});
  static Registry load_file(const std::filesystem::path& path, LoadOptions options = {});

  std::size_t size() const noexcept { return tools_.size(); }
  const std::vector<ToolPtr>& tools() const noexcept { return tools_; }
  ToolPtr find(std::string_view tool_id) const;
  std::vector<ToolPtr> resolve(const ResolveQuery& query) const;

  // Cumulative: every tool introduced at a tier <= `tier`. Throws TierOutOfRange.
  Toolset tier_subset(int tier) const;
  std::array<std::size_t, kMaxTier> tier_sizes() const;

  const ModalityCatalog& modalities() const noexcept { return modalities_; }
  const std::string& schema_version() const noexcept { return schema_version_; }
  // Content hash of the canonical catalog document.
  const std::string& catalog_hash() const noexcept { return catalog_hash_; }

 private:
  std::vector<ToolPtr> tools_;
  ModalityCatalog modalities_;
  std::string schema_version_;
  std::string catalog_hash_;
};

enum class Direction { Input, Output };

struct ValidationResult {
  bool ok = false;
  Json normalized;
  std::vector<Violation> violations;
};

// Structural schema check plus the semantic invariants of the tool's output
// kind (ranked order, count == |areas|, avr consistency, ordinal range).
// Total: never throws, whatever the payload.
ValidationResult validate_io(const ToolDescriptor& descriptor, const Json& payload,
                             Direction direction);

}  // namespace ocuflow

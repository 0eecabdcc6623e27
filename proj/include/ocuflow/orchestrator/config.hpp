#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ocuflow/core/json_io.hpp"

namespace ocuflow {

// Condition -> recommendation text. Lookup is case-insensitive on the
// diagnosis label first, then its parent condition, then the fallback.
class RecommendationTable {
 public:
  static constexpr std::string_view kDefault = "clinical correlation advised; follow up with an eye care professional";

  RecommendationTable() = default;
  // {"default": str?, "conditions": {label: text}}
  static RecommendationTable from_json(const Json& doc);
  static RecommendationTable load(const std::filesystem::path& path);

  void set(std::string condition, std::string text);
  std::string lookup(std::string_view label, std::string_view parent = {}) const;

 private:
  std::map<std::string, std::string> entries_;
  std::string fallback_{kDefault};
};

struct OrchestratorConfig {
  double conflict_margin = 0.2;
  int revision_rounds = 2;
  double classification_threshold = 0.3;
  std::size_t parallelism = 4;
  std::uint64_t seed = 0;

  // When the retrieval tool is active, which workflows consult it.
  bool rag_for_education = true;
  bool rag_for_conflict = true;
  bool rag_for_report = true;
  std::size_t rag_k = 3;

  // Modalities whose laterality is read by the laterality classifier; other
  // modalities take laterality from the image metadata hint.
  std::set<std::string> laterality_modalities{"CFP", "SLO", "UWF-SLO", "FAF", "FFA", "ICGA"};
  // Specialists consulted when the query asserts a disease that screening
  // does not see.
  std::vector<std::string> verification_panel{"age-related macular degeneration",
                                              "diabetic retinopathy", "glaucoma"};
  RecommendationTable recommendations;
};

}  // namespace ocuflow

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "ocuflow/core/json_io.hpp"
#include "ocuflow/core/model.hpp"

namespace ocuflow {

enum class Workflow {
  HierarchicalDecision,
  QuantitativeAnalysis,
  MedicalEducation,
  ConflictResolution,
  CrossSpecialtyLongitudinal,
};

std::string_view to_string(Workflow w) noexcept;

// task_params keys in use:
//   lesion           target lesion type for quantitative analysis
//   horizon          risk horizon, e.g. "5y"
//   systemic_target  cardiovascular | age | sex
//   vessels          "true" when vessel quantification was requested
//   generate         3d | FFA | OCT | ICGA | CFP | video | report | image
//   label_lesions    "true" when the query asks for lesion labelling
//   claimed_condition  condition the user asserts ("I have ...")
struct Intent {
  Workflow workflow = Workflow::HierarchicalDecision;
  std::map<std::string, std::string> task_params;
  std::string raw_query;

  std::optional<std::string> param(std::string_view key) const;
  bool flag(std::string_view key) const { return param(key) == "true"; }
};

// Deterministic keyword mapping; unmatched queries are HierarchicalDecision.
Intent interpret_query(const ClinicalCase& c);

Json to_json(const Intent& intent);

}  // namespace ocuflow

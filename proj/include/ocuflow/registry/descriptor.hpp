#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocuflow/core/json_io.hpp"
#include "ocuflow/core/model.hpp"
#include "ocuflow/registry/schema.hpp"

namespace ocuflow {

enum class ToolRole { GeneralPractitioner, RetinaSpecialist, MedicalEducator, CrossSpecialtyAnalyzer };

enum class TaskType { Classification, Segmentation, Detection, Regression, Generation, Retrieval };

// What a tool does inside a workflow. The planner and the integrator key on
// this; `task` only describes the output family.
enum class ToolFunction {
  Modality,
  Quality,
  Laterality,
  Screening,
  Triage,
  Specialist,
  Segmentation,
  VesselAnalysis,
  Detection,
  RiskRegression,
  Demographic,
  Generation,
  Report,
  Retrieval,
};

enum class OutputKind { Classification, Lesions, Detections, Scalar, VesselMetrics, Artifact, Passages };

enum class InputKind { Image, Text };

std::string_view to_string(ToolRole r) noexcept;
std::string_view to_string(TaskType t) noexcept;
std::string_view to_string(ToolFunction f) noexcept;
std::string_view to_string(OutputKind k) noexcept;
std::optional<ToolRole> parse_role(std::string_view s) noexcept;
std::optional<TaskType> parse_task(std::string_view s) noexcept;
std::optional<ToolFunction> parse_function(std::string_view s) noexcept;

struct AdapterBinding {
  std::string kind;  // fixture | subprocess | http | knowledge | any registered kind
  std::string locator;
  std::chrono::milliseconds timeout{5000};
};

// Facts the planner knows about an image: modality, quality, laterality, ...
using FactSet = std::map<std::string, std::string>;

enum class Truth { True, False, Unknown };

// Machine-checkable usage condition over trace facts.
struct UsageCondition {
  enum class Op { Known, Equals, In, NotIn };

  std::string fact;
  Op op = Op::Known;
  std::vector<std::string> values;

  // Unknown when the fact has not been established yet.
  Truth evaluate(const FactSet& facts) const;
  Json to_json() const;
};

Truth evaluate_all(const std::vector<UsageCondition>& conditions, const FactSet& facts);

inline constexpr std::string_view kAnyModality = "*";

struct ToolDescriptor {
  std::string tool_id;
  std::string display_name;
  ToolRole role = ToolRole::GeneralPractitioner;
  TaskType task = TaskType::Classification;
  ToolFunction function = ToolFunction::Screening;
  InputKind input = InputKind::Image;
  std::vector<std::string> modalities;   // codes; "*" accepts any image
  std::vector<std::string> conditions;   // lowercase; empty = general
  std::vector<std::string> lesion_types; // segmentation targets, lowercase
  Schema input_schema;
  Schema output_schema;
  std::vector<UsageCondition> usage_conditions;
  std::string usage_note;
  std::optional<double> threshold;
  int tier = 1;
  AdapterBinding backend;
  // Generators: modality code of the synthesized artifact (e.g. "FFA").
  std::optional<std::string> generation_target;
  std::optional<ArtifactKind> artifact_kind;
  // Specialist labels -> the screening-level condition they refine.
  std::map<std::string, std::string> label_parents;

  OutputKind output_kind() const noexcept;
  bool is_image_tool() const noexcept { return input == InputKind::Image; }
  bool accepts_modality(const Modality& m) const;
  bool accepts_any_modality() const;
  bool addresses(std::string_view condition) const;
  bool segments(std::string_view lesion_type) const;
  // Parent condition of a label, lowercase; the label itself when unmapped.
  std::string parent_condition(std::string_view label) const;
  double effective_threshold() const noexcept {
    return threshold.value_or(kDefaultClassificationThreshold);
  }
};

// Throws Error(MalformedDescriptor, "<tool_id>: <reason>").
ToolDescriptor parse_descriptor(const Json& doc);
Json to_json(const ToolDescriptor& d);

}  // namespace ocuflow

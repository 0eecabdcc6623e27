#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocuflow/adapters/invoker.hpp"
#include "ocuflow/orchestrator/plan.hpp"
#include "ocuflow/registry/registry.hpp"

namespace ocuflow {

enum class StepState { Ok, Failed, Skipped };

std::string_view to_string(StepState s) noexcept;

struct StepRecord {
  PlanStep step;
  ToolPtr tool;          // null when the tool is outside the active toolset
  std::string image_id;  // resolved subject image; empty for text tools
  StepState state = StepState::Skipped;
  std::optional<InvocationResult> result;  // absent for skipped steps
  std::string skip_reason;

  bool ok() const noexcept { return state == StepState::Ok; }
  const Json& payload() const { return *result->payload; }
};

// Fact keys written per image: modality, modality_hint, quality, laterality,
// laterality_hint, screening, generated, source_image.
struct ExecutionState {
  std::vector<StepRecord> records;
  std::map<std::string, FactSet> facts;  // image_id -> facts
  std::size_t next_step_index = 1;

  const StepRecord* find(std::string_view step_id) const;
  // Any record (executed or skipped) of `tool_id` on `image_id`.
  bool attempted(std::string_view tool_id, std::string_view image_id) const;
  // Last successful record of a tool function on an image.
  const StepRecord* ok_record(ToolFunction f, std::string_view image_id) const;
  std::string fact(std::string_view image_id, const std::string& key) const;
  std::vector<std::string> invoked_tools() const;
};

enum class ConflictResolution { SpecialistOverrides, GenerationVerified, EscalatedUnresolved };

std::string_view to_string(ConflictResolution r) noexcept;

struct ConflictParty {
  std::string tool_id;
  std::string step_id;
  std::string label;
  double probability = 0.0;
};

struct ConflictRecord {
  std::string topic;
  std::string image_id;
  std::vector<ConflictParty> parties;  // [screening, specialist]
  std::optional<ConflictResolution> resolution;
  std::vector<std::string> resolving_steps;
  std::string rescreen_step;  // empty when no generation tool was available
  int round_detected = 0;
};

Json to_json(const ConflictRecord& c);

}  // namespace ocuflow

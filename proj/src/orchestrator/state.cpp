#include "ocuflow/orchestrator/state.hpp"

#include <algorithm>

namespace ocuflow {

std::string_view to_string(StepState s) noexcept {
  switch (s) {
    case StepState::Ok: return "ok";
    case StepState::Failed: return "failed";
    case StepState::Skipped: return "skipped";
  }
  return "skipped";
}

const StepRecord* ExecutionState::find(std::string_view step_id) const {
  for (const auto& r : records) {
    if (r.step.step_id == step_id) return &r;
  }
  return nullptr;
}

bool ExecutionState::attempted(std::string_view tool_id, std::string_view image_id) const {
  return std::any_of(records.begin(), records.end(), [&](const StepRecord& r) {
    return r.step.tool_id == tool_id && r.image_id == image_id;
  });
}

const StepRecord* ExecutionState::ok_record(ToolFunction f, std::string_view image_id) const {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->ok() && it->tool && it->tool->function == f && it->image_id == image_id) return &*it;
  }
  return nullptr;
}

std::string ExecutionState::fact(std::string_view image_id, const std::string& key) const {
  auto it = facts.find(std::string(image_id));
  if (it == facts.end()) return {};
  auto f = it->second.find(key);
  return f == it->second.end() ? std::string() : f->second;
}

std::vector<std::string> ExecutionState::invoked_tools() const {
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (r.result) ids.push_back(r.step.tool_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::string_view to_string(ConflictResolution r) noexcept {
  switch (r) {
    case ConflictResolution::SpecialistOverrides: return "specialist_overrides";
    case ConflictResolution::GenerationVerified: return "generation_verified";
    case ConflictResolution::EscalatedUnresolved: return "escalated_unresolved";
  }
  return "escalated_unresolved";
}

Json to_json(const ConflictRecord& c) {
  Json parties = Json::array();
  for (const auto& p : c.parties) {
    parties.push_back(Json{{"tool_id", p.tool_id},
                           {"step_id", p.step_id},
                           {"label", p.label},
                           {"probability", p.probability}});
  }
  return Json{{"topic", c.topic},
              {"image_id", c.image_id},
              {"parties", std::move(parties)},
              {"resolution", c.resolution ? Json(to_string(*c.resolution)) : Json()},
              {"resolving_steps", c.resolving_steps},
              {"round", c.round_detected}};
}

}  // namespace ocuflow

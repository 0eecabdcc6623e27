#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ocuflow/core/json_io.hpp"
#include "ocuflow/registry/descriptor.hpp"

namespace ocuflow {

enum class StageTag { Interpret, Plan, Execute, Integrate, Respond };
enum class StepOrigin { Initial, Revision };

inline constexpr std::array<StageTag, 5> kStages{StageTag::Interpret, StageTag::Plan, StageTag::Execute,
                                                  StageTag::Integrate, StageTag::Respond};

std::string_view to_string(StageTag s) noexcept;
std::string_view to_string(StepOrigin o) noexcept;

// Where a step parameter comes from.
struct Binding {
  enum class Source { CaseImage, CaseQuery, StepOutput, Literal };

  Source source = Source::Literal;
  std::string ref;   // image_id (CaseImage) or step_id (StepOutput)
  std::string path;  // JSON pointer into the step payload (StepOutput)
  Json literal;

  static Binding image(std::string image_id) { return {Source::CaseImage, std::move(image_id), {}, {}}; }
  static Binding query() { return {Source::CaseQuery, {}, {}, {}}; }
  static Binding output(std::string step_id, std::string pointer = "") {
    return {Source::StepOutput, std::move(step_id), std::move(pointer), {}};
  }
  static Binding value(Json v) { return {Source::Literal, {}, {}, std::move(v)}; }

  friend bool operator==(const Binding&, const Binding&) = default;
};

Json to_json(const Binding& b);

// Parameters "image_id", "text", and "params" map onto the tool request
// fields of the same name; every other binding lands in "context".
struct PlanStep {
  std::string step_id;
  std::string tool_id;
  std::map<std::string, Binding> input_bindings;
  std::string rationale;
  StageTag stage_tag = StageTag::Execute;
  StepOrigin origin = StepOrigin::Initial;
  int round = 0;  // revision round that added the step; 0 for the initial plan
  // Planner-imposed preconditions, checked against the subject image's facts
  // in addition to the tool's own usage conditions.
  std::vector<UsageCondition> guards;

  std::set<std::string> dependencies() const;
};

Json to_json(const PlanStep& s);

class ToolPlan {
 public:
  // Throws InvalidArgument if the step id repeats or a binding references a
  // step that is not earlier in the plan.
  void add(PlanStep step);
  void append(std::vector<PlanStep> steps);

  const std::vector<PlanStep>& steps() const noexcept { return steps_; }
  bool empty() const noexcept { return steps_.empty(); }
  std::size_t size() const noexcept { return steps_.size(); }
  const PlanStep* find(std::string_view step_id) const;

  // (from, to): `to` consumes an output of `from`.
  std::vector<std::pair<std::string, std::string>> edges() const;
  // True when the dependency graph is acyclic with every endpoint present.
  bool is_dag() const;

  std::vector<std::string> warnings;

 private:
  std::vector<PlanStep> steps_;
};

Json to_json(const ToolPlan& plan);

// "s01", "s02", ...
std::string make_step_id(std::size_t index);

}  // namespace ocuflow

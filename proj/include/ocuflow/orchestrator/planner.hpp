#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocuflow/orchestrator/config.hpp"
#include "ocuflow/orchestrator/intent.hpp"
#include "ocuflow/orchestrator/plan.hpp"
#include "ocuflow/orchestrator/state.hpp"

namespace ocuflow {

struct PlanningContext {
  const ClinicalCase& clinical_case;
  const Intent& intent;
  const Toolset& toolset;
  const OrchestratorConfig& config;
  const ModalityCatalog& modalities;
};

struct RevisionContext {
  PlanningContext planning;
  const ExecutionState& state;
  std::span<const ConflictRecord> conflicts;  // already recorded
  int round = 1;
};

struct RevisionProposal {
  std::vector<PlanStep> steps;
  std::vector<ConflictRecord> conflicts;
  std::vector<std::string> reasons;

  bool empty() const noexcept { return steps.empty() && conflicts.empty(); }
};

// Planning seam. The rule planner is the reference; other providers (for
// example a language-model planner) implement the same two calls.
class PlannerProvider {
 public:
  virtual ~PlannerProvider() = default;
  virtual std::string_view name() const noexcept = 0;
  // Step ids must start at make_step_id(1).
  virtual ToolPlan propose_plan(const PlanningContext& ctx) = 0;
  // Step ids must continue from ctx.state.next_step_index.
  virtual RevisionProposal propose_revision(const RevisionContext& ctx) = 0;
};

// Throws NoApplicableTools when the toolset is empty. A workflow whose tools
// are missing from the toolset yields a degraded plan with warnings.
ToolPlan build_plan(const PlanningContext& ctx);

// Specialist rule, conflict rule, and critical-path schema-violation repair.
RevisionProposal verify_and_revise(const RevisionContext& ctx);

class RulePlanner final : public PlannerProvider {
 public:
  std::string_view name() const noexcept override { return "rules"; }
  ToolPlan propose_plan(const PlanningContext& ctx) override { return build_plan(ctx); }
  RevisionProposal propose_revision(const RevisionContext& ctx) override { return verify_and_revise(ctx); }
};

// Replays recorded planner responses:
//   {"plans": {case_id: [step...]}, "revisions": {case_id: [[step...], ...]}}
// where a step is {step_id, tool_id, input_bindings: {param: binding}, rationale?}
// and a binding is {"case_image": id} | {"case_query": true} |
// {"step": id, "path": ptr} | {"value": any}.
class RecordedPlanner final : public PlannerProvider {
 public:
  explicit RecordedPlanner(Json recording) : recording_(std::move(recording)) {}
  static RecordedPlanner load(const std::filesystem::path& path);

  std::string_view name() const noexcept override { return "llm-stub"; }
  ToolPlan propose_plan(const PlanningContext& ctx) override;
  RevisionProposal propose_revision(const RevisionContext& ctx) override;

 private:
  Json recording_;
};

PlanStep step_from_json(const Json& doc);
Binding binding_from_json(const Json& doc);

}  // namespace ocuflow

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ocuflow/adapters/invoker.hpp"
#include "ocuflow/orchestrator/config.hpp"
#include "ocuflow/orchestrator/findings.hpp"
#include "ocuflow/orchestrator/intent.hpp"
#include "ocuflow/orchestrator/plan.hpp"
#include "ocuflow/orchestrator/planner.hpp"
#include "ocuflow/orchestrator/state.hpp"
#include "ocuflow/orchestrator/trace.hpp"

namespace ocuflow {

struct RunOutcome {
  std::shared_ptr<ReasoningTrace> trace;
  Intent intent;
  ToolPlan plan;  // initial plan plus every revision step, in execution order
  ExecutionState state;
  IntegratedFindings findings;
  std::optional<StructuredReport> report;  // absent when orchestration failed
  std::string error;
  int revision_rounds = 0;

  std::vector<std::string> invoked_tools() const { return state.invoked_tools(); }
};

// One orchestration per call; calls are independent and may run concurrently.
class Orchestrator {
 public:
  Orchestrator(std::shared_ptr<const Registry> registry, std::shared_ptr<const ToolInvoker> invoker,
               OrchestratorConfig config, std::shared_ptr<PlannerProvider> planner = nullptr);

  // Interpret, plan, execute with verification, integrate, respond. Never
  // throws for per-case problems: the trace then ends in a failure event.
  // `trace` lets a caller subscribe before the first event is written.
  RunOutcome run(const ClinicalCase& c, int tier, std::shared_ptr<ReasoningTrace> trace = nullptr) const;
  RunOutcome run(const ClinicalCase& c, const Toolset& toolset,
                 std::shared_ptr<ReasoningTrace> trace = nullptr) const;

  TraceHeader header_for(const ClinicalCase& c, int tier) const;

  const OrchestratorConfig& config() const noexcept { return config_; }
  const Registry& registry() const noexcept { return *registry_; }

 private:
  std::shared_ptr<const Registry> registry_;
  std::shared_ptr<const ToolInvoker> invoker_;
  OrchestratorConfig config_;
  std::shared_ptr<PlannerProvider> planner_;
};

}  // namespace ocuflow

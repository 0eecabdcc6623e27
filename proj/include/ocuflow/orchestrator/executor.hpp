#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ocuflow/adapters/invoker.hpp"
#include "ocuflow/orchestrator/config.hpp"
#include "ocuflow/orchestrator/state.hpp"
#include "ocuflow/orchestrator/trace.hpp"

namespace ocuflow {

std::string request_id_for(std::uint64_t seed, std::string_view case_id, std::string_view step_id);

// Runs plan steps in dependency waves. Steps within a wave are invoked
// concurrently (bounded by config.parallelism) but their events are appended
// in (completion time, plan order), so the trace is independent of thread
// scheduling. Timestamps are logical: wave start plus reported latency.
class Executor {
 public:
  Executor(const ClinicalCase& c, const Toolset& toolset, const ToolInvoker& invoker,
           ReasoningTrace& trace, const OrchestratorConfig& config,
           const ModalityCatalog& modalities = ModalityCatalog::standard());

  // Records the case's metadata hints as facts.
  static void seed_facts(const ClinicalCase& c, ExecutionState& state);

  void run(std::span<const PlanStep> steps, ExecutionState& state);

 private:
  struct Prepared {
    const PlanStep* step = nullptr;
    ToolPtr tool;
    std::string image_id;
    Json inputs;
    std::string skip_reason;
  };

  Prepared prepare(const PlanStep& step, const ExecutionState& state) const;
  void record_facts(const StepRecord& record, ExecutionState& state) const;
  void skip(const PlanStep& step, ToolPtr tool, std::string image_id, std::string reason,
            ExecutionState& state);

  const ClinicalCase& case_;
  const Toolset& toolset_;
  const ToolInvoker& invoker_;
  ReasoningTrace& trace_;
  const OrchestratorConfig& config_;
  const ModalityCatalog& modalities_;
};

}  // namespace ocuflow

#include "ocuflow/orchestrator/orchestrator.hpp"

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"
#include "ocuflow/orchestrator/executor.hpp"

namespace ocuflow {

namespace {

Json stage(StageTag s) { return Json{{"stage", to_string(s)}}; }

Json steps_json(const std::vector<PlanStep>& steps) {
  Json out = Json::array();
  for (const auto& s : steps) out.push_back(to_json(s));
  return out;
}

}  // namespace

Orchestrator::Orchestrator(std::shared_ptr<const Registry> registry, std::shared_ptr<const ToolInvoker> invoker,
                           OrchestratorConfig config, std::shared_ptr<PlannerProvider> planner)
    : registry_(std::move(registry)), invoker_(std::move(invoker)), config_(std::move(config)),
      planner_(planner ? std::move(planner) : std::make_shared<RulePlanner>()) {}

TraceHeader Orchestrator::header_for(const ClinicalCase& c, int tier) const {
  return TraceHeader{c.case_id, config_.seed, registry_->catalog_hash(), tier};
}

RunOutcome Orchestrator::run(const ClinicalCase& c, int tier, std::shared_ptr<ReasoningTrace> trace) const {
  return run(c, registry_->tier_subset(tier), std::move(trace));
}

RunOutcome Orchestrator::run(const ClinicalCase& c, const Toolset& toolset,
                             std::shared_ptr<ReasoningTrace> trace) const {
  RunOutcome out;
  out.trace = trace ? std::move(trace) : std::make_shared<ReasoningTrace>(header_for(c, toolset.tier()));
  auto& tr = *out.trace;
  const auto& modalities = registry_->modalities();

  try {
    // interpret
    out.intent = interpret_query(c);
    auto j = stage(StageTag::Interpret);
    j["intent"] = to_json(out.intent);
    tr.append(EventKind::StageEnter, std::move(j), tr.now());

    // plan
    tr.append(EventKind::StageEnter, stage(StageTag::Plan), tr.now());
    PlanningContext pctx{c, out.intent, toolset, config_, modalities};
    try {
      out.plan = planner_->propose_plan(pctx);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoApplicableTools) throw;
      out.plan = ToolPlan{};
      out.plan.warnings.push_back(std::string("NoApplicableTools: ") + e.detail());
    }
    if (!out.plan.is_dag()) throw Error(ErrorCode::InvalidArgument, "planner produced a cyclic plan");
    for (const auto& w : out.plan.warnings) {
      tr.append(EventKind::Warning, Json{{"stage", "plan"}, {"message", w}}, tr.now());
    }

    // execute, verify, revise
    j = stage(StageTag::Execute);
    j["planner"] = planner_->name();
    j["plan"] = to_json(out.plan);
    tr.append(EventKind::StageEnter, std::move(j), tr.now());

    Executor executor(c, toolset, *invoker_, tr, config_, modalities);
    Executor::seed_facts(c, out.state);
    out.state.next_step_index = out.plan.size() + 1;
    executor.run(out.plan.steps(), out.state);

    std::vector<ConflictRecord> conflicts;
    const int max_rounds = std::max(0, config_.revision_rounds);
    for (int round = 1; round <= max_rounds + 1; ++round) {
      RevisionContext rctx{pctx, out.state, conflicts, round};
      auto proposal = planner_->propose_revision(rctx);
      for (auto& k : proposal.conflicts) {
        if (round > max_rounds) k.resolution = ConflictResolution::EscalatedUnresolved;
        tr.append(EventKind::ConflictDetected, to_json(k), tr.now());
        conflicts.push_back(std::move(k));
      }
      if (proposal.steps.empty()) break;
      if (round > max_rounds) {
        tr.append(EventKind::Warning,
                  Json{{"stage", "execute"},
                       {"message", "revision rounds exhausted; " + std::to_string(proposal.steps.size()) +
                                       " proposed steps not executed"}},
                  tr.now());
        break;
      }
      tr.append(EventKind::Revision,
                Json{{"round", round}, {"reasons", proposal.reasons}, {"steps", steps_json(proposal.steps)}},
                tr.now());
      out.state.next_step_index += proposal.steps.size();
      const auto first_new = out.plan.size();
      out.plan.append(std::move(proposal.steps));
      std::vector<PlanStep> batch(out.plan.steps().begin() + static_cast<std::ptrdiff_t>(first_new),
                                  out.plan.steps().end());
      executor.run(batch, out.state);
      out.revision_rounds = round;
    }
    resolve_conflicts(conflicts, out.state, max_rounds);

    // integrate
    tr.append(EventKind::StageEnter, stage(StageTag::Integrate), tr.now());
    out.findings = integrate(c, out.state, conflicts, config_);
    if (auto claimed = out.intent.param("claimed_condition")) out.findings.claimed_condition = *claimed;

    // respond
    tr.append(EventKind::StageEnter, stage(StageTag::Respond), tr.now());
    std::optional<GroundingOutcome> grounding;
    auto rag_tools = toolset.with_function(ToolFunction::Retrieval);
    // A normal finding has no disease literature to cite.
    if (config_.rag_for_report && !rag_tools.empty() && !out.findings.diagnosis.empty() &&
        text::normalize(out.findings.diagnosis.front().label) != "normal") {
      const auto claim = out.findings.diagnosis.front().label;
      PlanStep step;
      step.step_id = make_step_id(out.state.next_step_index++);
      step.tool_id = rag_tools.front()->tool_id;
      step.input_bindings = {{"text", Binding::value(claim)},
                             {"params", Binding::value(Json{{"k", config_.rag_k}})}};
      step.rationale = "ground the diagnosis in reference literature";
      step.stage_tag = StageTag::Respond;
      out.plan.add(step);
      executor.run(std::span<const PlanStep>(&out.plan.steps().back(), 1), out.state);
      const auto& rec = out.state.records.back();
      if (rec.ok()) {
        auto hits = hits_from_payload(rec.payload());
        auto result = kb::ground(hits, rec.payload().value("score_floor", 0.0));
        for (const auto& cit : result.citations) {
          double score = 0.0;
          for (const auto& h : hits) {
            if (h.passage.passage_id == cit.passage_id) score = h.score;
          }
          tr.append(EventKind::Citation,
                    Json{{"step_id", rec.step.step_id},
                         {"claim", claim},
                         {"source_id", cit.source_id},
                         {"passage_id", cit.passage_id},
                         {"score", score}},
                    tr.now());
        }
        grounding = GroundingOutcome{rec.step.step_id, claim, std::move(result)};
        // Passages from the grounding step join the findings for the report.
        out.findings.passages.push_back(
            {rec.step.step_id, claim, std::move(hits), rec.payload().value("score_floor", 0.0)});
      }
    }
    auto report = respond(c, out.findings, out.state, grounding, config_);
    validate_report(report);
    tr.append(EventKind::FinalReport, Json{{"report", to_json(report)}, {"findings", to_json(out.findings)}},
              tr.now());
    out.report = std::move(report);
  } catch (const std::exception& e) {
    out.error = e.what();
    tr.append(EventKind::Failure, Json{{"error", out.error}}, tr.now());
  }
  return out;
}

}  // namespace ocuflow

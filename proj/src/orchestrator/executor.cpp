#include "ocuflow/orchestrator/executor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "ocuflow/core/text.hpp"

namespace ocuflow {

namespace {

std::optional<Json> resolve_binding(const Binding& b, const ClinicalCase& c, const ExecutionState& state,
                                    std::string& why) {
  switch (b.source) {
    case Binding::Source::CaseImage:
      if (c.find_image(b.ref) || state.facts.contains(b.ref)) return Json(b.ref);
      why = "unknown image " + b.ref;
      return std::nullopt;
    case Binding::Source::CaseQuery:
      return Json(c.query);
    case Binding::Source::Literal:
      return b.literal;
    case Binding::Source::StepOutput: {
      const auto* rec = state.find(b.ref);
      if (!rec || !rec->ok()) {
        why = "dependency " + b.ref + " has no result";
        return std::nullopt;
      }
      if (b.path.empty()) return rec->payload();
      try {
        Json::json_pointer ptr(b.path);
        if (rec->payload().contains(ptr)) return rec->payload().at(ptr);
      } catch (const Json::exception&) {
      }
      why = "output " + b.ref + b.path + " not present";
      return std::nullopt;
    }
  }
  why = "bad binding";
  return std::nullopt;
}

FactSet condition_facts(const ExecutionState& state, const std::string& image_id) {
  FactSet facts;
  if (auto it = state.facts.find(image_id); it != state.facts.end()) facts = it->second;
  if (!facts.contains("modality") && facts.contains("modality_hint")) facts["modality"] = facts["modality_hint"];
  if (!facts.contains("laterality") && facts.contains("laterality_hint")) {
    facts["laterality"] = facts["laterality_hint"];
  }
  return facts;
}

std::string describe(const std::vector<UsageCondition>& conditions) {
  std::vector<std::string> parts;
  for (const auto& c : conditions) parts.push_back(c.to_json().dump());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
  return out;
}

}  // namespace

std::string request_id_for(std::uint64_t seed, std::string_view case_id, std::string_view step_id) {
  return text::hex64(text::fnv1a64(std::to_string(seed) + ":" + std::string(case_id) + ":" +
                                   std::string(step_id)));
}

Executor::Executor(const ClinicalCase& c, const Toolset& toolset, const ToolInvoker& invoker,
                   ReasoningTrace& trace, const OrchestratorConfig& config,
                   const ModalityCatalog& modalities)
    : case_(c), toolset_(toolset), invoker_(invoker), trace_(trace), config_(config),
      modalities_(modalities) {}

void Executor::seed_facts(const ClinicalCase& c, ExecutionState& state) {
  for (const auto& img : c.images) {
    auto& facts = state.facts[img.image_id];
    if (img.modality_hint && !img.modality_hint->is_unknown()) facts["modality_hint"] = img.modality_hint->code();
    if (img.laterality_hint && *img.laterality_hint != Laterality::Unknown) {
      facts["laterality_hint"] = std::string(to_string(*img.laterality_hint));
    }
  }
}

Executor::Prepared Executor::prepare(const PlanStep& step, const ExecutionState& state) const {
  Prepared p;
  p.step = &step;
  p.tool = toolset_.find(step.tool_id);
  if (!p.tool) {
    p.skip_reason = "tool " + step.tool_id + " is not in the active toolset";
    return p;
  }
  Json inputs = Json::object();
  Json context = Json::object();
  for (const auto& [param, binding] : step.input_bindings) {
    std::string why;
    auto value = resolve_binding(binding, case_, state, why);
    if (!value) {
      p.skip_reason = "binding '" + param + "' unresolved: " + why;
      return p;
    }
    if (param == "image_id" || param == "text" || param == "params") {
      inputs[param] = std::move(*value);
    } else {
      context[param] = std::move(*value);
    }
  }
  if (!context.empty()) inputs["context"] = std::move(context);
  if (inputs.contains("image_id") && inputs["image_id"].is_string()) {
    p.image_id = inputs["image_id"].get<std::string>();
  }
  p.inputs = std::move(inputs);

  if (!p.image_id.empty()) {
    auto facts = condition_facts(state, p.image_id);
    if (p.tool->is_image_tool() && !p.tool->accepts_any_modality() && facts.contains("modality")) {
      auto m = modalities_.parse(facts["modality"]);
      if (!m.is_unknown() && !p.tool->accepts_modality(m)) {
        p.skip_reason = "modality " + m.code() + " not supported by " + p.tool->tool_id;
        return p;
      }
    }
    std::vector<UsageCondition> conditions = p.tool->usage_conditions;
    conditions.insert(conditions.end(), step.guards.begin(), step.guards.end());
    if (evaluate_all(conditions, facts) == Truth::False) {
      p.skip_reason = "usage conditions not met: " + describe(conditions);
    }
  }
  return p;
}

void Executor::skip(const PlanStep& step, ToolPtr tool, std::string image_id, std::string reason,
                    ExecutionState& state) {
  trace_.append(EventKind::StepSkipped,
                Json{{"step_id", step.step_id},
                     {"tool_id", step.tool_id},
                     {"image_id", image_id},
                     {"reason", reason}},
                trace_.now());
  StepRecord rec;
  rec.step = step;
  rec.tool = std::move(tool);
  rec.image_id = std::move(image_id);
  rec.state = StepState::Skipped;
  rec.skip_reason = std::move(reason);
  state.records.push_back(std::move(rec));
}

void Executor::record_facts(const StepRecord& rec, ExecutionState& state) const {
  if (!rec.ok() || !rec.tool) return;
  const Json& out = rec.payload();
  auto top_label = [&]() -> std::string {
    if (out.contains("predictions") && !out["predictions"].empty()) {
      return out["predictions"][0].value("label", std::string());
    }
    return {};
  };
  auto& facts = state.facts[rec.image_id];
  switch (rec.tool->function) {
    case ToolFunction::Modality: {
      auto m = modalities_.parse(top_label());
      if (!m.is_unknown()) facts["modality"] = m.code();
      break;
    }
    case ToolFunction::Quality: facts["quality"] = text::normalize(top_label()); break;
    case ToolFunction::Laterality: {
      auto l = parse_laterality(top_label());
      if (l != Laterality::Unknown) facts["laterality"] = std::string(to_string(l));
      break;
    }
    case ToolFunction::Screening: facts["screening"] = text::normalize(top_label()); break;
    case ToolFunction::Generation: {
      auto id = out.value("artifact_id", std::string());
      if (!id.empty()) {
        auto& gen = state.facts[id];
        gen["generated"] = "true";
        gen["source_image"] = rec.image_id;
        if (rec.tool->generation_target) gen["modality"] = *rec.tool->generation_target;
      }
      break;
    }
    default: break;
  }
}

void Executor::run(std::span<const PlanStep> steps, ExecutionState& state) {
  std::vector<const PlanStep*> pending;
  for (const auto& s : steps) pending.push_back(&s);

  while (!pending.empty()) {
    std::vector<Prepared> wave;
    std::vector<const PlanStep*> waiting;
    bool progressed = false;
    for (const auto* step : pending) {
      bool ready = true;
      std::string blocked;
      for (const auto& dep : step->dependencies()) {
        const auto* rec = state.find(dep);
        if (!rec) {
          ready = false;
          continue;
        }
        if (!rec->ok()) blocked = dep;
      }
      if (!blocked.empty()) {
        skip(*step, toolset_.find(step->tool_id), {}, "dependency " + blocked + " did not succeed", state);
        progressed = true;
        continue;
      }
      if (!ready) {
        waiting.push_back(step);
        continue;
      }
      auto prepared = prepare(*step, state);
      if (!prepared.skip_reason.empty()) {
        skip(*step, prepared.tool, prepared.image_id, prepared.skip_reason, state);
        progressed = true;
        continue;
      }
      wave.push_back(std::move(prepared));
    }

    if (wave.empty() && !progressed) {
      for (const auto* step : waiting) {
        skip(*step, toolset_.find(step->tool_id), {}, "dependencies never became available", state);
      }
      break;
    }
    pending = std::move(waiting);
    if (wave.empty()) continue;

    std::vector<InvocationResult> results(wave.size());
    const std::size_t width = std::max<std::size_t>(1, config_.parallelism);
    for (std::size_t start = 0; start < wave.size(); start += width) {
      std::size_t end = std::min(wave.size(), start + width);
      auto work = [&](std::size_t i) {
        Invocation inv;
        inv.tool_id = wave[i].tool->tool_id;
        inv.inputs = wave[i].inputs;
        inv.request_id = request_id_for(config_.seed, case_.case_id, wave[i].step->step_id);
        results[i] = invoker_.invoke(*wave[i].tool, inv);
      };
      if (end - start == 1) {
        work(start);
        continue;
      }
      std::vector<std::thread> threads;
      for (std::size_t i = start; i < end; ++i) threads.emplace_back(work, i);
      for (auto& t : threads) t.join();
    }

    const std::int64_t wave_start = trace_.now();
    std::vector<std::size_t> order(wave.size());
    std::iota(order.begin(), order.end(), 0);
    auto finish = [&](std::size_t i) { return wave_start + std::llround(results[i].latency_ms); };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return finish(a) < finish(b); });

    for (std::size_t i : order) {
      const auto& prep = wave[i];
      auto& result = results[i];
      trace_.append(EventKind::Invocation,
                    Json{{"step_id", prep.step->step_id},
                         {"tool_id", prep.tool->tool_id},
                         {"image_id", prep.image_id},
                         {"origin", to_string(prep.step->origin)},
                         {"round", prep.step->round},
                         {"stage", to_string(prep.step->stage_tag)},
                         {"result", to_json(result)}},
                    finish(i));
      if (result.status == InvocationStatus::SchemaViolation) {
        Json violations = Json::array();
        for (const auto& v : result.violations) violations.push_back(Json{{"path", v.path}, {"message", v.message}});
        trace_.append(EventKind::ValidationFailure,
                      Json{{"step_id", prep.step->step_id},
                           {"tool_id", prep.tool->tool_id},
                           {"request_id", result.request_id},
                           {"violations", std::move(violations)},
                           {"raw_payload", result.raw_payload.value_or(Json())}},
                      finish(i));
      }
    }
    // Facts follow plan order so later waves see a scheduling-independent view.
    for (std::size_t i = 0; i < wave.size(); ++i) {
      StepRecord rec;
      rec.step = *wave[i].step;
      rec.tool = wave[i].tool;
      rec.image_id = wave[i].image_id;
      rec.state = results[i].ok() ? StepState::Ok : StepState::Failed;
      rec.result = std::move(results[i]);
      state.records.push_back(std::move(rec));
      record_facts(state.records.back(), state);
    }
  }
}

}  // namespace ocuflow

#include "ocuflow/orchestrator/plan.hpp"

#include <cstdio>
#include <functional>
#include <map>

#include "ocuflow/core/error.hpp"

namespace ocuflow {

std::string_view to_string(StageTag s) noexcept {
  switch (s) {
    case StageTag::Interpret: return "interpret";
    case StageTag::Plan: return "plan";
    case StageTag::Execute: return "execute";
    case StageTag::Integrate: return "integrate";
    case StageTag::Respond: return "respond";
  }
  return "execute";
}

std::string_view to_string(StepOrigin o) noexcept {
  return o == StepOrigin::Initial ? "initial" : "revision";
}

Json to_json(const Binding& b) {
  switch (b.source) {
    case Binding::Source::CaseImage: return Json{{"case_image", b.ref}};
    case Binding::Source::CaseQuery: return Json{{"case_query", true}};
    case Binding::Source::StepOutput: return Json{{"step", b.ref}, {"path", b.path}};
    case Binding::Source::Literal: return Json{{"value", b.literal}};
  }
  return Json();
}

std::set<std::string> PlanStep::dependencies() const {
  std::set<std::string> deps;
  for (const auto& [_, b] : input_bindings) {
    if (b.source == Binding::Source::StepOutput) deps.insert(b.ref);
  }
  return deps;
}

Json to_json(const PlanStep& s) {
  Json bindings = Json::object();
  for (const auto& [k, b] : s.input_bindings) bindings[k] = to_json(b);
  Json guards = Json::array();
  for (const auto& g : s.guards) guards.push_back(g.to_json());
  return Json{{"step_id", s.step_id},
              {"tool_id", s.tool_id},
              {"input_bindings", std::move(bindings)},
              {"rationale", s.rationale},
              {"stage_tag", to_string(s.stage_tag)},
              {"origin", to_string(s.origin)},
              {"round", s.round},
              {"guards", std::move(guards)}};
}

void ToolPlan::add(PlanStep step) {
  if (step.step_id.empty()) throw Error(ErrorCode::InvalidArgument, "plan step without id");
  if (find(step.step_id)) throw Error(ErrorCode::InvalidArgument, "duplicate step id " + step.step_id);
  for (const auto& dep : step.dependencies()) {
    if (!find(dep)) {
      throw Error(ErrorCode::InvalidArgument,
                  step.step_id + " binds to unknown or later step " + dep);
    }
  }
  steps_.push_back(std::move(step));
}

void ToolPlan::append(std::vector<PlanStep> steps) {
  for (auto& s : steps) add(std::move(s));
}

const PlanStep* ToolPlan::find(std::string_view step_id) const {
  for (const auto& s : steps_) {
    if (s.step_id == step_id) return &s;
  }
  return nullptr;
}

std::vector<std::pair<std::string, std::string>> ToolPlan::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : steps_) {
    for (const auto& dep : s.dependencies()) out.emplace_back(dep, s.step_id);
  }
  return out;
}

bool ToolPlan::is_dag() const {
  // add() only admits edges from earlier steps, but plans can also be built
  // from recorded documents, so check with a colouring DFS.
  std::map<std::string, int> colour;
  std::map<std::string, const PlanStep*> by_id;
  for (const auto& s : steps_) by_id[s.step_id] = &s;
  std::function<bool(const std::string&)> visit = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) return false;
    int& c = colour[id];
    if (c == 1) return false;
    if (c == 2) return true;
    c = 1;
    for (const auto& dep : it->second->dependencies()) {
      if (!visit(dep)) return false;
    }
    c = 2;
    return true;
  };
  for (const auto& s : steps_) {
    if (!visit(s.step_id)) return false;
  }
  return true;
}

Json to_json(const ToolPlan& plan) {
  Json steps = Json::array();
  for (const auto& s : plan.steps()) steps.push_back(to_json(s));
  Json edges = Json::array();
  for (const auto& [from, to] : plan.edges()) edges.push_back(Json::array({from, to}));
  return Json{{"steps", std::move(steps)}, {"edges", std::move(edges)}, {"warnings", plan.warnings}};
}

std::string make_step_id(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%02zu", index);
  return buf;
}

}  // namespace ocuflow

#include "ocuflow/orchestrator/planner.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ocuflow/adapters/postprocess.hpp"
#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"
#include "ocuflow/orchestrator/executor.hpp"

namespace ocuflow {

namespace {

constexpr std::string_view kNormal = "normal";

FactSet hint_facts(const ImageRef& img) {
  FactSet facts;
  if (img.modality_hint && !img.modality_hint->is_unknown()) facts["modality"] = img.modality_hint->code();
  if (img.laterality_hint && *img.laterality_hint != Laterality::Unknown) {
    facts["laterality"] = std::string(to_string(*img.laterality_hint));
  }
  return facts;
}

// False only when the case metadata already rules the tool out.
bool excluded_by_hints(const ToolDescriptor& tool, const FactSet& facts, const ModalityCatalog& catalog) {
  if (auto it = facts.find("modality"); it != facts.end() && tool.is_image_tool()) {
    auto m = catalog.parse(it->second);
    if (!m.is_unknown() && !tool.accepts_modality(m)) return true;
  }
  return evaluate_all(tool.usage_conditions, facts) == Truth::False;
}

template <class Pred>
std::vector<ToolPtr> select(const Toolset& ts, Pred pred) {
  std::vector<ToolPtr> out;
  for (const auto& t : ts.tools()) {
    if (pred(*t)) out.push_back(t);
  }
  return out;
}

// Prefers tools that accept any modality, then tool_id order.
ToolPtr pick(const Toolset& ts, ToolFunction f, const FactSet& facts, const ModalityCatalog& catalog) {
  auto tools = select(ts, [&](const ToolDescriptor& t) {
    return t.function == f && !excluded_by_hints(t, facts, catalog);
  });
  if (tools.empty()) return nullptr;
  std::stable_sort(tools.begin(), tools.end(), [](const ToolPtr& a, const ToolPtr& b) {
    return a->accepts_any_modality() && !b->accepts_any_modality();
  });
  return tools.front();
}

ToolPtr retrieval_tool(const Toolset& ts) {
  auto tools = ts.with_function(ToolFunction::Retrieval);
  return tools.empty() ? nullptr : tools.front();
}

Json rag_params(const OrchestratorConfig& config) { return Json{{"k", config.rag_k}}; }

class StepMaker {
 public:
  StepMaker(std::size_t next, StepOrigin origin, int round) : next_(next), origin_(origin), round_(round) {}

  PlanStep make(const ToolDescriptor& tool, std::map<std::string, Binding> bindings, std::string rationale,
                std::vector<UsageCondition> guards = {}) {
    PlanStep s;
    s.step_id = make_step_id(next_++);
    s.tool_id = tool.tool_id;
    s.input_bindings = std::move(bindings);
    s.rationale = std::move(rationale);
    s.origin = origin_;
    s.round = round_;
    s.guards = std::move(guards);
    return s;
  }

 private:
  std::size_t next_;
  StepOrigin origin_;
  int round_;
};

std::string tier_note(const Toolset& ts) { return " in the tier-" + std::to_string(ts.tier()) + " toolset"; }

void plan_rag(const PlanningContext& ctx, ToolPlan& plan, StepMaker& maker, std::string rationale) {
  auto rag = retrieval_tool(ctx.toolset);
  if (!rag) {
    plan.warnings.push_back("NoApplicableTools: no retrieval tool" + tier_note(ctx.toolset));
    return;
  }
  plan.add(maker.make(*rag, {{"text", Binding::query()}, {"params", Binding::value(rag_params(ctx.config))}},
                      std::move(rationale)));
}

}  // namespace

ToolPlan build_plan(const PlanningContext& ctx) {
  if (ctx.toolset.empty()) throw Error(ErrorCode::NoApplicableTools, "empty toolset");
  const auto& ts = ctx.toolset;
  const auto& intent = ctx.intent;
  ToolPlan plan;
  StepMaker maker(1, StepOrigin::Initial, 0);

  if (ctx.clinical_case.images.empty()) {
    plan_rag(ctx, plan, maker, "text-only query answered from reference literature");
    return plan;
  }

  for (const auto& img : ctx.clinical_case.images) {
    const auto facts = hint_facts(img);
    std::map<std::string, Binding> base{{"image_id", Binding::image(img.image_id)}};

    std::string s_mod;
    if (auto tool = pick(ts, ToolFunction::Modality, facts, ctx.modalities)) {
      auto step = maker.make(*tool, base, "recognise the imaging modality");
      s_mod = step.step_id;
      plan.add(std::move(step));
    } else {
      plan.warnings.push_back("NoApplicableTools: no modality recognition tool" + tier_note(ts));
    }
    auto with_modality = base;
    if (!s_mod.empty()) with_modality["modality"] = Binding::output(s_mod, "/predictions/0/label");

    if (auto tool = pick(ts, ToolFunction::Quality, facts, ctx.modalities)) {
      plan.add(maker.make(*tool, with_modality, "assess image gradability"));
    }
    if (auto tool = pick(ts, ToolFunction::Laterality, facts, ctx.modalities)) {
      UsageCondition fundus{"modality", UsageCondition::Op::In,
                            {ctx.config.laterality_modalities.begin(), ctx.config.laterality_modalities.end()}};
      if (evaluate_all({fundus}, facts) != Truth::False) {
        plan.add(maker.make(*tool, with_modality, "determine laterality of a fundus-type image", {fundus}));
      }
    }
    std::string s_scr;
    if (auto tool = pick(ts, ToolFunction::Screening, facts, ctx.modalities)) {
      auto step = maker.make(*tool, with_modality, "general multi-condition screening");
      s_scr = step.step_id;
      plan.add(std::move(step));
    } else {
      plan.warnings.push_back("NoApplicableTools: no screening tool" + tier_note(ts));
    }

    switch (intent.workflow) {
      case Workflow::QuantitativeAnalysis: {
        auto lesion = intent.param("lesion");
        if (!lesion) {
          plan.warnings.push_back("quantitative request names no known lesion type; lesion tools follow screening");
          break;
        }
        auto segs = select(ts, [&](const ToolDescriptor& t) {
          return t.function == ToolFunction::Segmentation && t.segments(*lesion) &&
                 !excluded_by_hints(t, facts, ctx.modalities);
        });
        if (segs.empty()) {
          plan.warnings.push_back("NoApplicableTools: no segmentation tool for '" + *lesion + "'" + tier_note(ts));
        }
        for (const auto& t : segs) plan.add(maker.make(*t, with_modality, "quantify " + *lesion));
        break;
      }
      case Workflow::CrossSpecialtyLongitudinal: {
        const auto target = intent.param("systemic_target").value_or("cardiovascular");
        std::string s_ves;
        std::size_t added = 0;
        if (target == "cardiovascular" || intent.flag("vessels")) {
          for (const auto& t : select(ts, [&](const ToolDescriptor& t) {
                 return t.function == ToolFunction::VesselAnalysis && !excluded_by_hints(t, facts, ctx.modalities);
               })) {
            auto step = maker.make(*t, with_modality, "quantify retinal vessel calibre and geometry");
            if (s_ves.empty()) s_ves = step.step_id;
            plan.add(std::move(step));
            ++added;
          }
        }
        const std::string condition = target == "age"   ? "retinal age"
                                      : target == "sex" ? "sex"
                                                        : "cardiovascular risk";
        for (const auto& t : select(ts, [&](const ToolDescriptor& t) {
               return (t.function == ToolFunction::Detection || t.function == ToolFunction::RiskRegression ||
                       t.function == ToolFunction::Demographic) &&
                      t.addresses(condition) && !excluded_by_hints(t, facts, ctx.modalities);
             })) {
          auto bindings = with_modality;
          if (t->function != ToolFunction::Detection) {
            if (!s_ves.empty()) bindings["vessels"] = Binding::output(s_ves);
            if (auto h = intent.param("horizon"); h && h->back() == 'y') {
              bindings["params"] = Binding::value(Json{{"horizon_years", std::stoi(*h)}});
            }
          }
          plan.add(maker.make(*t, std::move(bindings), "estimate " + condition + " from retinal biomarkers"));
          ++added;
        }
        if (added == 0) {
          plan.warnings.push_back("NoApplicableTools: no systemic biomarker tool for " + condition + tier_note(ts));
        }
        break;
      }
      case Workflow::MedicalEducation: {
        if (auto target = intent.param("generate")) {
          auto gens = select(ts, [&](const ToolDescriptor& t) {
            if (excluded_by_hints(t, facts, ctx.modalities) || !t.is_image_tool()) return false;
            if (*target == "report") return t.function == ToolFunction::Report;
            if (t.function != ToolFunction::Generation) return false;
            if (*target == "3d") return t.artifact_kind == ArtifactKind::Model3D;
            if (*target == "video") return t.artifact_kind == ArtifactKind::Video;
            if (*target == "image") return t.artifact_kind == ArtifactKind::Image2D;
            return t.generation_target && text::iequals(*t.generation_target, *target);
          });
          if (gens.empty()) {
            plan.warnings.push_back("NoApplicableTools: no generation tool for '" + *target + "'" + tier_note(ts));
          }
          for (const auto& t : gens) {
            auto bindings = with_modality;
            if (!s_scr.empty()) bindings["screening"] = Binding::output(s_scr, "/predictions");
            plan.add(maker.make(*t, std::move(bindings), "generate " + *target + " material for explanation"));
          }
        }
        break;
      }
      case Workflow::HierarchicalDecision:
      case Workflow::ConflictResolution:
        if (s_scr.empty()) break;
        if (auto tool = pick(ts, ToolFunction::Triage, facts, ctx.modalities)) {
          auto bindings = with_modality;
          bindings["screening"] = Binding::output(s_scr, "/predictions");
          plan.add(maker.make(*tool, std::move(bindings), "referral urgency from the screening result"));
        }
        break;
    }
  }
  if (intent.workflow == Workflow::MedicalEducation && ctx.config.rag_for_education) {
    plan_rag(ctx, plan, maker, "ground the explanation in reference literature");
  }
  return plan;
}

RevisionProposal verify_and_revise(const RevisionContext& ctx) {
  const auto& pc = ctx.planning;
  const auto& ts = pc.toolset;
  const auto& st = ctx.state;
  const auto& cfg = pc.config;
  RevisionProposal out;
  StepMaker maker(st.next_step_index, StepOrigin::Revision, ctx.round);
  std::set<std::pair<std::string, std::string>> planned;
  // Steps on generated images are keyed by their producing step as well as
  // the resolved artifact id.
  for (const auto& r : st.records) {
    if (!r.image_id.empty()) planned.emplace(r.step.tool_id, r.image_id);
    if (auto it = r.step.input_bindings.find("image_id"); it != r.step.input_bindings.end()) {
      const auto& b = it->second;
      planned.emplace(r.step.tool_id, b.source == Binding::Source::StepOutput ? "step:" + b.ref : b.ref);
    }
  }
  auto add = [&](const ToolDescriptor& tool, const std::string& subject, std::map<std::string, Binding> bindings,
                 std::string rationale) -> std::string {
    if (!planned.emplace(tool.tool_id, subject).second) return {};
    out.steps.push_back(maker.make(tool, std::move(bindings), std::move(rationale)));
    return out.steps.back().step_id;
  };
  auto has_conflict_for = [&](const std::string& step_id) {
    auto check = [&](const ConflictRecord& c) {
      return std::any_of(c.parties.begin(), c.parties.end(), [&](const auto& p) { return p.step_id == step_id; });
    };
    return std::any_of(ctx.conflicts.begin(), ctx.conflicts.end(), check) ||
           std::any_of(out.conflicts.begin(), out.conflicts.end(), check);
  };

  for (const auto& img : pc.clinical_case.images) {
    const auto* scr = st.ok_record(ToolFunction::Screening, img.image_id);
    if (!scr) continue;
    auto modality = pc.modalities.parse(st.fact(img.image_id, "modality"));
    if (modality.is_unknown()) continue;
    const auto screening = classification_from_payload(scr->payload());
    const auto top = text::normalize(screening.top().label);
    std::map<std::string, Binding> base{{"image_id", Binding::image(img.image_id)},
                                        {"screening", Binding::output(scr->step.step_id, "/predictions")}};

    struct Target {
      std::string condition;
      bool with_segmentation;
      std::string why;
    };
    std::vector<Target> targets;
    if (top != kNormal) {
      targets.push_back({top, true, "screening top-1 '" + top + "'"});
    } else {
      const auto& preds = screening.predictions();
      for (std::size_t i = 1; i < preds.size(); ++i) {
        if (preds[i].probability >= cfg.classification_threshold) {
          targets.push_back({text::normalize(preds[i].label), true,
                             "secondary prediction '" + preds[i].label + "' at " + text::percent(preds[i].probability)});
        }
      }
      if (auto claimed = pc.intent.param("claimed_condition")) {
        for (const auto& c : cfg.verification_panel) {
          targets.push_back({text::normalize(c), false, "query asserts '" + *claimed + "' but screening is normal"});
        }
      }
    }
    for (const auto& target : targets) {
      for (const auto& t : select(ts, [&](const ToolDescriptor& t) {
             return t.function == ToolFunction::Specialist && t.addresses(target.condition) &&
                    t.accepts_modality(modality);
           })) {
        if (!add(*t, img.image_id, base, "specialist for " + target.why).empty()) {
          out.reasons.push_back("specialist " + t->tool_id + ": " + target.why);
        }
      }
      if (!target.with_segmentation) continue;
      for (const auto& t : select(ts, [&](const ToolDescriptor& t) {
             return t.function == ToolFunction::Segmentation && t.addresses(target.condition) &&
                    t.accepts_modality(modality) && !t.segments("artifact");
           })) {
        if (!add(*t, img.image_id, base, "lesion segmentation for " + target.why).empty()) {
          out.reasons.push_back("segmentation " + t->tool_id + ": " + target.why);
        }
      }
    }
    if (st.fact(img.image_id, "quality") == "gradable_with_artifacts") {
      for (const auto& t : select(ts, [&](const ToolDescriptor& t) {
             return t.function == ToolFunction::Segmentation && t.segments("artifact") && t.accepts_modality(modality);
           })) {
        if (!add(*t, img.image_id, base, "localise artifacts reported by quality assessment").empty()) {
          out.reasons.push_back("artifact segmentation " + t->tool_id);
        }
      }
    }

    // Conflict rule.
    for (const auto& rec : st.records) {
      if (!rec.ok() || !rec.tool || rec.tool->function != ToolFunction::Specialist || rec.image_id != img.image_id) {
        continue;
      }
      if (has_conflict_for(rec.step.step_id)) continue;
      const auto spec = classification_from_payload(rec.payload());
      const auto parent = text::normalize(rec.tool->parent_condition(spec.top().label));
      if (parent == top || spec.top().probability < cfg.conflict_margin ||
          screening.top().probability < cfg.conflict_margin) {
        continue;
      }
      ConflictRecord conflict;
      conflict.topic = "diagnosis";
      conflict.image_id = img.image_id;
      conflict.round_detected = ctx.round;
      conflict.parties = {
          {scr->tool->tool_id, scr->step.step_id, screening.top().label, screening.top().probability},
          {rec.tool->tool_id, rec.step.step_id, spec.top().label, spec.top().probability}};
      out.reasons.push_back("conflict: " + scr->tool->tool_id + " says '" + screening.top().label + "', " +
                            rec.tool->tool_id + " says '" + spec.top().label + "'");
      auto gens = select(ts, [&](const ToolDescriptor& t) {
        if (t.function != ToolFunction::Generation || !t.generation_target || !t.accepts_modality(modality) ||
            t.artifact_kind != ArtifactKind::Image2D) {
          return false;
        }
        auto target = pc.modalities.parse(*t.generation_target);
        return !target.is_unknown() && scr->tool->accepts_modality(target);
      });
      if (!gens.empty()) {
        auto gen_id = add(*gens.front(), img.image_id, base, "synthesize a second modality to arbitrate the conflict");
        if (!gen_id.empty()) {
          auto rescreen = add(*scr->tool, "step:" + gen_id,
                              {{"image_id", Binding::output(gen_id, "/artifact_id")}},
                              "re-screen the generated image");
          conflict.resolving_steps = {gen_id, rescreen};
          conflict.rescreen_step = rescreen;
        }
      }
      if (cfg.rag_for_conflict) {
        if (auto rag = retrieval_tool(ts)) {
          auto claim = spec.top().label + " versus " + screening.top().label;
          auto rag_id = add(*rag, "conflict:" + rec.step.step_id,
                            {{"text", Binding::value(claim)}, {"params", Binding::value(rag_params(cfg))}},
                            "consult reference literature on the disputed diagnosis");
          if (!rag_id.empty()) conflict.resolving_steps.push_back(rag_id);
        }
      }
      out.conflicts.push_back(std::move(conflict));
    }
  }

  // Lesion labelling on generated images.
  if (pc.intent.flag("label_lesions") || pc.intent.workflow == Workflow::QuantitativeAnalysis) {
    for (const auto& rec : st.records) {
      if (!rec.ok() || !rec.tool || rec.tool->function != ToolFunction::Generation) continue;
      auto artifact = rec.payload().value("artifact_id", std::string());
      if (artifact.empty() || !st.facts.contains(artifact)) continue;
      auto gen_modality = pc.modalities.parse(st.fact(artifact, "modality"));
      auto condition = st.fact(st.fact(artifact, "source_image"), "screening");
      if (gen_modality.is_unknown() || condition.empty() || condition == kNormal) continue;
      for (const auto& t : select(ts, [&](const ToolDescriptor& t) {
             return t.function == ToolFunction::Segmentation && t.accepts_modality(gen_modality) &&
                    t.addresses(condition) && !t.segments("artifact");
           })) {
        if (!add(*t, "step:" + rec.step.step_id, {{"image_id", Binding::output(rec.step.step_id, "/artifact_id")}},
                 "label lesions on the generated " + gen_modality.code() + " image")
                 .empty()) {
          out.reasons.push_back("segmentation " + t->tool_id + " on generated " + artifact);
        }
      }
    }
  }

  // Schema violation on a critical-path step: substitute another tool with
  // the same function when the toolset has one.
  for (const auto& rec : st.records) {
    if (!rec.tool || !rec.result || rec.result->status != InvocationStatus::SchemaViolation) continue;
    const auto f = rec.tool->function;
    if (f != ToolFunction::Modality && f != ToolFunction::Quality && f != ToolFunction::Laterality &&
        f != ToolFunction::Screening) {
      continue;
    }
    for (const auto& t : ts.with_function(f)) {
      if (t->tool_id == rec.tool->tool_id || st.attempted(t->tool_id, rec.image_id)) continue;
      if (!add(*t, rec.image_id, rec.step.input_bindings,
               "replace " + rec.tool->tool_id + " after a schema violation")
               .empty()) {
        out.reasons.push_back("schema violation on critical step " + rec.step.step_id);
        break;
      }
    }
  }
  return out;
}

Binding binding_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "binding");
  if (doc.contains("case_image")) return Binding::image(doc["case_image"].get<std::string>());
  if (doc.contains("case_query")) return Binding::query();
  if (doc.contains("step")) return Binding::output(doc["step"].get<std::string>(), doc.value("path", std::string()));
  if (doc.contains("value")) return Binding::value(doc["value"]);
  throw Error(ErrorCode::SchemaViolation, "binding");
}

PlanStep step_from_json(const Json& doc) {
  try {
    PlanStep s;
    s.step_id = doc.at("step_id").get<std::string>();
    s.tool_id = doc.at("tool_id").get<std::string>();
    const auto bindings = doc.value("input_bindings", Json::object());
    for (const auto& [k, v] : bindings.items()) {
      s.input_bindings[k] = binding_from_json(v);
    }
    s.rationale = doc.value("rationale", std::string("recorded planner step"));
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("recorded step: ") + e.what());
  }
}

RecordedPlanner RecordedPlanner::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open planner recording " + path.string());
  return RecordedPlanner(Json::parse(in));
}

ToolPlan RecordedPlanner::propose_plan(const PlanningContext& ctx) {
  ToolPlan plan;
  const auto& plans = recording_.value("plans", Json::object());
  auto it = plans.find(ctx.clinical_case.case_id);
  if (it == plans.end()) {
    plan.warnings.push_back("no recorded plan for case " + ctx.clinical_case.case_id);
    return plan;
  }
  for (const auto& s : *it) plan.add(step_from_json(s));
  return plan;
}

RevisionProposal RecordedPlanner::propose_revision(const RevisionContext& ctx) {
  RevisionProposal out;
  const auto& revisions = recording_.value("revisions", Json::object());
  auto it = revisions.find(ctx.planning.clinical_case.case_id);
  if (it == revisions.end() || !it->is_array()) return out;
  auto index = static_cast<std::size_t>(ctx.round - 1);
  if (index >= it->size()) return out;
  for (const auto& s : (*it)[index]) {
    auto step = step_from_json(s);
    step.origin = StepOrigin::Revision;
    step.round = ctx.round;
    out.steps.push_back(std::move(step));
  }
  if (!out.steps.empty()) out.reasons.push_back("recorded revision");
  return out;
}

}  // namespace ocuflow

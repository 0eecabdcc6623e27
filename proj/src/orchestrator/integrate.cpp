#include <algorithm>

#include "ocuflow/core/text.hpp"
#include "ocuflow/orchestrator/findings.hpp"

namespace ocuflow {

namespace {

constexpr std::string_view kNormal = "normal";

LabelledFinding labelled(const StepRecord& rec) {
  auto cls = classification_from_payload(rec.payload());
  LabelledFinding f;
  f.top = cls.top();
  f.alternatives.assign(cls.predictions().begin() + 1, cls.predictions().end());
  f.step_id = rec.step.step_id;
  f.source = rec.tool->tool_id;
  return f;
}

std::string parent_of(const ExecutionState& st, const ConflictParty& party) {
  const auto* rec = st.find(party.step_id);
  auto parent = rec && rec->tool ? rec->tool->parent_condition(party.label) : party.label;
  return text::normalize(parent);
}

std::string query_of(const StepRecord& rec, const ClinicalCase& c) {
  auto it = rec.step.input_bindings.find("text");
  if (it == rec.step.input_bindings.end()) return {};
  if (it->second.source == Binding::Source::CaseQuery) return c.query;
  if (it->second.source == Binding::Source::Literal && it->second.literal.is_string()) {
    return it->second.literal.get<std::string>();
  }
  return {};
}

}  // namespace

bool IntegratedFindings::has_flag(std::string_view f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

std::vector<kb::RetrievalHit> hits_from_payload(const Json& payload) {
  std::vector<kb::RetrievalHit> hits;
  for (const auto& h : payload.at("hits")) {
    kb::RetrievalHit hit;
    hit.passage.passage_id = h.at("passage_id").get<std::string>();
    hit.passage.source_id = h.at("source_id").get<std::string>();
    hit.passage.text = h.value("text", std::string());
    hit.score = h.at("score").get<double>();
    hit.rank = h.at("rank").get<std::size_t>();
    hits.push_back(std::move(hit));
  }
  return hits;
}

void resolve_conflicts(std::vector<ConflictRecord>& conflicts, const ExecutionState& st, int max_rounds) {
  for (auto& c : conflicts) {
    if (c.resolution) continue;
    if (c.parties.size() < 2 || c.round_detected > max_rounds) {
      c.resolution = ConflictResolution::EscalatedUnresolved;
      continue;
    }
    const auto& screen = c.parties[0];
    const auto& spec = c.parties[1];
    double screening_confidence = screen.probability;
    const auto* rescreen = c.rescreen_step.empty() ? nullptr : st.find(c.rescreen_step);
    if (rescreen && rescreen->ok()) {
      auto cls = classification_from_payload(rescreen->payload());
      if (text::normalize(cls.top().label) == parent_of(st, spec)) {
        c.resolution = ConflictResolution::GenerationVerified;
        continue;
      }
      screening_confidence = 0.0;
      for (const auto& p : cls.predictions()) {
        if (text::iequals(p.label, screen.label)) screening_confidence = p.probability;
      }
    }
    c.resolution = spec.probability >= screening_confidence ? ConflictResolution::SpecialistOverrides
                                                            : ConflictResolution::EscalatedUnresolved;
  }
}

IntegratedFindings integrate(const ClinicalCase& c, const ExecutionState& st,
                             std::span<const ConflictRecord> conflicts, const OrchestratorConfig&) {
  IntegratedFindings f;
  f.conflicts.assign(conflicts.begin(), conflicts.end());
  const std::string primary = c.images.empty() ? std::string() : c.images.front().image_id;
  const bool any_ok = std::any_of(st.records.begin(), st.records.end(), [](const auto& r) { return r.ok(); });

  for (const auto& rec : st.records) {
    if (!rec.ok() || !rec.tool) continue;
    try {
      switch (rec.tool->function) {
        case ToolFunction::Segmentation:
          for (auto& set : segmentation_to_metrics(rec.payload())) {
            f.lesions.push_back({rec.step.step_id, rec.tool->tool_id, rec.image_id, std::move(set)});
          }
          break;
        case ToolFunction::VesselAnalysis:
          if (!f.vessels) f.vessels = VesselEvidence{rec.step.step_id, rec.tool->tool_id, vessel_metrics(rec.payload())};
          break;
        case ToolFunction::RiskRegression:
        case ToolFunction::Demographic:
          if (rec.tool->output_kind() != OutputKind::Scalar) break;
          f.regressions.push_back({rec.step.step_id, rec.tool->tool_id, regression_from_payload(rec.payload())});
          break;
        case ToolFunction::Detection:
          f.detections.push_back({rec.step.step_id, rec.tool->tool_id, detections_from_payload(rec.payload())});
          break;
        case ToolFunction::Generation:
        case ToolFunction::Report:
          f.generations.push_back({rec.step.step_id, rec.tool->tool_id, generation_from_payload(rec.payload())});
          break;
        case ToolFunction::Retrieval:
          f.passages.push_back({rec.step.step_id, query_of(rec, c), hits_from_payload(rec.payload()),
                                rec.payload().value("score_floor", 0.0)});
          break;
        default:
          break;
      }
    } catch (const std::exception&) {
      f.flags.push_back("unreadable_output:" + rec.step.step_id);
    }
  }

  if (!primary.empty()) {
    if (const auto* rec = st.ok_record(ToolFunction::Modality, primary)) f.modality = labelled(*rec);
    if (const auto* rec = st.ok_record(ToolFunction::Laterality, primary)) {
      f.laterality = labelled(*rec);
    } else if (auto hint = st.fact(primary, "laterality_hint"); !hint.empty()) {
      f.laterality = LabelledFinding{{hint, 1.0}, {}, {}, "metadata"};
    }
    if (const auto* rec = st.ok_record(ToolFunction::Quality, primary)) {
      auto q = labelled(*rec);
      QualityFinding quality;
      quality.label = text::normalize(q.top.label);
      quality.probability = q.top.probability;
      quality.gradable = quality.label != "ungradable";
      quality.step_id = rec->step.step_id;
      for (const auto& l : f.lesions) {
        if (l.image_id == primary && text::iequals(l.lesions.lesion_type, "artifact")) {
          quality.artifact_count = quality.artifact_count.value_or(0) + l.lesions.count;
        }
      }
      if (!quality.gradable) f.flags.push_back("low_confidence");
      f.quality = quality;
    }

    if (const auto* scr = st.ok_record(ToolFunction::Screening, primary)) {
      auto screening = classification_from_payload(scr->payload());
      const auto& top = screening.top();
      const auto top_norm = text::normalize(top.label);
      DiagnosisEntry primary_entry{top.label, top.probability, scr->tool->tool_id, scr->step.step_id, {}, {}};

      auto conflict = std::find_if(f.conflicts.begin(), f.conflicts.end(),
                                   [&](const ConflictRecord& k) { return k.image_id == primary; });
      if (conflict != f.conflicts.end() && conflict->parties.size() >= 2) {
        const auto& spec = conflict->parties[1];
        if (conflict->resolution == ConflictResolution::EscalatedUnresolved) {
          f.flags.push_back("conflict_unresolved");
        } else {
          const auto parent = parent_of(st, spec);
          primary_entry = DiagnosisEntry{parent == kNormal ? std::string(kNormal) : spec.label,
                                         spec.probability, spec.tool_id, spec.step_id, top.label, {}};
          if (conflict->resolution == ConflictResolution::GenerationVerified && !conflict->rescreen_step.empty()) {
            primary_entry.agreeing_steps.push_back(conflict->rescreen_step);
          }
        }
      } else {
        const StepRecord* refiner = nullptr;
        double best = -1.0;
        for (const auto& rec : st.records) {
          if (!rec.ok() || !rec.tool || rec.tool->function != ToolFunction::Specialist || rec.image_id != primary) {
            continue;
          }
          auto spec = classification_from_payload(rec.payload());
          auto parent = text::normalize(rec.tool->parent_condition(spec.top().label));
          if (parent != top_norm) continue;
          if (parent == kNormal || text::normalize(spec.top().label) == kNormal) {
            primary_entry.agreeing_steps.push_back(rec.step.step_id);
            continue;
          }
          if (spec.top().probability > best) {
            best = spec.top().probability;
            refiner = &rec;
          }
        }
        if (refiner) {
          auto spec = classification_from_payload(refiner->payload());
          primary_entry = DiagnosisEntry{spec.top().label, spec.top().probability, refiner->tool->tool_id,
                                         refiner->step.step_id, top.label, {scr->step.step_id}};
        }
      }
      f.diagnosis.push_back(std::move(primary_entry));
      for (std::size_t i = 1; i < screening.predictions().size(); ++i) {
        const auto& p = screening.predictions()[i];
        if (text::iequals(p.label, f.diagnosis.front().label)) continue;
        f.diagnosis.push_back({p.label, p.probability, scr->tool->tool_id, scr->step.step_id, {}, {}});
      }
    }
  }
  if (!any_ok) f.flags.push_back("insufficient_evidence");
  return f;
}

Json to_json(const IntegratedFindings& f) {
  auto labelled_json = [](const std::optional<LabelledFinding>& l) -> Json {
    if (!l) return Json();
    Json alts = Json::array();
    for (const auto& a : l->alternatives) alts.push_back(to_json(a));
    return Json{{"top", to_json(l->top)}, {"alternatives", alts}, {"step_id", l->step_id}, {"source", l->source}};
  };
  Json j;
  j["modality"] = labelled_json(f.modality);
  j["laterality"] = labelled_json(f.laterality);
  if (f.quality) {
    j["quality"] = Json{{"label", f.quality->label},
                        {"probability", f.quality->probability},
                        {"gradable", f.quality->gradable},
                        {"artifact_count", f.quality->artifact_count ? Json(*f.quality->artifact_count) : Json()},
                        {"step_id", f.quality->step_id}};
  } else {
    j["quality"] = Json();
  }
  j["diagnosis"] = Json::array();
  for (const auto& d : f.diagnosis) {
    j["diagnosis"].push_back(Json{{"label", d.label},
                                  {"probability", d.probability},
                                  {"tool_id", d.tool_id},
                                  {"step_id", d.step_id},
                                  {"refines", d.refines},
                                  {"agreeing_steps", d.agreeing_steps}});
  }
  j["lesions"] = Json::array();
  for (const auto& l : f.lesions) {
    auto lj = to_json(l.lesions);
    lj["step_id"] = l.step_id;
    lj["tool_id"] = l.tool_id;
    lj["image_id"] = l.image_id;
    j["lesions"].push_back(std::move(lj));
  }
  if (f.vessels) {
    auto v = to_json(f.vessels->metrics);
    v["step_id"] = f.vessels->step_id;
    j["vessels"] = std::move(v);
  } else {
    j["vessels"] = Json();
  }
  j["regressions"] = Json::array();
  for (const auto& r : f.regressions) {
    auto rj = to_json(r.output);
    rj["step_id"] = r.step_id;
    j["regressions"].push_back(std::move(rj));
  }
  j["detections"] = Json::array();
  for (const auto& d : f.detections) {
    Json items = Json::array();
    for (const auto& x : d.detections) items.push_back(Json{{"label", x.label}, {"confidence", x.confidence}});
    j["detections"].push_back(Json{{"step_id", d.step_id}, {"tool_id", d.tool_id}, {"detections", items}});
  }
  j["generations"] = Json::array();
  for (const auto& g : f.generations) {
    auto gj = to_json(g.output);
    gj["step_id"] = g.step_id;
    j["generations"].push_back(std::move(gj));
  }
  j["passages"] = Json::array();
  for (const auto& p : f.passages) {
    Json ids = Json::array();
    for (const auto& h : p.hits) ids.push_back(h.passage.passage_id);
    j["passages"].push_back(Json{{"step_id", p.step_id}, {"query", p.query}, {"passage_ids", ids},
                                 {"score_floor", p.score_floor}});
  }
  j["conflicts"] = Json::array();
  for (const auto& c : f.conflicts) j["conflicts"].push_back(to_json(c));
  j["flags"] = f.flags;
  return j;
}

}  // namespace ocuflow

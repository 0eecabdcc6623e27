#include <algorithm>
#include <cmath>
#include <fstream>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"
#include "ocuflow/orchestrator/findings.hpp"

namespace ocuflow {

RecommendationTable RecommendationTable::from_json(const Json& doc) {
  RecommendationTable table;
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "recommendations");
  if (doc.contains("default")) table.fallback_ = doc["default"].get<std::string>();
  const auto conditions = doc.value("conditions", Json::object());
  for (const auto& [k, v] : conditions.items()) table.set(k, v.get<std::string>());
  return table;
}

RecommendationTable RecommendationTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open recommendation table " + path.string());
  return from_json(Json::parse(in));
}

void RecommendationTable::set(std::string condition, std::string text) {
  entries_[text::normalize(condition)] = std::move(text);
}

std::string RecommendationTable::lookup(std::string_view label, std::string_view parent) const {
  for (auto key : {label, parent}) {
    if (key.empty()) continue;
    if (auto it = entries_.find(text::normalize(key)); it != entries_.end()) return it->second;
  }
  return fallback_;
}

namespace {

std::string percent(double p) { return text::percent(p); }

std::string range_text(const LesionInstanceSet& s) {
  if (s.count == 0) return s.lesion_type + " (n=0)";
  std::string out = s.lesion_type + " (n=" + std::to_string(s.count) + ", area=";
  if (s.count == 1) {
    out += text::fixed(*s.area_min, 1);
  } else {
    out += text::fixed(*s.area_min, 1) + "-" + text::fixed(*s.area_max, 1);
  }
  return out + " px^2)";
}

std::string predictions_text(const Json& payload) {
  std::string out;
  for (const auto& p : payload.at("predictions")) {
    if (!out.empty()) out += "; ";
    out += p.at("label").get<std::string>() + " " + percent(p.at("probability").get<double>());
  }
  return out;
}

std::string number(double v) {
  if (std::fabs(v - std::round(v)) < 1e-9) return std::to_string(static_cast<long long>(std::llround(v)));
  return text::fixed(v, 2);
}

std::string regression_text(const RegressionOutput& r) {
  std::string name = r.quantity;
  if (r.is_ordinal()) {
    std::string out = name + ": Level " + number(r.value) + "/" + number(*r.scale_max);
    if (!r.label.empty()) out += " (" + r.label + ")";
    return out;
  }
  std::string out = name + ": " + number(r.value);
  if (!r.unit.empty()) out += " " + r.unit;
  if (!r.label.empty()) out += " (" + r.label + ")";
  return out;
}

std::string vessel_text(const VesselMetrics& m) {
  std::string out = "Vessel area density " + text::fixed(m.vessel_area_density(), 2) + "%; AVR " +
                    text::fixed(m.avr_reported(), 3) + "; CRAE " + text::fixed(m.crae(), 2) + " px; CRVE " +
                    text::fixed(m.crve(), 2) + " px; fractal dimension (artery) " +
                    text::fixed(m.fractal_dimension_artery(), 3);
  if (m.tortuosity()) out += "; tortuosity " + text::fixed(*m.tortuosity(), 3);
  return out;
}

std::vector<Citation> citations_above_floor(const PassageEvidence& p) {
  kb::GroundingResult g = kb::ground(p.hits, p.score_floor);
  return g.citations;
}

std::string tool_name(const StepRecord& rec) {
  return rec.tool->display_name.empty() ? rec.tool->tool_id : rec.tool->display_name;
}

std::optional<EvidenceItem> evidence_for(const StepRecord& rec, const IntegratedFindings& f) {
  if (!rec.ok() || !rec.tool) return std::nullopt;
  const auto& id = rec.step.step_id;
  const auto name = tool_name(rec);
  const auto& out = rec.payload();
  std::string body;
  std::vector<Citation> citations;
  switch (rec.tool->function) {
    case ToolFunction::Modality: body = "Modality: " + predictions_text(out); break;
    case ToolFunction::Quality: body = "Image quality: " + predictions_text(out); break;
    case ToolFunction::Laterality: body = "Laterality: " + predictions_text(out); break;
    case ToolFunction::Screening:
    case ToolFunction::Triage:
    case ToolFunction::Specialist: body = name + ": " + predictions_text(out); break;
    case ToolFunction::Segmentation: {
      std::string parts;
      for (const auto& l : f.lesions) {
        if (l.step_id != id) continue;
        if (!parts.empty()) parts += "; ";
        parts += range_text(l.lesions);
      }
      body = name + ": " + (parts.empty() ? std::string("no lesions detected") : parts);
      break;
    }
    case ToolFunction::VesselAnalysis:
      if (!f.vessels || f.vessels->step_id != id) return std::nullopt;
      body = name + ": " + vessel_text(f.vessels->metrics);
      break;
    case ToolFunction::RiskRegression:
    case ToolFunction::Demographic:
      if (rec.tool->output_kind() == OutputKind::Classification) {
        body = name + ": " + predictions_text(out);
        break;
      }
      for (const auto& r : f.regressions) {
        if (r.step_id == id) body = name + ": " + regression_text(r.output);
      }
      break;
    case ToolFunction::Detection:
      for (const auto& d : f.detections) {
        if (d.step_id != id) continue;
        std::string parts;
        for (const auto& x : d.detections) {
          if (!parts.empty()) parts += ", ";
          parts += x.label + " " + percent(x.confidence);
        }
        body = name + ": " + std::to_string(d.detections.size()) + " detected" +
               (parts.empty() ? std::string() : " (" + parts + ")");
      }
      break;
    case ToolFunction::Generation:
    case ToolFunction::Report:
      for (const auto& g : f.generations) {
        if (g.step_id != id) continue;
        body = name + ": generated " + std::string(to_string(g.output.artifact_kind)) + " " + g.output.artifact_ref;
        if (!g.output.artifact_id.empty()) body += " (image id " + g.output.artifact_id + ")";
      }
      break;
    case ToolFunction::Retrieval:
      for (const auto& p : f.passages) {
        if (p.step_id != id) continue;
        citations = citations_above_floor(p);
        body = "Reference literature for '" + p.query + "': " + std::to_string(citations.size()) + " of " +
               std::to_string(p.hits.size()) + " passages above the relevance floor";
      }
      break;
  }
  if (body.empty()) return std::nullopt;
  if (rec.step.origin == StepOrigin::Revision) body += " [revision " + std::to_string(rec.step.round) + "]";
  return EvidenceItem{id, std::move(body), std::move(citations)};
}

std::string tool_of(const ExecutionState& st, const std::string& step_id) {
  const auto* rec = st.find(step_id);
  return rec ? rec->step.tool_id : step_id;
}

}  // namespace

StructuredReport respond(const ClinicalCase& c, const IntegratedFindings& f, const ExecutionState& st,
                         const std::optional<GroundingOutcome>& grounding, const OrchestratorConfig& config) {
  StructuredReport r;
  const bool text_only = c.images.empty();

  if (f.modality) {
    r.modality = f.modality->top.label + " (" + percent(f.modality->top.probability) + ")";
    for (const auto& a : f.modality->alternatives) r.modality += ", " + a.label + " (" + percent(a.probability) + ")";
  } else {
    r.modality = text_only ? "not applicable (text-only query)" : "Unknown";
  }

  if (f.quality) {
    if (f.quality->label == "gradable_with_artifacts") {
      r.image_quality = "gradable with artifacts";
      if (f.quality->artifact_count) r.image_quality += " (" + std::to_string(*f.quality->artifact_count) + " artifacts segmented)";
    } else if (!f.quality->gradable) {
      r.image_quality = "ungradable; findings reported with reduced confidence";
    } else {
      r.image_quality = f.quality->label;
    }
  } else {
    r.image_quality = text_only ? "not applicable (text-only query)" : "not assessed";
  }

  if (f.laterality) {
    r.laterality = f.laterality->top.label + (f.laterality->source == "metadata"
                                                  ? std::string(" (image metadata)")
                                                  : " (" + percent(f.laterality->top.probability) + ")");
  } else {
    r.laterality = text_only ? "not applicable (text-only query)" : "Unknown";
  }

  std::string recommendation;
  if (!f.diagnosis.empty()) {
    const auto& d = f.diagnosis.front();
    r.diagnosis = d.label + " (" + percent(d.probability) + ")";
    if (!d.refines.empty() && !text::iequals(d.refines, d.label)) {
      r.diagnosis += ", refining screening result " + d.refines;
    }
    if (f.has_flag("conflict_unresolved")) {
      for (const auto& k : f.conflicts) {
        if (k.parties.size() >= 2 && k.resolution == ConflictResolution::EscalatedUnresolved) {
          r.diagnosis += "; unresolved conflict with " + k.parties[1].tool_id + " (" + k.parties[1].label + ", " +
                         percent(k.parties[1].probability) + ")";
          break;
        }
      }
    }
    if (text::iequals(d.label, "normal") && !f.claimed_condition.empty()) {
      std::string tools;
      for (const auto& s : d.agreeing_steps) tools += (tools.empty() ? "" : ", ") + tool_of(st, s);
      r.diagnosis += "; no signs of " + f.claimed_condition + " detected";
      if (!tools.empty()) r.diagnosis += " (negative specialist checks: " + tools + ")";
    }
    for (std::size_t i = 1; i < f.diagnosis.size(); ++i) {
      r.diagnosis += i == 1 ? "; other candidates: " : ", ";
      r.diagnosis += f.diagnosis[i].label + " (" + percent(f.diagnosis[i].probability) + ")";
    }
    recommendation = config.recommendations.lookup(d.label, d.refines);
  } else {
    r.diagnosis = text_only ? "not applicable (no image provided)" : "undetermined";
    recommendation = config.recommendations.lookup("");
  }
  if (f.has_flag("conflict_unresolved")) recommendation += "; specialist review advised because tool outputs conflict";
  if (f.has_flag("low_confidence")) recommendation += "; repeat imaging advised because the image is ungradable";
  r.recommendations = recommendation;

  const std::string diagnosis_step = f.diagnosis.empty() ? std::string() : f.diagnosis.front().step_id;
  for (const auto& rec : st.records) {
    auto item = evidence_for(rec, f);
    if (!item) continue;
    if (grounding && rec.step.step_id == diagnosis_step) {
      if (grounding->result.supported) {
        item->citations = grounding->result.citations;
      } else {
        item->text += " (tool-derived, no literature citation)";
      }
    }
    r.evidence.push_back(std::move(*item));
  }
  for (const auto& k : f.conflicts) {
    if (k.parties.size() < 2 || !k.resolution) continue;
    r.evidence.push_back({k.parties[1].step_id,
                          "Conflict between " + k.parties[0].tool_id + " (" + k.parties[0].label + ") and " +
                              k.parties[1].tool_id + " (" + k.parties[1].label + "): " +
                              std::string(to_string(*k.resolution)),
                          {}});
  }

  r.flags = f.flags;
  if (grounding && !grounding->result.supported) r.flags.push_back("diagnosis_uncited");
  if (r.evidence.empty() && std::find(r.flags.begin(), r.flags.end(), "insufficient_evidence") == r.flags.end()) {
    r.flags.push_back("insufficient_evidence");
  }
  return r;
}

}  // namespace ocuflow

#include "ocuflow/core/json_io.hpp"

#include <set>

#include "ocuflow/core/error.hpp"

namespace ocuflow {

namespace {

const Json& require(const Json& doc, const char* key, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw Error(ErrorCode::SchemaViolation, path.empty() ? key : path + "." + key);
  }
  return doc.at(key);
}

std::string require_string(const Json& doc, const char* key, const std::string& path,
                           bool non_empty = true) {
  const auto& v = require(doc, key, path);
  auto where = path.empty() ? std::string(key) : path + "." + key;
  if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, where);
  auto s = v.get<std::string>();
  if (non_empty && s.empty()) throw Error(ErrorCode::SchemaViolation, where);
  return s;
}

std::optional<std::string> optional_string(const Json& doc, const char* key,
                                           const std::string& path) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  if (!doc.at(key).is_string()) throw Error(ErrorCode::SchemaViolation, path + "." + key);
  return doc.at(key).get<std::string>();
}

}  // namespace

ClinicalCase parse_case(const Json& doc, const ModalityCatalog& catalog) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "$");
  ClinicalCase c;
  c.case_id = require_string(doc, "case_id", "");
  if (doc.contains("query")) {
    if (!doc.at("query").is_string()) throw Error(ErrorCode::SchemaViolation, "query");
    c.query = doc.at("query").get<std::string>();
  }
  if (doc.contains("images")) {
    const auto& images = doc.at("images");
    if (!images.is_array()) throw Error(ErrorCode::SchemaViolation, "images");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto path = "images[" + std::to_string(i) + "]";
      const auto& img = images[i];
      if (!img.is_object()) throw Error(ErrorCode::SchemaViolation, path);
      ImageRef ref;
      ref.image_id = require_string(img, "image_id", path);
      ref.uri = require_string(img, "uri", path);
      if (auto hint = optional_string(img, "modality_hint", path)) {
        ref.modality_hint = catalog.parse(*hint);
      }
      if (auto hint = optional_string(img, "laterality_hint", path)) {
        ref.laterality_hint = parse_laterality(*hint);
      }
      if (!seen.insert(ref.image_id).second) {
        throw Error(ErrorCode::DuplicateImageId, ref.image_id);
      }
      c.images.push_back(std::move(ref));
    }
  }
  if (c.images.empty() && c.query.empty()) {
    throw Error(ErrorCode::SchemaViolation, "images|query");
  }
  if (doc.contains("ground_truth") && !doc.at("ground_truth").is_null()) {
    const auto& gt = doc.at("ground_truth");
    if (!gt.is_object()) throw Error(ErrorCode::SchemaViolation, "ground_truth");
    GroundTruth truth;
    truth.diagnosis = require_string(gt, "diagnosis", "ground_truth");
    if (gt.contains("expected_tools")) {
      const auto& tools = gt.at("expected_tools");
      if (!tools.is_array()) throw Error(ErrorCode::SchemaViolation, "ground_truth.expected_tools");
      for (std::size_t i = 0; i < tools.size(); ++i) {
        if (!tools[i].is_string()) {
          throw Error(ErrorCode::SchemaViolation,
                      "ground_truth.expected_tools[" + std::to_string(i) + "]");
        }
        truth.expected_tools.push_back(tools[i].get<std::string>());
      }
    }
    truth.modality = optional_string(gt, "modality", "ground_truth");
    c.ground_truth = std::move(truth);
  }
  return c;
}

Json to_json(const ClinicalCase& c) {
  Json images = Json::array();
  for (const auto& img : c.images) {
    Json j{{"image_id", img.image_id}, {"uri", img.uri}};
    if (img.modality_hint) j["modality_hint"] = img.modality_hint->display();
    if (img.laterality_hint) j["laterality_hint"] = std::string(to_string(*img.laterality_hint));
    images.push_back(std::move(j));
  }
  Json doc{{"case_id", c.case_id}, {"images", std::move(images)}, {"query", c.query}};
  if (c.ground_truth) {
    Json gt{{"diagnosis", c.ground_truth->diagnosis},
            {"expected_tools", c.ground_truth->expected_tools}};
    if (c.ground_truth->modality) gt["modality"] = *c.ground_truth->modality;
    doc["ground_truth"] = std::move(gt);
  }
  return doc;
}

Json to_json(const RankedPrediction& p) {
  return Json{{"label", p.label}, {"probability", p.probability}};
}

Json to_json(const ClassificationOutput& out) {
  Json preds = Json::array();
  for (const auto& p : out.predictions()) preds.push_back(to_json(p));
  return Json{{"predictions", std::move(preds)}, {"threshold_used", out.threshold_used()}};
}

Json to_json(const LesionInstanceSet& set) {
  Json j{{"lesion_type", set.lesion_type}, {"count", set.count}, {"areas", set.areas}};
  if (set.area_min) {
    j["area_min"] = *set.area_min;
    j["area_max"] = *set.area_max;
    j["area_mean"] = *set.area_mean;
  }
  return j;
}

Json to_json(const VesselMetrics& m) {
  Json j{{"crae", m.crae()},
         {"crve", m.crve()},
         {"avr", m.avr_reported()},
         {"vessel_area_density", m.vessel_area_density()},
         {"fractal_dimension_artery", m.fractal_dimension_artery()}};
  if (m.tortuosity()) j["tortuosity"] = *m.tortuosity();
  return j;
}

Json to_json(const RegressionOutput& r) {
  Json j{{"quantity", r.quantity}, {"value", r.value}};
  if (r.scale_max) j["scale_max"] = *r.scale_max;
  if (!r.unit.empty()) j["unit"] = r.unit;
  if (!r.label.empty()) j["label"] = r.label;
  return j;
}

Json to_json(const GenerationOutput& g) {
  return Json{{"artifact_kind", std::string(to_string(g.artifact_kind))},
              {"artifact_ref", g.artifact_ref},
              {"artifact_id", g.artifact_id},
              {"derived_from", g.derived_from}};
}

Json to_json(const StructuredReport& r) {
  Json evidence = Json::array();
  for (const auto& e : r.evidence) {
    Json cites = Json::array();
    for (const auto& c : e.citations) {
      cites.push_back(Json{{"source_id", c.source_id}, {"passage_id", c.passage_id}});
    }
    evidence.push_back(Json{{"step_id", e.step_id}, {"text", e.text}, {"citations", cites}});
  }
  return Json{{"modality", r.modality},
              {"image_quality", r.image_quality},
              {"laterality", r.laterality},
              {"diagnosis", r.diagnosis},
              {"evidence", std::move(evidence)},
              {"recommendations", r.recommendations},
              {"flags", r.flags}};
}

StructuredReport report_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "$");
  StructuredReport r;
  r.modality = require_string(doc, "modality", "");
  r.image_quality = require_string(doc, "image_quality", "");
  r.laterality = require_string(doc, "laterality", "");
  r.diagnosis = require_string(doc, "diagnosis", "");
  r.recommendations = require_string(doc, "recommendations", "");
  const auto& evidence = require(doc, "evidence", "");
  if (!evidence.is_array()) throw Error(ErrorCode::SchemaViolation, "evidence");
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    auto path = "evidence[" + std::to_string(i) + "]";
    EvidenceItem item;
    item.step_id = require_string(evidence[i], "step_id", path);
    item.text = require_string(evidence[i], "text", path);
    if (evidence[i].contains("citations")) {
      const auto& cites = evidence[i].at("citations");
      if (!cites.is_array()) throw Error(ErrorCode::SchemaViolation, path + ".citations");
      for (std::size_t k = 0; k < cites.size(); ++k) {
        auto cpath = path + ".citations[" + std::to_string(k) + "]";
        item.citations.push_back({require_string(cites[k], "source_id", cpath),
                                  require_string(cites[k], "passage_id", cpath)});
      }
    }
    r.evidence.push_back(std::move(item));
  }
  if (doc.contains("flags")) {
    const auto& flags = doc.at("flags");
    if (!flags.is_array()) throw Error(ErrorCode::SchemaViolation, "flags");
    for (const auto& f : flags) {
      if (!f.is_string()) throw Error(ErrorCode::SchemaViolation, "flags");
      r.flags.push_back(f.get<std::string>());
    }
  }
  return r;
}

void validate_report(const StructuredReport& r) {
  const std::pair<const char*, const std::string*> fields[] = {
      {"modality", &r.modality},   {"image_quality", &r.image_quality},
      {"laterality", &r.laterality}, {"diagnosis", &r.diagnosis},
      {"recommendations", &r.recommendations}};
  for (const auto& [name, value] : fields) {
    if (value->empty()) throw Error(ErrorCode::SchemaViolation, name);
  }
  bool insufficient = false;
  for (const auto& f : r.flags) insufficient = insufficient || f == "insufficient_evidence";
  if (r.evidence.empty() && !insufficient) throw Error(ErrorCode::SchemaViolation, "evidence");
  for (std::size_t i = 0; i < r.evidence.size(); ++i) {
    if (r.evidence[i].step_id.empty() || r.evidence[i].text.empty()) {
      throw Error(ErrorCode::SchemaViolation, "evidence[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace ocuflow

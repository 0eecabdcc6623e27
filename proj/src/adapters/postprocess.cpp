#include "ocuflow/adapters/postprocess.hpp"

#include <map>

#include "ocuflow/core/error.hpp"

namespace ocuflow {

std::vector<LesionInstanceSet> segmentation_to_metrics(std::span<const RawLesions> raw) {
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& r : raw) {
    auto& areas = grouped[r.lesion_type];
    areas.insert(areas.end(), r.areas.begin(), r.areas.end());
  }
  std::vector<LesionInstanceSet> out;
  out.reserve(grouped.size());
  for (auto& [type, areas] : grouped) out.push_back(lesion_stats(type, std::move(areas)));
  return out;
}

std::vector<LesionInstanceSet> segmentation_to_metrics(const Json& raw) {
  const Json& list = raw.is_object() ? raw.at("lesions") : raw;
  if (!list.is_array()) throw Error(ErrorCode::SchemaViolation, "lesions");
  std::vector<RawLesions> parsed;
  for (const auto& item : list) {
    parsed.push_back({item.at("lesion_type").get<std::string>(),
                      item.at("areas").get<std::vector<double>>()});
  }
  return segmentation_to_metrics(parsed);
}

VesselMetrics vessel_metrics(const RawVessels& raw) {
  return VesselMetrics::from_calibers(raw.crae, raw.crve, raw.vessel_area_density,
                                      raw.fractal_dimension_artery, raw.tortuosity);
}

VesselMetrics vessel_metrics(const Json& raw) {
  RawVessels v;
  v.crae = raw.at("crae").get<double>();
  v.crve = raw.at("crve").get<double>();
  v.vessel_area_density = raw.at("vessel_area_density").get<double>();
  v.fractal_dimension_artery = raw.at("fractal_dimension_artery").get<double>();
  if (raw.contains("tortuosity") && !raw["tortuosity"].is_null()) {
    v.tortuosity = raw["tortuosity"].get<double>();
  }
  return vessel_metrics(v);
}

ClassificationOutput classification_from_payload(const Json& payload) {
  std::vector<RankedPrediction> preds;
  for (const auto& p : payload.at("predictions")) {
    preds.push_back({p.at("label").get<std::string>(), p.at("probability").get<double>()});
  }
  return ClassificationOutput(std::move(preds), payload.at("threshold_used").get<double>());
}

RegressionOutput regression_from_payload(const Json& payload) {
  RegressionOutput r;
  r.quantity = payload.at("quantity").get<std::string>();
  r.value = payload.at("value").get<double>();
  if (payload.contains("scale_max")) r.scale_max = payload["scale_max"].get<double>();
  r.unit = payload.value("unit", std::string());
  r.label = payload.value("label", std::string());
  if (r.scale_max && (r.value < 1.0 || r.value > *r.scale_max)) {
    throw Error(ErrorCode::InvalidArgument, "ordinal value out of [1,scale_max]");
  }
  return r;
}

GenerationOutput generation_from_payload(const Json& payload) {
  GenerationOutput g;
  auto kind = parse_artifact_kind(payload.at("artifact_kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::SchemaViolation, "artifact_kind");
  g.artifact_kind = *kind;
  g.artifact_ref = payload.at("artifact_ref").get<std::string>();
  g.artifact_id = payload.value("artifact_id", std::string());
  g.derived_from = payload.value("derived_from", std::vector<std::string>{});
  return g;
}

std::vector<Detection> detections_from_payload(const Json& payload) {
  std::vector<Detection> out;
  for (const auto& d : payload.at("detections")) {
    out.push_back({d.at("label").get<std::string>(), d.at("confidence").get<double>()});
  }
  return out;
}

}  // namespace ocuflow

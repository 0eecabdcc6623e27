#include <cmath>

#include "ocuflow/registry/registry.hpp"

namespace ocuflow {

namespace {

void check_classification(const Json& out, std::vector<Violation>& v) {
  const auto& preds = out["predictions"];
  double threshold = out["threshold_used"].get<double>();
  for (std::size_t i = 1; i < preds.size(); ++i) {
    double prev = preds[i - 1]["probability"].get<double>();
    double cur = preds[i]["probability"].get<double>();
    auto path = index_path("predictions", i) + ".probability";
    if (cur > prev) v.push_back({path, "predictions not in non-increasing order"});
    if (cur < threshold) v.push_back({path, "alternative prediction below threshold_used"});
  }
}

void check_lesions(const Json& out, std::vector<Violation>& v) {
  const auto& lesions = out["lesions"];
  for (std::size_t i = 0; i < lesions.size(); ++i) {
    const auto& l = lesions[i];
    if (l["count"].get<double>() != static_cast<double>(l["areas"].size())) {
      v.push_back({index_path("lesions", i) + ".count", "count does not match areas"});
    }
  }
}

void check_vessels(const Json& out, std::vector<Violation>& v) {
  double crae = out["crae"].get<double>();
  double crve = out["crve"].get<double>();
  if (!(crve > 0.0)) {
    v.push_back({"crve", "crve must be positive"});
    return;
  }
  if (out.contains("avr") && std::fabs(out["avr"].get<double>() - crae / crve) > 1e-3) {
    v.push_back({"avr", "avr inconsistent with crae/crve"});
  }
}

void check_scalar(const Json& out, std::vector<Violation>& v) {
  if (!out.contains("scale_max")) return;
  double value = out["value"].get<double>();
  double scale_max = out["scale_max"].get<double>();
  if (value < 1.0 || value > scale_max) v.push_back({"value", "ordinal value out of [1,scale_max]"});
}

void check_passages(const Json& out, std::vector<Violation>& v) {
  const auto& hits = out["hits"];
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]["rank"].get<double>() != static_cast<double>(i + 1)) {
      v.push_back({index_path("hits", i) + ".rank", "ranks must be contiguous from 1"});
    }
    if (i > 0 && hits[i]["score"].get<double>() > hits[i - 1]["score"].get<double>()) {
      v.push_back({index_path("hits", i) + ".score", "hits not sorted by score"});
    }
  }
}

}  // namespace

ValidationResult validate_io(const ToolDescriptor& d, const Json& payload, Direction direction) {
  ValidationResult result;
  try {
    result.normalized = payload;
    const auto& schema = direction == Direction::Input ? d.input_schema : d.output_schema;
    schema.validate(result.normalized, "", result.violations);
    if (result.violations.empty() && direction == Direction::Output) {
      switch (d.output_kind()) {
        case OutputKind::Classification: check_classification(result.normalized, result.violations); break;
        case OutputKind::Lesions: check_lesions(result.normalized, result.violations); break;
        case OutputKind::VesselMetrics: check_vessels(result.normalized, result.violations); break;
        case OutputKind::Scalar: check_scalar(result.normalized, result.violations); break;
        case OutputKind::Passages: check_passages(result.normalized, result.violations); break;
        case OutputKind::Detections:
        case OutputKind::Artifact:
          break;
      }
    }
  } catch (const std::exception& e) {
    // The shipped output schemas guarantee the fields the semantic checks read;
    // a catalog with a looser schema lands here instead of escaping.
    result.violations.push_back({"$", std::string("payload does not fit output kind: ") + e.what()});
  }
  result.ok = result.violations.empty();
  if (!result.ok) result.normalized = payload;
  return result;
}

}  // namespace ocuflow

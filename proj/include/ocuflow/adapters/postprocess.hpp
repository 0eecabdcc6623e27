#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocuflow/core/json_io.hpp"
#include "ocuflow/core/model.hpp"

namespace ocuflow {

struct RawLesions {
  std::string lesion_type;
  std::vector<double> areas;
};

// One set per lesion type (duplicates merged), sorted by lesion_type.
// Throws NegativeArea.
std::vector<LesionInstanceSet> segmentation_to_metrics(std::span<const RawLesions> raw);
// Accepts a segmentation payload ({"lesions": [...]}) or the bare list.
std::vector<LesionInstanceSet> segmentation_to_metrics(const Json& raw);

struct RawVessels {
  double crae = 0.0;
  double crve = 0.0;
  double vessel_area_density = 0.0;
  double fractal_dimension_artery = 0.0;
  std::optional<double> tortuosity;
};

// avr = crae / crve. Throws ZeroVenularCaliber when crve is zero.
VesselMetrics vessel_metrics(const RawVessels& raw);
VesselMetrics vessel_metrics(const Json& raw);

struct Detection {
  std::string label;
  double confidence = 0.0;
};

// Payload readers for validated tool outputs.
ClassificationOutput classification_from_payload(const Json& payload);
RegressionOutput regression_from_payload(const Json& payload);
GenerationOutput generation_from_payload(const Json& payload);
std::vector<Detection> detections_from_payload(const Json& payload);

}  // namespace ocuflow

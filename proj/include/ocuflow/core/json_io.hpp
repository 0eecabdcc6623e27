#pragma once

#include <json.hpp>

#include "ocuflow/core/model.hpp"

namespace ocuflow {

using Json = nlohmann::json;

// Corpus case document:
//   {case_id, images[{image_id, uri, modality_hint?, laterality_hint?}], query,
//    ground_truth?{diagnosis, expected_tools[], modality?}}
// Throws SchemaViolation(field path) or DuplicateImageId.
ClinicalCase parse_case(const Json& doc,
                        const ModalityCatalog& catalog = ModalityCatalog::standard());
Json to_json(const ClinicalCase& c);

Json to_json(const RankedPrediction& p);
Json to_json(const ClassificationOutput& out);
Json to_json(const LesionInstanceSet& set);
Json to_json(const VesselMetrics& m);
Json to_json(const RegressionOutput& r);
Json to_json(const GenerationOutput& g);

Json to_json(const StructuredReport& report);
// Throws SchemaViolation naming the first missing or empty field.
StructuredReport report_from_json(const Json& doc);
// All six sections present and non-empty; evidence items carry a step id.
// An empty evidence list is only allowed alongside the "insufficient_evidence" flag.
void validate_report(const StructuredReport& report);

}  // namespace ocuflow

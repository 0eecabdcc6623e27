#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocuflow/adapters/postprocess.hpp"
#include "ocuflow/kb/index.hpp"
#include "ocuflow/orchestrator/config.hpp"
#include "ocuflow/orchestrator/state.hpp"

namespace ocuflow {

struct LabelledFinding {
  RankedPrediction top;
  std::vector<RankedPrediction> alternatives;
  std::string step_id;  // empty when taken from image metadata
  std::string source;   // tool_id or "metadata"
};

struct QualityFinding {
  std::string label;  // gradable | gradable_with_artifacts | ungradable | other tool label
  double probability = 0.0;
  bool gradable = true;
  std::optional<std::size_t> artifact_count;
  std::string step_id;
};

struct DiagnosisEntry {
  std::string label;
  double probability = 0.0;
  std::string tool_id;
  std::string step_id;
  std::string refines;                      // screening label a specialist refined
  std::vector<std::string> agreeing_steps;  // other steps consistent with this label
};

struct LesionEvidence {
  std::string step_id;
  std::string tool_id;
  std::string image_id;
  LesionInstanceSet lesions;
};

struct VesselEvidence {
  std::string step_id;
  std::string tool_id;
  VesselMetrics metrics;
};

struct RegressionEvidence {
  std::string step_id;
  std::string tool_id;
  RegressionOutput output;
};

struct DetectionEvidence {
  std::string step_id;
  std::string tool_id;
  std::vector<Detection> detections;
};

struct GenerationEvidence {
  std::string step_id;
  std::string tool_id;
  GenerationOutput output;
};

struct PassageEvidence {
  std::string step_id;
  std::string query;
  std::vector<kb::RetrievalHit> hits;
  double score_floor = 0.0;
};

struct IntegratedFindings {
  std::optional<LabelledFinding> modality;
  std::optional<QualityFinding> quality;
  std::optional<LabelledFinding> laterality;
  std::vector<DiagnosisEntry> diagnosis;  // primary first
  std::vector<LesionEvidence> lesions;
  std::optional<VesselEvidence> vessels;
  std::vector<RegressionEvidence> regressions;
  std::vector<DetectionEvidence> detections;
  std::vector<GenerationEvidence> generations;
  std::vector<PassageEvidence> passages;
  std::vector<ConflictRecord> conflicts;
  std::vector<std::string> flags;  // insufficient_evidence, low_confidence, conflict_unresolved
  std::string claimed_condition;

  bool has_flag(std::string_view f) const;
};

// Decides each conflict once the revision loop has finished.
void resolve_conflicts(std::vector<ConflictRecord>& conflicts, const ExecutionState& state, int max_rounds);

// Per-topic aggregation over successful steps; the first case image is the
// primary subject for modality, quality, laterality, and diagnosis.
IntegratedFindings integrate(const ClinicalCase& c, const ExecutionState& state,
                             std::span<const ConflictRecord> conflicts, const OrchestratorConfig& config);

Json to_json(const IntegratedFindings& f);

std::vector<kb::RetrievalHit> hits_from_payload(const Json& payload);

struct GroundingOutcome {
  std::string step_id;
  std::string claim;
  kb::GroundingResult result;
};

// Six-section report. Evidence items are built from successful steps only;
// the diagnosis item carries literature citations when grounding supports it.
StructuredReport respond(const ClinicalCase& c, const IntegratedFindings& findings, const ExecutionState& state,
                         const std::optional<GroundingOutcome>& grounding, const OrchestratorConfig& config);

}  // namespace ocuflow

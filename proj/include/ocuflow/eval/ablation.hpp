#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ocuflow/eval/metrics.hpp"
#include "ocuflow/orchestrator/orchestrator.hpp"

namespace ocuflow::eval {

struct AblationCase {
  std::string case_id;
  int tier = 0;
  std::string modality;  // ground-truth modality, "unknown" when absent
  std::string predicted;
  std::string truth;
  bool correct = false;
  std::vector<std::string> invoked_tools;
  std::vector<std::string> out_of_tier_tools;  // must stay empty
  std::string error;
};

struct ModalityBreakdown {
  std::size_t n_cases = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
};

struct TierResult {
  int tier = 0;
  std::size_t tool_count = 0;
  std::size_t n_cases = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::map<std::string, ModalityBreakdown> per_modality;
};

struct AblationError {
  std::string case_id;
  int tier = 0;
  std::string error;
};

struct AblationResult {
  std::vector<TierResult> tiers;   // in the requested order
  std::vector<AblationCase> cases;  // tier-major, corpus order within a tier
  std::vector<AblationError> errors;
  std::vector<std::string> containment_violations;

  const TierResult* tier(int t) const;
};

struct AblationOptions {
  std::size_t parallelism = 1;
  DiagnosisMatcher matcher;
};

// Orchestrates every case at every tier and scores the primary diagnosis.
// Per-case failures land in `errors` and count as incorrect. Cases without
// ground truth raise MissingGroundTruth; bad tiers raise TierOutOfRange.
AblationResult run_ablation(std::span<const ClinicalCase> corpus, std::span<const int> tiers,
                            const Orchestrator& orchestrator, const AblationOptions& options = {});

Json to_json(const AblationResult& r);
// One row per tier: tier, tools, n, correct, accuracy, then per-modality accuracy.
std::string format_table(const AblationResult& r);

}  // namespace ocuflow::eval

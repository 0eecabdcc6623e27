#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ocuflow/core/json_io.hpp"

namespace ocuflow::gateway {

inline constexpr std::array<int, 5> kAdoptionLevels{0, 25, 50, 75, 100};
inline constexpr std::array<std::string_view, 4> kAdoptableComponents{"image_details", "diagnosis",
                                                                      "diagnostic_evidence", "management"};
inline constexpr int kConfidenceMin = 1;
inline constexpr int kConfidenceMax = 5;

struct FeedbackRecord {
  std::string case_id;
  std::string reader_id;
  int confidence_before = 0;
  int confidence_after = 0;
  int adoption_percent = 0;
  std::set<std::string> adopted_components;
  std::optional<std::string> free_text;
};

struct FieldError {
  std::string field;
  std::string message;
  Json allowed;  // enumeration or range, null when not applicable
};

struct FeedbackValidation {
  std::optional<FeedbackRecord> record;
  std::vector<FieldError> errors;

  bool ok() const noexcept { return record.has_value(); }
};

// Collects every field error instead of stopping at the first.
FeedbackValidation validate_feedback(const Json& doc);

Json to_json(const FeedbackRecord& r);
// JSON schema-like description of the accepted document, served to clients.
Json feedback_schema();

}  // namespace ocuflow::gateway

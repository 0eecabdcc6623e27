#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ocuflow {

enum class ErrorCode {
  EmptyInput,
  InvalidProbability,
  NegativeArea,
  SchemaViolation,
  DuplicateImageId,
  DuplicateToolId,
  MalformedDescriptor,
  TierGap,
  TierOutOfRange,
  UnsupportedSchemaVersion,
  ZeroVenularCaliber,
  DuplicateBackendKind,
  NoApplicableTools,
  DuplicateSource,
  EmptyDocument,
  EmptyQuery,
  MissingGroundTruth,
  RaterCountMismatch,
  UnknownItemId,
  InvalidCounts,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure that a spec'd operation can raise carries one of the codes
// above. `detail` is the field path, id, or reason that identifies the cause.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace ocuflow

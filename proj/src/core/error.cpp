#include "ocuflow/core/error.hpp"

namespace ocuflow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::NegativeArea: return "NegativeArea";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateImageId: return "DuplicateImageId";
    case ErrorCode::DuplicateToolId: return "DuplicateToolId";
    case ErrorCode::MalformedDescriptor: return "MalformedDescriptor";
    case ErrorCode::TierGap: return "TierGap";
    case ErrorCode::TierOutOfRange: return "TierOutOfRange";
    case ErrorCode::UnsupportedSchemaVersion: return "UnsupportedSchemaVersion";
    case ErrorCode::ZeroVenularCaliber: return "ZeroVenularCaliber";
    case ErrorCode::DuplicateBackendKind: return "DuplicateBackendKind";
    case ErrorCode::NoApplicableTools: return "NoApplicableTools";
    case ErrorCode::DuplicateSource: return "DuplicateSource";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::RaterCountMismatch: return "RaterCountMismatch";
    case ErrorCode::UnknownItemId: return "UnknownItemId";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace ocuflow

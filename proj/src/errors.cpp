#include "kgfuse/errors.hpp"

namespace kgfuse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ManifestNotFound: return "ManifestNotFound";
    case ErrorCode::DuplicateDocId: return "DuplicateDocId";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::DanglingEndpoint: return "DanglingEndpoint";
    case ErrorCode::ScopeMismatch: return "ScopeMismatch";
    case ErrorCode::UnknownSeed: return "UnknownSeed";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::EmptyMemberSet: return "EmptyMemberSet";
    case ErrorCode::MissingMemberVector: return "MissingMemberVector";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::GateRejected: return "GateRejected";
    case ErrorCode::SelfMerge: return "SelfMerge";
    case ErrorCode::AmbiguousEndpoint: return "AmbiguousEndpoint";
    case ErrorCode::EvidenceNotAnchored: return "EvidenceNotAnchored";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::ScopeNotClean: return "ScopeNotClean";
    case ErrorCode::MissingArtifacts: return "MissingArtifacts";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ConnectionLost: return "ConnectionLost";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace kgfuse

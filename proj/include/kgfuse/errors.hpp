#pragma once

#include <stdexcept>
#include <string>

namespace kgfuse {

enum class ErrorCode {
  // corpus
  EmptyDocument,
  InvalidConfig,
  ManifestNotFound,
  DuplicateDocId,
  UnreadableFile,
  // graph store
  DanglingEndpoint,
  ScopeMismatch,
  UnknownSeed,
  NotFound,
  // vector index
  DimensionMismatch,
  DegenerateVector,
  // sync
  EmptyMemberSet,
  MissingMemberVector,
  // toolkit
  UnknownTool,
  SchemaViolation,
  GateRejected,
  SelfMerge,
  AmbiguousEndpoint,
  EvidenceNotAnchored,
  // retrieval
  EmptyIndex,
  Timeout,
  // eval
  MissingPrediction,
  // cli
  ScopeNotClean,
  MissingArtifacts,
  // transport-style failures (retryable)
  RateLimited,
  ConnectionLost,
  Internal,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Retryable failure class: timeouts, rate limits, dropped connections.
// The retry layer swallows these; the ReAct loop never sees them.
class TransientError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgfuse

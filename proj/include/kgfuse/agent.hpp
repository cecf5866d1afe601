#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/corpus.hpp"
#include "kgfuse/document_store.hpp"
#include "kgfuse/schema.hpp"
#include "kgfuse/toolkit.hpp"

namespace kgfuse::agent {

enum class ErrorClass { Transient, Permanent };

const char* to_string(ErrorClass c);

// Timeouts, rate limits and dropped connections retry invisibly; everything
// else (schema violations, id conflicts, tool failures) hits the error
// branch.
ErrorClass classify_error(const std::exception& e);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

// Runs fn, retrying transient failures with exponential backoff. Rethrows
// after max_attempts. retry_log (optional) receives one entry per retry.
nlohmann::json with_retry(const std::function<nlohmann::json()>& fn, const RetryPolicy& policy,
                          std::vector<std::string>* retry_log = nullptr);

struct ErrorEvent {
  ErrorClass error_class = ErrorClass::Permanent;
  std::string message;
};

// The checkpointable working memory.
struct AgentState {
  std::string session_id;
  std::string doc_id;
  size_t paragraph_index = 0;
  std::string current_chunk_id;
  std::vector<nlohmann::json> recent_observations;  // bounded
  size_t summarized_observations = 0;               // folded-away older ones
  std::vector<std::string> recent_entities;         // bounded, latest last
  std::vector<ErrorEvent> error_history;
  size_t round = 0;

  nlohmann::json to_json() const;
  static AgentState from_json(const nlohmann::json& j);
};

struct PromptContext {
  std::string phase = "react";  // react | handle_todos
  std::string constraints;      // READ / SEARCH / VERIFY / CONSTRUCT blocks
  std::string active_schema;    // <active_schema> block
  std::string working_memory;
  std::string error_corrections;  // present only after permanent errors
  std::string paragraph_text;
  std::string chunk_id;
  const std::vector<nlohmann::json>* observations = nullptr;  // structured view
  const toolkit::TodoItem* todo = nullptr;

  std::string to_text() const;
};

// Size-bounded prompt assembly: cognitive constraints, schema block,
// working memory, error-correction injections.
PromptContext assemble_prompt(const AgentState& state, const schema::SchemaProfile& profile,
                              const toolkit::ToolState& tool_state, const corpus::Chunk* current,
                              size_t observation_bound = 10);

struct Decision {
  bool chunk_complete = false;
  std::string summary;
  std::vector<toolkit::ToolCall> tool_calls;
};

class DecisionPolicy {
 public:
  virtual ~DecisionPolicy() = default;
  virtual Decision decide(const PromptContext& context) = 0;
  // Phase-1 schema discovery; nullopt falls back to the bootstrap profile.
  virtual std::optional<schema::CandidateSchema> propose_schema(
      const std::vector<std::string>& samples) {
    (void)samples;
    return std::nullopt;
  }
  // Between-paragraph todo handling; the default resolves without action.
  virtual Decision handle_todo(const toolkit::TodoItem& todo, const PromptContext& context) {
    (void)todo;
    (void)context;
    return {true, "todo resolved without action", {}};
  }
};

struct AgentConfig {
  size_t max_rounds = 12;
  size_t observation_bound = 10;
  RetryPolicy retry;
  std::filesystem::path run_dir;
  bool require_clean_backends = false;
  size_t embedding_dim = 64;
};

// Crash-injection and instrumentation points.
struct SessionHooks {
  std::function<void(size_t archived_chunk_count)> after_archive;
  std::function<void(const std::string& chunk_id)> on_chunk_start;
};

struct SessionReport {
  std::string session_id;
  size_t chunk_count = 0;
  size_t chunks_processed = 0;
  size_t entities = 0;
  size_t relations = 0;
  size_t merges = 0;
  size_t tool_calls = 0;
  size_t alerts = 0;
  size_t todo_remaining = 0;
  std::vector<toolkit::ReviewItem> review_queue;
  std::vector<std::string> summaries;

  nlohmann::json to_json() const;
};

// One bundle of in-process stores standing in for the four memory tiers;
// snapshots round-trip through the run directory for crash recovery.
struct Stores {
  graph::GraphStore graph;
  vec::VectorIndex vectors;
  corpus::DocumentStore docs;
  toolkit::ProvenanceLedger ledger;

  explicit Stores(size_t dimension) : vectors(dimension) {}

  void save_all(const std::filesystem::path& dir) const;
  void load_all(const std::filesystem::path& dir);
  static bool snapshots_exist(const std::filesystem::path& dir);
};

// Versioned checkpoint file, written atomically (temp + rename) after every
// paragraph transition. Recovery resumes at the first non-ARCHIVED chunk.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;
  std::string session_id;
  AgentState state;
  std::vector<toolkit::TodoItem> todo_queue;
  std::vector<toolkit::ReviewItem> review_queue;
  toolkit::ToolCounters counters;
  uint64_t schema_version = 0;
  std::string schema_domain;
  bool completed = false;

  void save(const std::filesystem::path& file) const;
  static std::optional<Checkpoint> load(const std::filesystem::path& file);
};

// The outer state machine: bootstrap_schema -> read_paragraph -> react_loop
// -> next_paragraph -> handle_todos -> finish.
class Session {
 public:
  Session(Stores& stores, vec::EmbeddingProvider& embedder, AgentConfig config,
          IsolationScope scope);

  SessionReport run(DecisionPolicy& policy, const SessionHooks& hooks = {});

  // One paragraph's ReAct loop; exposed for unit tests. Returns the summary.
  std::string react_loop(DecisionPolicy& policy, const corpus::Chunk& chunk);

  const schema::SchemaProfile& profile() const { return profile_; }
  schema::SchemaOrchestrator& orchestrator() { return orchestrator_; }
  toolkit::ToolState& tool_state() { return tool_state_; }
  AgentState& state() { return state_; }
  toolkit::Toolkit& kit() { return *kit_; }

 private:
  void bootstrap_schema(DecisionPolicy& policy);
  void handle_todos(DecisionPolicy& policy);
  void save_checkpoint(bool completed);
  nlohmann::json dispatch_with_retry(const toolkit::ToolCall& call);
  void note_observation(const nlohmann::json& observation);

  Stores& stores_;
  vec::EmbeddingProvider& embedder_;
  AgentConfig config_;
  IsolationScope scope_;
  schema::SchemaOrchestrator orchestrator_;
  schema::SchemaProfile profile_;
  std::unique_ptr<sync::SyncCoordinator> sync_;
  std::unique_ptr<toolkit::Toolkit> kit_;
  toolkit::ToolState tool_state_;
  AgentState state_;
  std::vector<std::string> summaries_;
};

// Thrown by test hooks to simulate a process crash at a chunk boundary.
struct CrashInjected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kgfuse::agent

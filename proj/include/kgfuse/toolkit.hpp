#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/document_store.hpp"
#include "kgfuse/gate.hpp"
#include "kgfuse/graph_store.hpp"
#include "kgfuse/provenance.hpp"
#include "kgfuse/retrieval.hpp"
#include "kgfuse/schema.hpp"
#include "kgfuse/sync.hpp"
#include "kgfuse/vector_index.hpp"

namespace kgfuse::toolkit {

struct ToolCall {
  std::string tool_name;
  nlohmann::json args = nlohmann::json::object();
  std::string call_id;
};

struct TodoItem {
  std::string task;
  std::string todo_type;  // disambiguate | verify | attribute_completion | follow_up
  std::string related_entity;
  int priority = 0;
};

struct ReviewItem {
  std::string subject;
  std::string reason;
  int priority = 0;
};

struct ToolCounters {
  size_t merges = 0;
  size_t tool_calls = 0;
  size_t creates = 0;
  size_t updates = 0;
  size_t deletes = 0;
};

// Bridge between the tool layer and the agent loop: reading position,
// queues and counters. Confined to one session.
struct ToolState {
  IsolationScope scope;
  const corpus::Chunk* current_chunk = nullptr;
  std::string current_doc_id;
  std::string current_doc_title;
  size_t paragraph_index = 0;
  size_t paragraph_total = 0;
  std::vector<TodoItem> todo_queue;
  std::vector<ReviewItem> review_queue;
  ToolCounters counters;
};

nlohmann::json to_json(const TodoItem& item);
nlohmann::json to_json(const ReviewItem& item);
TodoItem todo_from_json(const nlohmann::json& j);
ReviewItem review_from_json(const nlohmann::json& j);

// Validates `args` against a tool contract (a JSON-schema subset: object
// with typed properties, required list, enums; unknown keys are rejected).
// Throws Error(SchemaViolation).
void validate_args(const nlohmann::json& schema, const nlohmann::json& args,
                   const std::string& tool_name);

// The 16-tool layer. Write tools run the quality gate where applicable,
// record provenance implicitly and keep the vector index aligned through
// the sync coordinator. Read tools never mutate the graph.
class Toolkit {
 public:
  Toolkit(graph::GraphStore& graph, vec::VectorIndex& vectors, corpus::DocumentStore& docs,
          ProvenanceLedger& ledger, sync::SyncCoordinator& sync, vec::EmbeddingProvider& embedder,
          schema::SchemaProfile* profile = nullptr,
          schema::SchemaOrchestrator* orchestrator = nullptr,
          GateConfig gate_config = GateConfig::defaults())
      : graph_(graph), vectors_(vectors), docs_(docs), ledger_(ledger), sync_(sync),
        embedder_(embedder), profile_(profile), orchestrator_(orchestrator),
        gate_config_(std::move(gate_config)) {}

  // Observation envelope: {"tool", "call_id", "ok", "result"| "error"}.
  // TransientError propagates (the retry layer owns it); every other failure
  // becomes an error payload for the policy to react to.
  nlohmann::json dispatch(const ToolCall& call, ToolState& state);

  static const std::vector<std::string>& tool_names();
  static nlohmann::json tool_schemas();
  static nlohmann::json schema_for(const std::string& tool_name);

  GateResult run_gate(const std::string& name) const { return quality_gate(name, gate_config_); }

  // tools (result payloads only; dispatch wraps them)
  nlohmann::json read_paragraph(const nlohmann::json& args, ToolState& state);
  nlohmann::json browse_context(const nlohmann::json& args, ToolState& state);
  nlohmann::json search_kg(const nlohmann::json& args, ToolState& state);
  nlohmann::json explore_fusion(const nlohmann::json& args, ToolState& state);
  nlohmann::json create_entity(const nlohmann::json& args, ToolState& state);
  nlohmann::json create_relation(const nlohmann::json& args, ToolState& state);
  nlohmann::json batch_kg_operations(const nlohmann::json& args, ToolState& state);
  nlohmann::json update_entity(const nlohmann::json& args, ToolState& state);
  nlohmann::json update_relation(const nlohmann::json& args, ToolState& state);
  nlohmann::json merge_entity(const nlohmann::json& args, ToolState& state);
  nlohmann::json merge_relation(const nlohmann::json& args, ToolState& state);
  nlohmann::json delete_entity(const nlohmann::json& args, ToolState& state);
  nlohmann::json delete_relation(const nlohmann::json& args, ToolState& state);
  nlohmann::json mark_for_review(const nlohmann::json& args, ToolState& state);
  nlohmann::json create_todo(const nlohmann::json& args, ToolState& state);
  nlohmann::json get_progress(const nlohmann::json& args, ToolState& state);

 private:
  struct ResolvedEntity {
    std::string id;
  };
  // exact/alias resolution; throws NotFound or AmbiguousEndpoint
  std::string resolve_entity(const std::string& name, const IsolationScope& scope,
                             const char* role) const;
  void require_evidence(const std::string& source_chunk, const std::string& evidence,
                        const IsolationScope& scope) const;
  const corpus::Chunk* find_chunk(const std::string& chunk_id, const IsolationScope& scope) const;
  std::string resolve_relation_type(const std::string& raw, std::string* schema_state);
  std::string record_provenance(const std::string& object_id, const std::string& kind,
                                const std::string& chunk_id, const std::string& evidence,
                                ProvOperation op, double confidence, const std::string& detail);

  graph::GraphStore& graph_;
  vec::VectorIndex& vectors_;
  corpus::DocumentStore& docs_;
  ProvenanceLedger& ledger_;
  sync::SyncCoordinator& sync_;
  vec::EmbeddingProvider& embedder_;
  schema::SchemaProfile* profile_;
  schema::SchemaOrchestrator* orchestrator_;
  GateConfig gate_config_;
};

}  // namespace kgfuse::toolkit

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/corpus.hpp"
#include "kgfuse/embedder.hpp"
#include "kgfuse/graph_store.hpp"
#include "kgfuse/provenance.hpp"
#include "kgfuse/vector_index.hpp"

namespace kgfuse::sync {

enum class SyncStatus { Success, Failed };

// The outcome IS the contract: SUCCESS means both ids exist and the graph
// object's embedding_ref points at the vector; FAILED means a compensation
// action was taken and logged.
struct SyncOutcome {
  SyncStatus status = SyncStatus::Failed;
  std::string kg_id;
  std::string vec_id;
  std::string alert;
};

// Fault injection points; a hook that throws simulates the backend failure.
struct SyncHooks {
  std::function<void(const std::string& object_id)> before_vector_insert;
  std::function<void(const std::string& object_id)> before_write_back;
};

struct ConsistencyReport {
  struct DanglingRef {
    std::string object_id;
    std::string vec_id;
  };
  struct OrphanVector {
    std::string vec_id;
    std::string object_id;
  };
  struct PendingAlert {
    std::string object_id;
    std::string phase;
    std::string action;
  };

  std::vector<DanglingRef> dangling_refs;    // embedding_ref -> missing vector
  std::vector<OrphanVector> orphan_vectors;  // vector -> missing/deleted graph object
  std::vector<PendingAlert> alerts_pending;  // alerted objects still lacking a ref

  bool empty() const {
    return dangling_refs.empty() && orphan_vectors.empty() && alerts_pending.empty();
  }
  nlohmann::json to_json() const;
};

// Sequential write with failure compensation and reference write-back:
// graph first, then embedding, then vector insert, then write-back. A
// vector-side failure deletes freshly created graph objects (or marks
// pre-existing ones) and records an alert; a write-back failure preserves
// the primary writes and records an alert for the consistency checker.
class SyncCoordinator {
 public:
  SyncCoordinator(graph::GraphStore& graph, vec::VectorIndex& vectors,
                  vec::EmbeddingProvider& embedder, toolkit::ProvenanceLedger& ledger)
      : graph_(graph), vectors_(vectors), embedder_(embedder), ledger_(ledger) {}

  void set_hooks(SyncHooks hooks) { hooks_ = std::move(hooks); }

  SyncOutcome sync_object(const graph::Entity& entity);
  SyncOutcome sync_object(const graph::HyperNode& hyper);

  // Ensures document/chunk nodes, the chunk's HyperNode (when it mentions
  // entities) and the three evidence bridges, then syncs the chunk vector.
  SyncOutcome sync_chunk(const corpus::Chunk& chunk,
                         const std::vector<std::string>& mentioned_entity_ids,
                         const IsolationScope& scope, const std::string& doc_title = "");

  // Weighted centroid of member entity vectors, divided by member count.
  // Throws EmptyMemberSet / MissingMemberVector.
  std::vector<double> hypernode_centroid(const graph::HyperNode& hyper) const;

  ConsistencyReport consistency_check(const IsolationScope& scope) const;

  static std::string chunk_hyper_id(const std::string& chunk_id) { return "h:" + chunk_id; }
  static std::string entity_embed_text(const graph::Entity& entity);

 private:
  enum class Freshness { Created, PreExisting };

  void compensate(const std::string& kg_id, const std::string& kind, Freshness freshness,
                  const std::string& phase, const std::string& message);
  SyncOutcome vector_phase(const std::string& kg_id, const std::string& kind,
                           Freshness freshness, vec::Collection collection,
                           std::vector<double> embedding, const IsolationScope& scope,
                           vec::VectorPayload payload);

  graph::GraphStore& graph_;
  vec::VectorIndex& vectors_;
  vec::EmbeddingProvider& embedder_;
  toolkit::ProvenanceLedger& ledger_;
  SyncHooks hooks_;
};

}  // namespace kgfuse::sync

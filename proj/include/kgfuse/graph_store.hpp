#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/scope.hpp"

namespace kgfuse::graph {

struct Entity {
  std::string entity_id;
  std::string name;
  std::string entity_type;
  std::string description;
  std::set<std::string> aliases;
  nlohmann::json properties = nlohmann::json::object();
  double confidence = 1.0;
  std::string embedding_ref;
  std::vector<std::string> evidence_refs;  // provenance ids
  bool deleted = false;
  IsolationScope scope;
};

struct Relation {
  std::string relation_id;
  std::string head_id;
  std::string tail_id;
  std::string relation_type;  // UPPER_SNAKE_CASE
  nlohmann::json properties = nlohmann::json::object();
  double confidence = 1.0;
  std::vector<std::string> evidence_refs;
  bool deleted = false;
  IsolationScope scope;
};

struct HyperNode {
  std::string hyper_id;
  std::set<std::string> member_ids;
  std::set<std::string> chunk_refs;
  std::string embedding_ref;
  IsolationScope scope;
};

// Evidence bridges are the only edge kinds besides typed relations:
// HAS_EVIDENCE hyper->chunk, MENTIONS_ENTITY chunk->entity,
// EVIDENCED_BY entity->chunk.
enum class BridgeType { HasEvidence, MentionsEntity, EvidencedBy };

struct BridgeEdge {
  std::string edge_id;
  BridgeType type = BridgeType::HasEvidence;
  std::string from_id;
  std::string to_id;
  IsolationScope scope;
};

struct DocNode {
  std::string doc_id;
  std::string title;
  IsolationScope scope;
};

struct ChunkNode {
  std::string chunk_id;
  std::string doc_id;
  size_t index = 0;
  std::string embedding_ref;
  IsolationScope scope;
};

enum class SearchType { Entity, Relation, Fuzzy };

struct FindMatch {
  enum Kind { Entity, Relation } kind = Entity;
  std::string id;
  std::string label;  // entity name or relation type
  double confidence = 0.0;
};

enum class DeleteStatus { Deleted, AlreadyDeleted };

const char* to_string(BridgeType type);
BridgeType bridge_type_from_string(std::string_view name);

// In-process property graph with scope isolation, soft delete, exact/fuzzy
// lookup and undirected BFS over live relations. Single writer, snapshot
// reads; iteration order is deterministic (std::map keyed by id).
class GraphStore {
 public:
  // Upserts preserve ids: a second upsert with the same id replaces
  // attributes. Empty ids are assigned from a monotonic counter.
  std::string upsert_entity(Entity entity);
  std::string upsert_relation(Relation relation);
  std::string upsert_hypernode(HyperNode hyper);

  void ensure_doc_node(const std::string& doc_id, const std::string& title,
                       const IsolationScope& scope);
  void ensure_chunk_node(const std::string& chunk_id, const std::string& doc_id, size_t index,
                         const IsolationScope& scope);
  // Idempotent by (type, from, to, scope).
  std::string ensure_bridge(BridgeType type, const std::string& from_id, const std::string& to_id,
                            const IsolationScope& scope);

  std::vector<FindMatch> find(const std::string& query, SearchType type, size_t limit,
                              const IsolationScope& scope) const;

  // Entities within h undirected relation hops of any seed, excluding the
  // seeds and soft-deleted nodes. Unknown seed ids throw UnknownSeed.
  std::set<std::string> neighbors_bfs(const std::set<std::string>& seed_ids, size_t h,
                                      const IsolationScope& scope) const;
  // Same traversal with hop distances (seeds at 0), for retrieval ranking.
  std::map<std::string, size_t> bfs_with_depth(const std::set<std::string>& seed_ids, size_t h,
                                               const IsolationScope& scope) const;

  DeleteStatus soft_delete_relation(const std::string& relation_id, const std::string& reason);
  // Removes the entity; incident relations are soft-deleted with a cascade
  // reason, bridges touching it are removed, hypernode memberships drop it.
  void hard_delete_entity(const std::string& entity_id, const std::string& reason);

  // Direct id fetches include soft-deleted objects (audit path).
  const Entity* get_entity(const std::string& id) const;
  const Relation* get_relation(const std::string& id) const;
  const HyperNode* get_hypernode(const std::string& id) const;
  const ChunkNode* get_chunk_node(const std::string& id) const;
  const DocNode* get_doc_node(const std::string& id) const;

  Entity* mutable_entity(const std::string& id);
  Relation* mutable_relation(const std::string& id);

  // Write-back target may be an entity, hypernode or chunk node.
  void set_embedding_ref(const std::string& object_id, const std::string& vec_id);

  std::vector<const Entity*> entities(const IsolationScope& scope, bool include_deleted = false) const;
  std::vector<const Relation*> relations(const IsolationScope& scope,
                                         bool include_deleted = false) const;
  std::vector<const HyperNode*> hypernodes(const IsolationScope& scope) const;
  std::vector<const BridgeEdge*> bridges(const IsolationScope& scope) const;
  std::vector<const ChunkNode*> chunk_nodes(const IsolationScope& scope) const;
  std::vector<const Relation*> relations_incident(const std::string& entity_id) const;
  std::vector<const BridgeEdge*> bridges_from(const std::string& from_id,
                                              std::optional<BridgeType> type = {}) const;
  std::vector<const BridgeEdge*> bridges_to(const std::string& to_id,
                                            std::optional<BridgeType> type = {}) const;

  bool erase_entity(const std::string& id);      // compensation path, no cascade record
  bool erase_hypernode(const std::string& id);   // removes its bridges too
  bool erase_chunk_node(const std::string& id);  // removes its bridges too

  size_t object_count(const IsolationScope& scope) const;

  // JSONL snapshot, deterministic order (header, then docs, chunks,
  // entities, relations, hypernodes, bridges, each sorted by id).
  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  std::string next_id(const char* prefix, uint64_t& counter);
  void remove_bridges_touching(const std::string& object_id);

  uint64_t next_entity_ = 0;
  uint64_t next_relation_ = 0;
  uint64_t next_hyper_ = 0;
  uint64_t next_bridge_ = 0;

  std::map<std::string, Entity> entities_;
  std::map<std::string, Relation> relations_;
  std::map<std::string, HyperNode> hypernodes_;
  std::map<std::string, BridgeEdge> bridges_;
  std::map<std::string, DocNode> docs_;
  std::map<std::string, ChunkNode> chunks_;
  std::map<std::string, std::string> bridge_keys_;  // (type|from|to|scope) -> edge_id
};

}  // namespace kgfuse::graph

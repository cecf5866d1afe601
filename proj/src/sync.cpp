#include "kgfuse/sync.hpp"

#include "kgfuse/errors.hpp"

namespace kgfuse::sync {

using json = nlohmann::json;

std::string SyncCoordinator::entity_embed_text(const graph::Entity& entity) {
  if (entity.description.empty()) return entity.name;
  return entity.name + ". " + entity.description;
}

void SyncCoordinator::compensate(const std::string& kg_id, const std::string& kind,
                                 Freshness freshness, const std::string& phase,
                                 const std::string& message) {
  if (freshness == Freshness::Created) {
    if (kind == "entity") {
      graph_.erase_entity(kg_id);
    } else if (kind == "hypernode") {
      graph_.erase_hypernode(kg_id);
    } else if (kind == "chunk") {
      graph_.erase_chunk_node(kg_id);
    }
    ledger_.alert(kg_id, phase, "COMPENSATED_DELETE", message);
  } else {
    // never destroy previously committed knowledge: mark and alert
    if (kind == "entity") {
      if (graph::Entity* entity = graph_.mutable_entity(kg_id)) {
        entity->properties["sync_alert"] = true;
      }
    }
    ledger_.alert(kg_id, phase, "COMPENSATED_MARK", message);
  }
}

SyncOutcome SyncCoordinator::vector_phase(const std::string& kg_id, const std::string& kind,
                                          Freshness freshness, vec::Collection collection,
                                          std::vector<double> embedding,
                                          const IsolationScope& scope,
                                          vec::VectorPayload payload) {
  std::string vec_id;
  try {
    if (hooks_.before_vector_insert) hooks_.before_vector_insert(kg_id);
    vec_id = vectors_.insert(kg_id, collection, std::move(embedding), scope, std::move(payload));
  } catch (const std::exception& e) {
    compensate(kg_id, kind, freshness, "VECTOR_INSERT", e.what());
    return {SyncStatus::Failed, kg_id, "", std::string("vector insert failed: ") + e.what()};
  }

  try {
    if (hooks_.before_write_back) hooks_.before_write_back(kg_id);
    graph_.set_embedding_ref(kg_id, vec_id);
  } catch (const std::exception& e) {
    // primary write result is preserved; repair goes through consistency_check
    ledger_.alert(kg_id, "WRITE_BACK", "PRESERVED", e.what());
    return {SyncStatus::Failed, kg_id, vec_id,
            std::string("write-back failed, primary writes preserved: ") + e.what()};
  }
  return {SyncStatus::Success, kg_id, vec_id, ""};
}

SyncOutcome SyncCoordinator::sync_object(const graph::Entity& entity) {
  Freshness freshness = (!entity.entity_id.empty() && graph_.get_entity(entity.entity_id))
                            ? Freshness::PreExisting
                            : Freshness::Created;
  std::string kg_id = graph_.upsert_entity(entity);

  std::vector<double> embedding;
  try {
    embedding = embedder_.embed(entity_embed_text(entity));
    if (vec::is_degenerate(embedding)) {
      throw Error(ErrorCode::DegenerateVector, "embedding degenerate for '" + kg_id + "'");
    }
  } catch (const std::exception& e) {
    compensate(kg_id, "entity", freshness, "EMBED", e.what());
    return {SyncStatus::Failed, kg_id, "", std::string("embedding failed: ") + e.what()};
  }

  const graph::Entity* stored = graph_.get_entity(kg_id);
  vec::VectorPayload payload{stored->name, stored->entity_type, kg_id, false};
  IsolationScope scope = stored->scope;
  return vector_phase(kg_id, "entity", freshness, vec::Collection::Entity, std::move(embedding),
                      scope, std::move(payload));
}

SyncOutcome SyncCoordinator::sync_object(const graph::HyperNode& hyper) {
  Freshness freshness = (!hyper.hyper_id.empty() && graph_.get_hypernode(hyper.hyper_id))
                            ? Freshness::PreExisting
                            : Freshness::Created;
  std::string kg_id = graph_.upsert_hypernode(hyper);

  std::vector<double> embedding;
  try {
    embedding = hypernode_centroid(*graph_.get_hypernode(kg_id));
  } catch (const std::exception& e) {
    compensate(kg_id, "hypernode", freshness, "EMBED", e.what());
    return {SyncStatus::Failed, kg_id, "", std::string("centroid failed: ") + e.what()};
  }

  const graph::HyperNode* stored = graph_.get_hypernode(kg_id);
  vec::VectorPayload payload{"", "", kg_id, true};
  return vector_phase(kg_id, "hypernode", freshness, vec::Collection::Entity,
                      std::move(embedding), stored->scope, std::move(payload));
}

SyncOutcome SyncCoordinator::sync_chunk(const corpus::Chunk& chunk,
                                        const std::vector<std::string>& mentioned_entity_ids,
                                        const IsolationScope& scope,
                                        const std::string& doc_title) {
  graph_.ensure_doc_node(chunk.doc_id, doc_title, scope);

  bool chunk_existed = graph_.get_chunk_node(chunk.chunk_id) != nullptr;
  IsolationScope chunk_scope = scope;
  chunk_scope.document_id = chunk.doc_id;
  graph_.ensure_chunk_node(chunk.chunk_id, chunk.doc_id, chunk.index, chunk_scope);

  // HyperNode per evidence chunk, bridging its mentioned entities
  std::string hyper_id;
  bool hyper_existed = false;
  if (!mentioned_entity_ids.empty()) {
    hyper_id = chunk_hyper_id(chunk.chunk_id);
    hyper_existed = graph_.get_hypernode(hyper_id) != nullptr;
    graph::HyperNode hyper;
    if (hyper_existed) hyper = *graph_.get_hypernode(hyper_id);
    hyper.hyper_id = hyper_id;
    hyper.scope = scope;
    hyper.chunk_refs.insert(chunk.chunk_id);
    for (const auto& entity_id : mentioned_entity_ids) hyper.member_ids.insert(entity_id);
    graph_.upsert_hypernode(hyper);

    for (const auto& entity_id : mentioned_entity_ids) {
      graph_.ensure_bridge(graph::BridgeType::MentionsEntity, chunk.chunk_id, entity_id, scope);
      graph_.ensure_bridge(graph::BridgeType::EvidencedBy, entity_id, chunk.chunk_id, scope);
    }
  }

  // chunk vector (Algorithm-2 path over the chunk node)
  std::vector<double> embedding;
  try {
    embedding = embedder_.embed(chunk.text);
    if (vec::is_degenerate(embedding)) {
      throw Error(ErrorCode::DegenerateVector, "chunk embedding degenerate");
    }
  } catch (const std::exception& e) {
    if (!hyper_existed && !hyper_id.empty()) graph_.erase_hypernode(hyper_id);
    compensate(chunk.chunk_id, "chunk",
               chunk_existed ? Freshness::PreExisting : Freshness::Created, "EMBED", e.what());
    return {SyncStatus::Failed, chunk.chunk_id, "", std::string("embedding failed: ") + e.what()};
  }

  SyncOutcome outcome;
  {
    std::string vec_id;
    try {
      if (hooks_.before_vector_insert) hooks_.before_vector_insert(chunk.chunk_id);
      vec_id = vectors_.insert(chunk.chunk_id, vec::Collection::Chunk, std::move(embedding),
                               chunk_scope, {});
    } catch (const std::exception& e) {
      if (!hyper_existed && !hyper_id.empty()) graph_.erase_hypernode(hyper_id);
      compensate(chunk.chunk_id, "chunk",
                 chunk_existed ? Freshness::PreExisting : Freshness::Created, "VECTOR_INSERT",
                 e.what());
      return {SyncStatus::Failed, chunk.chunk_id, "",
              std::string("vector insert failed: ") + e.what()};
    }
    try {
      if (hooks_.before_write_back) hooks_.before_write_back(chunk.chunk_id);
      graph_.set_embedding_ref(chunk.chunk_id, vec_id);
    } catch (const std::exception& e) {
      ledger_.alert(chunk.chunk_id, "WRITE_BACK", "PRESERVED", e.what());
      return {SyncStatus::Failed, chunk.chunk_id, vec_id,
              std::string("write-back failed, primary writes preserved: ") + e.what()};
    }
    outcome = {SyncStatus::Success, chunk.chunk_id, vec_id, ""};
  }

  // hypernode centroid vector; failure here marks the hyper but does not
  // tear down the already-synced chunk
  if (!hyper_id.empty()) {
    try {
      std::vector<double> centroid = hypernode_centroid(*graph_.get_hypernode(hyper_id));
      std::string hyper_vec =
          vectors_.insert(hyper_id, vec::Collection::Entity, std::move(centroid), scope,
                          {"", "", hyper_id, true});
      graph_.set_embedding_ref(hyper_id, hyper_vec);
    } catch (const std::exception& e) {
      ledger_.alert(hyper_id, "HYPER_VECTOR",
                    hyper_existed ? "COMPENSATED_MARK" : "COMPENSATED_DELETE", e.what());
      if (!hyper_existed) graph_.erase_hypernode(hyper_id);
      outcome.alert = std::string("hypernode vector failed: ") + e.what();
    }
  }
  return outcome;
}

std::vector<double> SyncCoordinator::hypernode_centroid(const graph::HyperNode& hyper) const {
  if (hyper.member_ids.empty()) {
    throw Error(ErrorCode::EmptyMemberSet, "hypernode '" + hyper.hyper_id + "' has no members");
  }
  IsolationScope entity_scope = hyper.scope;
  entity_scope.document_id.clear();

  std::vector<double> centroid(vectors_.dimension(), 0.0);
  for (const auto& member_id : hyper.member_ids) {
    const graph::Entity* entity = graph_.get_entity(member_id);
    if (!entity) {
      throw Error(ErrorCode::MissingMemberVector, "member '" + member_id + "' missing from graph");
    }
    const vec::VectorRecord* record =
        vectors_.find_object(vec::Collection::Entity, member_id, entity->scope);
    if (!record) {
      throw Error(ErrorCode::MissingMemberVector, "member '" + member_id + "' has no vector");
    }
    double weight = entity->confidence;
    for (size_t i = 0; i < centroid.size(); ++i) centroid[i] += weight * record->embedding[i];
  }
  double divisor = static_cast<double>(hyper.member_ids.size());  // member count, not weight sum
  for (double& x : centroid) x /= divisor;
  return centroid;
}

ConsistencyReport SyncCoordinator::consistency_check(const IsolationScope& scope) const {
  ConsistencyReport report;

  auto check_ref = [&](const std::string& object_id, const std::string& ref) {
    if (!ref.empty() && vectors_.find(ref) == nullptr) {
      report.dangling_refs.push_back({object_id, ref});
    }
  };
  for (const graph::Entity* entity : graph_.entities(scope, /*include_deleted=*/true)) {
    check_ref(entity->entity_id, entity->embedding_ref);
  }
  for (const graph::HyperNode* hyper : graph_.hypernodes(scope)) {
    check_ref(hyper->hyper_id, hyper->embedding_ref);
  }
  for (const graph::ChunkNode* chunk : graph_.chunk_nodes(scope)) {
    check_ref(chunk->chunk_id, chunk->embedding_ref);
  }

  for (const auto& [vec_id, record] : vectors_.records()) {
    if (!scope.matches(record.scope)) continue;
    bool resolved = false;
    if (record.collection == vec::Collection::Chunk) {
      resolved = graph_.get_chunk_node(record.object_id) != nullptr;
    } else if (record.payload.hyper) {
      resolved = graph_.get_hypernode(record.object_id) != nullptr;
    } else {
      const graph::Entity* entity = graph_.get_entity(record.object_id);
      resolved = entity != nullptr && !entity->deleted;
    }
    if (!resolved) report.orphan_vectors.push_back({vec_id, record.object_id});
  }

  // alerted objects that still exist and still lack a reference
  std::set<std::string> seen;
  for (const auto& alert : ledger_.alerts()) {
    if (!seen.insert(alert.object_id).second) continue;
    std::string ref;
    bool exists = false;
    if (const graph::Entity* entity = graph_.get_entity(alert.object_id)) {
      exists = true;
      ref = entity->embedding_ref;
    } else if (const graph::HyperNode* hyper = graph_.get_hypernode(alert.object_id)) {
      exists = true;
      ref = hyper->embedding_ref;
    } else if (const graph::ChunkNode* chunk = graph_.get_chunk_node(alert.object_id)) {
      exists = true;
      ref = chunk->embedding_ref;
    }
    if (exists && ref.empty()) {
      report.alerts_pending.push_back({alert.object_id, alert.phase, alert.action});
    }
  }
  return report;
}

json ConsistencyReport::to_json() const {
  json dangling = json::array();
  for (const auto& d : dangling_refs) {
    dangling.push_back({{"object_id", d.object_id}, {"vec_id", d.vec_id}});
  }
  json orphans = json::array();
  for (const auto& o : orphan_vectors) {
    orphans.push_back({{"vec_id", o.vec_id}, {"object_id", o.object_id}});
  }
  json pending = json::array();
  for (const auto& p : alerts_pending) {
    pending.push_back({{"object_id", p.object_id}, {"phase", p.phase}, {"action", p.action}});
  }
  return json{{"format", "kgfuse.consistency"},
              {"version", 1},
              {"consistent", empty()},
              {"dangling_refs", dangling},
              {"orphan_vectors", orphans},
              {"alerts_pending", pending}};
}

}  // namespace kgfuse::sync

#include "kgfuse/graph_store.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "kgfuse/errors.hpp"
#include "kgfuse/json_io.hpp"

namespace kgfuse::graph {

using json = nlohmann::json;

const char* to_string(BridgeType type) {
  switch (type) {
    case BridgeType::HasEvidence: return "HAS_EVIDENCE";
    case BridgeType::MentionsEntity: return "MENTIONS_ENTITY";
    case BridgeType::EvidencedBy: return "EVIDENCED_BY";
  }
  return "HAS_EVIDENCE";
}

BridgeType bridge_type_from_string(std::string_view name) {
  if (name == "HAS_EVIDENCE") return BridgeType::HasEvidence;
  if (name == "MENTIONS_ENTITY") return BridgeType::MentionsEntity;
  if (name == "EVIDENCED_BY") return BridgeType::EvidencedBy;
  throw Error(ErrorCode::InvalidConfig, "unknown bridge type '" + std::string(name) + "'");
}

namespace {

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

bool name_matches_exact(const Entity& entity, const std::string& normalized_query) {
  if (normalize(entity.name) == normalized_query) return true;
  for (const auto& alias : entity.aliases) {
    if (normalize(alias) == normalized_query) return true;
  }
  return false;
}

bool contains_either(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return false;
  return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

bool name_matches_fuzzy(const Entity& entity, const std::string& normalized_query) {
  if (contains_either(normalize(entity.name), normalized_query)) return true;
  for (const auto& alias : entity.aliases) {
    if (contains_either(normalize(alias), normalized_query)) return true;
  }
  return false;
}

void validate_confidence(double confidence, const std::string& what) {
  if (confidence < 0.0 || confidence > 1.0) {
    throw Error(ErrorCode::InvalidConfig, what + " confidence must be in [0,1]");
  }
}

}  // namespace

std::string GraphStore::next_id(const char* prefix, uint64_t& counter) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%s%04llu", prefix, static_cast<unsigned long long>(counter++));
  return buf;
}

std::string GraphStore::upsert_entity(Entity entity) {
  if (entity.name.empty()) throw Error(ErrorCode::InvalidConfig, "entity name must be non-empty");
  validate_confidence(entity.confidence, "entity");
  if (entity.scope.run_id.empty()) {
    throw Error(ErrorCode::ScopeMismatch, "entity scope requires a run_id");
  }
  if (entity.entity_id.empty()) entity.entity_id = next_id("e", next_entity_);
  auto it = entities_.find(entity.entity_id);
  if (it != entities_.end()) {
    if (!(it->second.scope == entity.scope)) {
      throw Error(ErrorCode::ScopeMismatch, "entity " + entity.entity_id + " belongs to another scope");
    }
  }
  std::string id = entity.entity_id;
  entities_[id] = std::move(entity);
  return id;
}

std::string GraphStore::upsert_relation(Relation relation) {
  validate_confidence(relation.confidence, "relation");
  auto head = entities_.find(relation.head_id);
  auto tail = entities_.find(relation.tail_id);
  if (relation.head_id.empty() || head == entities_.end()) {
    throw Error(ErrorCode::DanglingEndpoint, "head '" + relation.head_id + "' does not resolve");
  }
  if (relation.tail_id.empty() || tail == entities_.end()) {
    throw Error(ErrorCode::DanglingEndpoint, "tail '" + relation.tail_id + "' does not resolve");
  }
  if (!relation.scope.matches(head->second.scope) || !relation.scope.matches(tail->second.scope)) {
    throw Error(ErrorCode::ScopeMismatch, "relation endpoints live in another scope");
  }
  if (relation.relation_id.empty()) relation.relation_id = next_id("r", next_relation_);
  std::string id = relation.relation_id;
  relations_[id] = std::move(relation);
  return id;
}

std::string GraphStore::upsert_hypernode(HyperNode hyper) {
  for (const auto& member : hyper.member_ids) {
    if (!entities_.count(member)) {
      throw Error(ErrorCode::DanglingEndpoint, "hypernode member '" + member + "' does not resolve");
    }
  }
  if (hyper.hyper_id.empty()) hyper.hyper_id = next_id("h", next_hyper_);
  std::string id = hyper.hyper_id;
  IsolationScope scope = hyper.scope;
  std::set<std::string> chunk_refs = hyper.chunk_refs;
  hypernodes_[id] = std::move(hyper);
  for (const auto& chunk_id : chunk_refs) {
    if (!chunks_.count(chunk_id)) {
      std::string doc_id = chunk_id.substr(0, chunk_id.find('#'));
      ensure_chunk_node(chunk_id, doc_id, 0, scope);
    }
    ensure_bridge(BridgeType::HasEvidence, id, chunk_id, scope);
  }
  return id;
}

void GraphStore::ensure_doc_node(const std::string& doc_id, const std::string& title,
                                 const IsolationScope& scope) {
  auto it = docs_.find(doc_id);
  if (it == docs_.end()) {
    docs_[doc_id] = DocNode{doc_id, title, scope};
  }
}

void GraphStore::ensure_chunk_node(const std::string& chunk_id, const std::string& doc_id,
                                   size_t index, const IsolationScope& scope) {
  auto it = chunks_.find(chunk_id);
  if (it == chunks_.end()) {
    chunks_[chunk_id] = ChunkNode{chunk_id, doc_id, index, "", scope};
  }
}

std::string GraphStore::ensure_bridge(BridgeType type, const std::string& from_id,
                                      const std::string& to_id, const IsolationScope& scope) {
  std::string key = std::string(to_string(type)) + "\x1f" + from_id + "\x1f" + to_id + "\x1f" +
                    scope.key();
  auto it = bridge_keys_.find(key);
  if (it != bridge_keys_.end()) return it->second;
  std::string id = next_id("b", next_bridge_);
  bridges_[id] = BridgeEdge{id, type, from_id, to_id, scope};
  bridge_keys_[key] = id;
  return id;
}

std::vector<FindMatch> GraphStore::find(const std::string& query, SearchType type, size_t limit,
                                        const IsolationScope& scope) const {
  if (limit == 0) throw Error(ErrorCode::InvalidConfig, "find limit must be positive");
  std::string normalized = normalize(query);
  std::vector<FindMatch> matches;

  if (type == SearchType::Entity || type == SearchType::Fuzzy) {
    for (const auto& [id, entity] : entities_) {
      if (entity.deleted || !scope.matches(entity.scope)) continue;
      bool hit = type == SearchType::Entity ? name_matches_exact(entity, normalized)
                                            : name_matches_fuzzy(entity, normalized);
      if (hit) matches.push_back({FindMatch::Entity, id, entity.name, entity.confidence});
    }
  } else {
    for (const auto& [id, relation] : relations_) {
      if (relation.deleted || !scope.matches(relation.scope)) continue;
      if (normalize(relation.relation_type) == normalized) {
        matches.push_back({FindMatch::Relation, id, relation.relation_type, relation.confidence});
      }
    }
  }

  std::sort(matches.begin(), matches.end(), [](const FindMatch& a, const FindMatch& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });
  if (matches.size() > limit) matches.resize(limit);
  return matches;
}

std::map<std::string, size_t> GraphStore::bfs_with_depth(const std::set<std::string>& seed_ids,
                                                         size_t h,
                                                         const IsolationScope& scope) const {
  if (h < 1) throw Error(ErrorCode::InvalidConfig, "hop count must be >= 1");
  for (const auto& seed : seed_ids) {
    auto it = entities_.find(seed);
    if (it == entities_.end() || !scope.matches(it->second.scope)) {
      throw Error(ErrorCode::UnknownSeed, "seed '" + seed + "' does not resolve in scope");
    }
  }

  // adjacency over live relations, direction ignored
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const auto& [id, relation] : relations_) {
    if (relation.deleted || !scope.matches(relation.scope)) continue;
    const Entity* head = get_entity(relation.head_id);
    const Entity* tail = get_entity(relation.tail_id);
    if (!head || head->deleted || !tail || tail->deleted) continue;
    adjacency[relation.head_id].push_back(relation.tail_id);
    adjacency[relation.tail_id].push_back(relation.head_id);
  }

  std::map<std::string, size_t> depth;
  std::deque<std::string> frontier;
  for (const auto& seed : seed_ids) {
    const Entity* entity = get_entity(seed);
    if (entity->deleted) continue;  // soft-deleted seeds conduct nothing
    depth[seed] = 0;
    frontier.push_back(seed);
  }
  while (!frontier.empty()) {
    std::string current = frontier.front();
    frontier.pop_front();
    size_t d = depth[current];
    if (d >= h) continue;
    auto it = adjacency.find(current);
    if (it == adjacency.end()) continue;
    for (const auto& next : it->second) {
      if (depth.count(next)) continue;
      depth[next] = d + 1;
      frontier.push_back(next);
    }
  }
  return depth;
}

std::set<std::string> GraphStore::neighbors_bfs(const std::set<std::string>& seed_ids, size_t h,
                                                const IsolationScope& scope) const {
  auto depth = bfs_with_depth(seed_ids, h, scope);
  std::set<std::string> result;
  for (const auto& [id, d] : depth) {
    if (d == 0) continue;  // exclude seeds
    result.insert(id);
  }
  return result;
}

DeleteStatus GraphStore::soft_delete_relation(const std::string& relation_id,
                                              const std::string& reason) {
  auto it = relations_.find(relation_id);
  if (it == relations_.end()) throw Error(ErrorCode::NotFound, "relation '" + relation_id + "'");
  if (it->second.deleted) return DeleteStatus::AlreadyDeleted;
  it->second.deleted = true;
  it->second.properties["deleted_reason"] = reason;
  return DeleteStatus::Deleted;
}

void GraphStore::hard_delete_entity(const std::string& entity_id, const std::string& reason) {
  auto it = entities_.find(entity_id);
  if (it == entities_.end()) throw Error(ErrorCode::NotFound, "entity '" + entity_id + "'");
  for (auto& [id, relation] : relations_) {
    if (relation.deleted) continue;
    if (relation.head_id == entity_id || relation.tail_id == entity_id) {
      relation.deleted = true;
      relation.properties["deleted_reason"] = "cascade: " + reason;
    }
  }
  for (auto& [id, hyper] : hypernodes_) {
    hyper.member_ids.erase(entity_id);
  }
  remove_bridges_touching(entity_id);
  entities_.erase(it);
}

const Entity* GraphStore::get_entity(const std::string& id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

const Relation* GraphStore::get_relation(const std::string& id) const {
  auto it = relations_.find(id);
  return it == relations_.end() ? nullptr : &it->second;
}

const HyperNode* GraphStore::get_hypernode(const std::string& id) const {
  auto it = hypernodes_.find(id);
  return it == hypernodes_.end() ? nullptr : &it->second;
}

const ChunkNode* GraphStore::get_chunk_node(const std::string& id) const {
  auto it = chunks_.find(id);
  return it == chunks_.end() ? nullptr : &it->second;
}

const DocNode* GraphStore::get_doc_node(const std::string& id) const {
  auto it = docs_.find(id);
  return it == docs_.end() ? nullptr : &it->second;
}

Entity* GraphStore::mutable_entity(const std::string& id) {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

Relation* GraphStore::mutable_relation(const std::string& id) {
  auto it = relations_.find(id);
  return it == relations_.end() ? nullptr : &it->second;
}

void GraphStore::set_embedding_ref(const std::string& object_id, const std::string& vec_id) {
  if (auto it = entities_.find(object_id); it != entities_.end()) {
    it->second.embedding_ref = vec_id;
    return;
  }
  if (auto it = hypernodes_.find(object_id); it != hypernodes_.end()) {
    it->second.embedding_ref = vec_id;
    return;
  }
  if (auto it = chunks_.find(object_id); it != chunks_.end()) {
    it->second.embedding_ref = vec_id;
    return;
  }
  throw Error(ErrorCode::NotFound, "no graph object '" + object_id + "' for write-back");
}

std::vector<const Entity*> GraphStore::entities(const IsolationScope& scope,
                                                bool include_deleted) const {
  std::vector<const Entity*> out;
  for (const auto& [id, entity] : entities_) {
    if (!scope.matches(entity.scope)) continue;
    if (!include_deleted && entity.deleted) continue;
    out.push_back(&entity);
  }
  return out;
}

std::vector<const Relation*> GraphStore::relations(const IsolationScope& scope,
                                                   bool include_deleted) const {
  std::vector<const Relation*> out;
  for (const auto& [id, relation] : relations_) {
    if (!scope.matches(relation.scope)) continue;
    if (!include_deleted && relation.deleted) continue;
    out.push_back(&relation);
  }
  return out;
}

std::vector<const HyperNode*> GraphStore::hypernodes(const IsolationScope& scope) const {
  std::vector<const HyperNode*> out;
  for (const auto& [id, hyper] : hypernodes_) {
    if (scope.matches(hyper.scope)) out.push_back(&hyper);
  }
  return out;
}

std::vector<const BridgeEdge*> GraphStore::bridges(const IsolationScope& scope) const {
  std::vector<const BridgeEdge*> out;
  for (const auto& [id, bridge] : bridges_) {
    if (scope.matches(bridge.scope)) out.push_back(&bridge);
  }
  return out;
}

std::vector<const ChunkNode*> GraphStore::chunk_nodes(const IsolationScope& scope) const {
  std::vector<const ChunkNode*> out;
  for (const auto& [id, chunk] : chunks_) {
    if (scope.matches(chunk.scope)) out.push_back(&chunk);
  }
  return out;
}

std::vector<const Relation*> GraphStore::relations_incident(const std::string& entity_id) const {
  std::vector<const Relation*> out;
  for (const auto& [id, relation] : relations_) {
    if (relation.head_id == entity_id || relation.tail_id == entity_id) out.push_back(&relation);
  }
  return out;
}

std::vector<const BridgeEdge*> GraphStore::bridges_from(const std::string& from_id,
                                                        std::optional<BridgeType> type) const {
  std::vector<const BridgeEdge*> out;
  for (const auto& [id, bridge] : bridges_) {
    if (bridge.from_id != from_id) continue;
    if (type && bridge.type != *type) continue;
    out.push_back(&bridge);
  }
  return out;
}

std::vector<const BridgeEdge*> GraphStore::bridges_to(const std::string& to_id,
                                                      std::optional<BridgeType> type) const {
  std::vector<const BridgeEdge*> out;
  for (const auto& [id, bridge] : bridges_) {
    if (bridge.to_id != to_id) continue;
    if (type && bridge.type != *type) continue;
    out.push_back(&bridge);
  }
  return out;
}

void GraphStore::remove_bridges_touching(const std::string& object_id) {
  for (auto it = bridges_.begin(); it != bridges_.end();) {
    if (it->second.from_id == object_id || it->second.to_id == object_id) {
      std::string key = std::string(to_string(it->second.type)) + "\x1f" + it->second.from_id +
                        "\x1f" + it->second.to_id + "\x1f" + it->second.scope.key();
      bridge_keys_.erase(key);
      it = bridges_.erase(it);
    } else {
      ++it;
    }
  }
}

bool GraphStore::erase_entity(const std::string& id) {
  auto it = entities_.find(id);
  if (it == entities_.end()) return false;
  remove_bridges_touching(id);
  for (auto& [hid, hyper] : hypernodes_) hyper.member_ids.erase(id);
  entities_.erase(it);
  return true;
}

bool GraphStore::erase_hypernode(const std::string& id) {
  auto it = hypernodes_.find(id);
  if (it == hypernodes_.end()) return false;
  remove_bridges_touching(id);
  hypernodes_.erase(it);
  return true;
}

bool GraphStore::erase_chunk_node(const std::string& id) {
  auto it = chunks_.find(id);
  if (it == chunks_.end()) return false;
  remove_bridges_touching(id);
  chunks_.erase(it);
  return true;
}

size_t GraphStore::object_count(const IsolationScope& scope) const {
  size_t n = 0;
  for (const auto& [id, e] : entities_) n += scope.matches(e.scope);
  for (const auto& [id, r] : relations_) n += scope.matches(r.scope);
  for (const auto& [id, h] : hypernodes_) n += scope.matches(h.scope);
  for (const auto& [id, c] : chunks_) n += scope.matches(c.scope);
  for (const auto& [id, d] : docs_) n += scope.matches(d.scope);
  return n;
}

// ---------------------------------------------------------------------------
// Snapshot
// ---------------------------------------------------------------------------

namespace {

json entity_to_json(const Entity& e) {
  return json{{"kind", "entity"},
              {"entity_id", e.entity_id},
              {"name", e.name},
              {"entity_type", e.entity_type},
              {"description", e.description},
              {"aliases", e.aliases},
              {"properties", e.properties},
              {"confidence", e.confidence},
              {"embedding_ref", e.embedding_ref},
              {"evidence_refs", e.evidence_refs},
              {"deleted", e.deleted},
              {"scope", scope_to_json(e.scope)}};
}

json relation_to_json(const Relation& r) {
  return json{{"kind", "relation"},
              {"relation_id", r.relation_id},
              {"head_id", r.head_id},
              {"tail_id", r.tail_id},
              {"relation_type", r.relation_type},
              {"properties", r.properties},
              {"confidence", r.confidence},
              {"evidence_refs", r.evidence_refs},
              {"deleted", r.deleted},
              {"scope", scope_to_json(r.scope)}};
}

}  // namespace

void GraphStore::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  json header{{"format", "kgfuse.graph"},
              {"version", 1},
              {"counters",
               {{"entity", next_entity_},
                {"relation", next_relation_},
                {"hyper", next_hyper_},
                {"bridge", next_bridge_}}}};
  out << header.dump() << "\n";
  for (const auto& [id, doc] : docs_) {
    out << json{{"kind", "doc"}, {"doc_id", doc.doc_id}, {"title", doc.title},
                {"scope", scope_to_json(doc.scope)}}
               .dump()
        << "\n";
  }
  for (const auto& [id, chunk] : chunks_) {
    out << json{{"kind", "chunk"},
                {"chunk_id", chunk.chunk_id},
                {"doc_id", chunk.doc_id},
                {"index", chunk.index},
                {"embedding_ref", chunk.embedding_ref},
                {"scope", scope_to_json(chunk.scope)}}
               .dump()
        << "\n";
  }
  for (const auto& [id, entity] : entities_) out << entity_to_json(entity).dump() << "\n";
  for (const auto& [id, relation] : relations_) out << relation_to_json(relation).dump() << "\n";
  for (const auto& [id, hyper] : hypernodes_) {
    out << json{{"kind", "hyper"},
                {"hyper_id", hyper.hyper_id},
                {"member_ids", hyper.member_ids},
                {"chunk_refs", hyper.chunk_refs},
                {"embedding_ref", hyper.embedding_ref},
                {"scope", scope_to_json(hyper.scope)}}
               .dump()
        << "\n";
  }
  for (const auto& [id, bridge] : bridges_) {
    out << json{{"kind", "bridge"},
                {"edge_id", bridge.edge_id},
                {"type", to_string(bridge.type)},
                {"from_id", bridge.from_id},
                {"to_id", bridge.to_id},
                {"scope", scope_to_json(bridge.scope)}}
               .dump()
        << "\n";
  }
}

void GraphStore::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  entities_.clear();
  relations_.clear();
  hypernodes_.clear();
  bridges_.clear();
  docs_.clear();
  chunks_.clear();
  bridge_keys_.clear();

  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (!saw_header) {
      if (j.value("format", "") != "kgfuse.graph") {
        throw Error(ErrorCode::UnreadableFile, "bad graph snapshot header in " + file.string());
      }
      next_entity_ = j["counters"].value("entity", 0);
      next_relation_ = j["counters"].value("relation", 0);
      next_hyper_ = j["counters"].value("hyper", 0);
      next_bridge_ = j["counters"].value("bridge", 0);
      saw_header = true;
      continue;
    }
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "doc") {
      DocNode doc{j.at("doc_id"), j.at("title"), scope_from_json(j.at("scope"))};
      docs_[doc.doc_id] = std::move(doc);
    } else if (kind == "chunk") {
      ChunkNode chunk{j.at("chunk_id"), j.at("doc_id"), j.at("index"),
                      j.value("embedding_ref", ""), scope_from_json(j.at("scope"))};
      chunks_[chunk.chunk_id] = std::move(chunk);
    } else if (kind == "entity") {
      Entity e;
      e.entity_id = j.at("entity_id");
      e.name = j.at("name");
      e.entity_type = j.at("entity_type");
      e.description = j.at("description");
      e.aliases = j.at("aliases").get<std::set<std::string>>();
      e.properties = j.at("properties");
      e.confidence = j.at("confidence");
      e.embedding_ref = j.at("embedding_ref");
      e.evidence_refs = j.at("evidence_refs").get<std::vector<std::string>>();
      e.deleted = j.at("deleted");
      e.scope = scope_from_json(j.at("scope"));
      entities_[e.entity_id] = std::move(e);
    } else if (kind == "relation") {
      Relation r;
      r.relation_id = j.at("relation_id");
      r.head_id = j.at("head_id");
      r.tail_id = j.at("tail_id");
      r.relation_type = j.at("relation_type");
      r.properties = j.at("properties");
      r.confidence = j.at("confidence");
      r.evidence_refs = j.at("evidence_refs").get<std::vector<std::string>>();
      r.deleted = j.at("deleted");
      r.scope = scope_from_json(j.at("scope"));
      relations_[r.relation_id] = std::move(r);
    } else if (kind == "hyper") {
      HyperNode h;
      h.hyper_id = j.at("hyper_id");
      h.member_ids = j.at("member_ids").get<std::set<std::string>>();
      h.chunk_refs = j.at("chunk_refs").get<std::set<std::string>>();
      h.embedding_ref = j.at("embedding_ref");
      h.scope = scope_from_json(j.at("scope"));
      hypernodes_[h.hyper_id] = std::move(h);
    } else if (kind == "bridge") {
      BridgeEdge b{j.at("edge_id"), bridge_type_from_string(j.at("type").get<std::string>()),
                   j.at("from_id"), j.at("to_id"), scope_from_json(j.at("scope"))};
      std::string key = std::string(to_string(b.type)) + "\x1f" + b.from_id + "\x1f" + b.to_id +
                        "\x1f" + b.scope.key();
      bridge_keys_[key] = b.edge_id;
      bridges_[b.edge_id] = std::move(b);
    }
  }
}

}  // namespace kgfuse::graph

#include "kgfuse/toolkit.hpp"

#include <algorithm>

#include "kgfuse/errors.hpp"
#include "kgfuse/utf8.hpp"

namespace kgfuse::toolkit {

using json = nlohmann::json;

json to_json(const TodoItem& item) {
  return json{{"task", item.task},
              {"todo_type", item.todo_type},
              {"related_entity", item.related_entity},
              {"priority", item.priority}};
}

json to_json(const ReviewItem& item) {
  return json{{"subject", item.subject}, {"reason", item.reason}, {"priority", item.priority}};
}

TodoItem todo_from_json(const json& j) {
  return {j.value("task", ""), j.value("todo_type", "follow_up"), j.value("related_entity", ""),
          j.value("priority", 0)};
}

ReviewItem review_from_json(const json& j) {
  return {j.value("subject", ""), j.value("reason", ""), j.value("priority", 0)};
}

// ---------------------------------------------------------------------------
// Tool contracts
// ---------------------------------------------------------------------------

namespace {

json prop(const char* type) { return json{{"type", type}}; }

json enum_prop(std::initializer_list<const char*> values) {
  json j{{"type", "string"}};
  j["enum"] = json::array();
  for (const char* v : values) j["enum"].push_back(v);
  return j;
}

json make_schema(std::initializer_list<std::pair<const char*, json>> properties,
                 std::initializer_list<const char*> required) {
  json schema{{"type", "object"}, {"additionalProperties", false}};
  json props = json::object();
  for (const auto& [name, p] : properties) props[name] = p;
  schema["properties"] = props;
  json req = json::array();
  for (const char* r : required) req.push_back(r);
  schema["required"] = req;
  return schema;
}

const std::map<std::string, json>& schemas() {
  static const std::map<std::string, json> table = [] {
    std::map<std::string, json> s;
    s["read_paragraph"] = make_schema({{"paragraph_idx", prop("integer")},
                                       {"doc_id", prop("string")},
                                       {"purpose", prop("string")}},
                                      {"paragraph_idx", "doc_id"});
    s["browse_context"] =
        make_schema({{"query", prop("string")},
                     {"mode", enum_prop({"local", "kg_neighbors", "document_overview"})},
                     {"radius", prop("integer")},
                     {"chunk_id", prop("string")}},
                    {"mode"});
    s["search_kg"] = make_schema({{"query", prop("string")},
                                  {"search_type", enum_prop({"entity", "relation", "fuzzy"})},
                                  {"limit", prop("integer")}},
                                 {"query", "search_type"});
    s["explore_fusion"] =
        make_schema({{"query", prop("string")},
                     {"mode", enum_prop({"parallel", "vector_first", "graph_first"})},
                     {"top_k", prop("integer")}},
                    {"query"});
    s["create_entity"] = make_schema({{"name", prop("string")},
                                      {"entity_type", prop("string")},
                                      {"description", prop("string")},
                                      {"aliases", prop("array")},
                                      {"properties", prop("object")},
                                      {"source_chunk", prop("string")},
                                      {"evidence", prop("string")},
                                      {"certainty", prop("number")}},
                                     {"name", "entity_type", "source_chunk", "evidence"});
    s["create_relation"] = make_schema({{"head", prop("string")},
                                        {"relation_type", prop("string")},
                                        {"tail", prop("string")},
                                        {"evidence", prop("string")},
                                        {"source_chunk", prop("string")},
                                        {"certainty", prop("number")},
                                        {"properties", prop("object")}},
                                       {"head", "relation_type", "tail", "evidence",
                                        "source_chunk"});
    s["batch_kg_ops"] = make_schema({{"searches", prop("array")},
                                     {"creates", prop("array")},
                                     {"updates", prop("array")},
                                     {"merges", prop("array")},
                                     {"deletes", prop("array")}},
                                    {});
    s["update_entity"] = make_schema({{"entity_name", prop("string")},
                                      {"updates", prop("object")},
                                      {"reason", prop("string")},
                                      {"source_chunk", prop("string")},
                                      {"evidence", prop("string")}},
                                     {"entity_name", "updates"});
    s["update_relation"] = make_schema({{"relation_id", prop("string")},
                                        {"evidence", prop("string")},
                                        {"confidence", prop("number")},
                                        {"source_chunk", prop("string")}},
                                       {"relation_id"});
    s["merge_entity"] = make_schema({{"target_name", prop("string")},
                                     {"source_name", prop("string")},
                                     {"source_chunk", prop("string")},
                                     {"evidence", prop("string")}},
                                    {"target_name", "source_name"});
    s["merge_relation"] = make_schema({{"target_id", prop("string")}, {"source_id", prop("string")}},
                                      {"target_id", "source_id"});
    s["delete_entity"] =
        make_schema({{"entity_name", prop("string")}, {"reason", prop("string")}},
                    {"entity_name", "reason"});
    s["delete_relation"] = make_schema({{"relation_id", prop("string")},
                                        {"reason", prop("string")},
                                        {"soft", prop("boolean")}},
                                       {"relation_id", "reason"});
    s["mark_for_review"] = make_schema({{"subject", prop("string")},
                                        {"reason", prop("string")},
                                        {"priority", prop("integer")}},
                                       {"subject", "reason"});
    s["create_todo"] = make_schema(
        {{"task", prop("string")},
         {"todo_type", enum_prop({"disambiguate", "verify", "attribute_completion", "follow_up"})},
         {"related_entity", prop("string")},
         {"priority", prop("integer")}},
        {"task", "todo_type"});
    s["get_progress"] = make_schema({}, {});
    return s;
  }();
  return table;
}

bool type_matches(const json& value, const std::string& type) {
  if (type == "string") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return value.is_number_integer();
  if (type == "boolean") return value.is_boolean();
  if (type == "array") return value.is_array();
  if (type == "object") return value.is_object();
  return false;
}

std::string truncate_snippet(const std::string& text, size_t max_cp = 200) {
  auto offsets = utf8::code_point_offsets(text);
  if (offsets.size() - 1 <= max_cp) return text;
  return text.substr(0, offsets[max_cp]) + "…";
}

}  // namespace

void validate_args(const json& schema, const json& args, const std::string& tool_name) {
  if (!args.is_object()) {
    throw Error(ErrorCode::SchemaViolation, tool_name + ": args must be an object");
  }
  const json& properties = schema.at("properties");
  for (const auto& required : schema.at("required")) {
    const std::string key = required.get<std::string>();
    if (!args.contains(key)) {
      throw Error(ErrorCode::SchemaViolation, tool_name + ": missing required arg '" + key + "'");
    }
    if (args.at(key).is_string() && args.at(key).get<std::string>().empty()) {
      throw Error(ErrorCode::SchemaViolation, tool_name + ": required arg '" + key + "' is empty");
    }
  }
  for (const auto& [key, value] : args.items()) {
    auto it = properties.find(key);
    if (it == properties.end()) {
      throw Error(ErrorCode::SchemaViolation, tool_name + ": unknown arg '" + key + "'");
    }
    const std::string type = it->at("type").get<std::string>();
    if (!type_matches(value, type)) {
      throw Error(ErrorCode::SchemaViolation,
                  tool_name + ": arg '" + key + "' must be of type " + type);
    }
    if (it->contains("enum")) {
      bool ok = false;
      for (const auto& candidate : it->at("enum")) ok = ok || candidate == value;
      if (!ok) {
        throw Error(ErrorCode::SchemaViolation,
                    tool_name + ": arg '" + key + "' not in enum: " + value.dump());
      }
    }
  }
}

const std::vector<std::string>& Toolkit::tool_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, schema] : schemas()) out.push_back(name);
    return out;
  }();
  return names;
}

json Toolkit::tool_schemas() {
  json out = json::object();
  for (const auto& [name, schema] : schemas()) out[name] = schema;
  return out;
}

json Toolkit::schema_for(const std::string& tool_name) {
  auto it = schemas().find(tool_name);
  if (it == schemas().end()) {
    throw Error(ErrorCode::UnknownTool, "'" + tool_name + "' is not a registered tool");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

json Toolkit::dispatch(const ToolCall& call, ToolState& state) {
  state.counters.tool_calls += 1;
  json envelope{{"tool", call.tool_name}, {"call_id", call.call_id}};
  try {
    auto it = schemas().find(call.tool_name);
    if (it == schemas().end()) {
      throw Error(ErrorCode::UnknownTool, "'" + call.tool_name + "' is not a registered tool");
    }
    validate_args(it->second, call.args, call.tool_name);

    json result;
    if (call.tool_name == "read_paragraph") result = read_paragraph(call.args, state);
    else if (call.tool_name == "browse_context") result = browse_context(call.args, state);
    else if (call.tool_name == "search_kg") result = search_kg(call.args, state);
    else if (call.tool_name == "explore_fusion") result = explore_fusion(call.args, state);
    else if (call.tool_name == "create_entity") result = create_entity(call.args, state);
    else if (call.tool_name == "create_relation") result = create_relation(call.args, state);
    else if (call.tool_name == "batch_kg_ops") result = batch_kg_operations(call.args, state);
    else if (call.tool_name == "update_entity") result = update_entity(call.args, state);
    else if (call.tool_name == "update_relation") result = update_relation(call.args, state);
    else if (call.tool_name == "merge_entity") result = merge_entity(call.args, state);
    else if (call.tool_name == "merge_relation") result = merge_relation(call.args, state);
    else if (call.tool_name == "delete_entity") result = delete_entity(call.args, state);
    else if (call.tool_name == "delete_relation") result = delete_relation(call.args, state);
    else if (call.tool_name == "mark_for_review") result = mark_for_review(call.args, state);
    else if (call.tool_name == "create_todo") result = create_todo(call.args, state);
    else result = get_progress(call.args, state);

    envelope["ok"] = true;
    envelope["result"] = std::move(result);
  } catch (const TransientError&) {
    throw;  // the retry layer owns transient failures
  } catch (const Error& e) {
    envelope["ok"] = false;
    envelope["error"] = json{{"code", to_string(e.code())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    envelope["ok"] = false;
    envelope["error"] = json{{"code", "Internal"}, {"message", e.what()}};
  }
  return envelope;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

const corpus::Chunk* Toolkit::find_chunk(const std::string& chunk_id,
                                         const IsolationScope& scope) const {
  return docs_.find_chunk(chunk_id, scope);
}

void Toolkit::require_evidence(const std::string& source_chunk, const std::string& evidence,
                               const IsolationScope& scope) const {
  const corpus::Chunk* chunk = find_chunk(source_chunk, scope);
  if (!chunk) {
    throw Error(ErrorCode::NotFound, "source chunk '" + source_chunk + "' does not exist");
  }
  if (!evidence.empty() && chunk->text.find(evidence) == std::string::npos) {
    throw Error(ErrorCode::EvidenceNotAnchored,
                "evidence is not a verbatim substring of chunk '" + source_chunk + "'");
  }
}

std::string Toolkit::resolve_entity(const std::string& name, const IsolationScope& scope,
                                    const char* role) const {
  auto matches = graph_.find(name, graph::SearchType::Entity, 5, scope);
  if (matches.empty()) {
    throw Error(ErrorCode::NotFound, std::string(role) + " entity '" + name + "' not found");
  }
  if (matches.size() > 1) {
    throw Error(ErrorCode::AmbiguousEndpoint,
                std::string(role) + " '" + name + "' matches multiple entities; mark for review");
  }
  return matches[0].id;
}

std::string Toolkit::resolve_relation_type(const std::string& raw, std::string* schema_state) {
  std::string name = schema::SchemaOrchestrator::is_upper_snake(raw)
                         ? raw
                         : schema::SchemaOrchestrator::normalize_relation_name(raw);
  if (name.empty()) {
    throw Error(ErrorCode::SchemaViolation, "relation type '" + raw + "' cannot be normalized");
  }
  if (profile_) {
    const schema::RelationType* known = profile_->find_relation(name);
    if (!known && orchestrator_) {
      auto evolved = orchestrator_->evolve(*profile_, {name, "", "", 1.0});
      name = evolved.relation_name;
      known = profile_->find_relation(name);
    }
    if (known && known->state == schema::RelationState::Proposed && schema_state) {
      *schema_state = "PROPOSED";
    }
  }
  return name;
}

std::string Toolkit::record_provenance(const std::string& object_id, const std::string& kind,
                                       const std::string& chunk_id, const std::string& evidence,
                                       ProvOperation op, double confidence,
                                       const std::string& detail) {
  ProvenanceRecord record;
  record.object_id = object_id;
  record.object_kind = kind;
  record.source_chunk_id = chunk_id;
  if (!chunk_id.empty()) record.doc_id = chunk_id.substr(0, chunk_id.find('#'));
  record.evidence_snippet = evidence;
  record.operation = op;
  record.confidence = confidence;
  record.detail = detail;
  return ledger_.append(std::move(record));
}

// ---------------------------------------------------------------------------
// Read tools
// ---------------------------------------------------------------------------

json Toolkit::read_paragraph(const json& args, ToolState& state) {
  std::string doc_id = args.at("doc_id").get<std::string>();
  size_t index = args.at("paragraph_idx").get<size_t>();
  auto chunks = docs_.chunks_of(doc_id, state.scope);
  if (index >= chunks.size()) {
    throw Error(ErrorCode::NotFound, "paragraph " + std::to_string(index) + " of '" + doc_id +
                                         "' (total " + std::to_string(chunks.size()) + ")");
  }
  const corpus::Chunk* chunk = chunks[index];
  return json{{"chunk_id", chunk->chunk_id},
              {"text", chunk->text},
              {"index", chunk->index},
              {"total", chunks.size()},
              {"state", corpus::to_string(chunk->state)},
              {"struct_label", corpus::to_string(chunk->struct_label)}};
}

json Toolkit::browse_context(const json& args, ToolState& state) {
  std::string mode = args.at("mode").get<std::string>();
  json snippets = json::array();

  if (mode == "local") {
    std::string chunk_id = args.value("chunk_id", "");
    if (chunk_id.empty() && state.current_chunk) chunk_id = state.current_chunk->chunk_id;
    const corpus::Chunk* center = chunk_id.empty() ? nullptr : find_chunk(chunk_id, state.scope);
    if (!center) throw Error(ErrorCode::NotFound, "no chunk to browse around");
    long radius = args.value("radius", 1);
    auto chunks = docs_.chunks_of(center->doc_id, state.scope);
    long center_idx = static_cast<long>(center->index);
    for (long i = std::max(0L, center_idx - radius);
         i < static_cast<long>(chunks.size()) && i <= center_idx + radius; ++i) {
      if (i == center_idx) continue;
      snippets.push_back(json{{"chunk_id", chunks[i]->chunk_id},
                              {"index", chunks[i]->index},
                              {"text", truncate_snippet(chunks[i]->text)}});
    }
  } else if (mode == "kg_neighbors") {
    std::string query = args.value("query", "");
    if (query.empty()) throw Error(ErrorCode::SchemaViolation, "kg_neighbors mode needs a query");
    auto matches = graph_.find(query, graph::SearchType::Fuzzy, 5, state.scope);
    std::set<std::string> seeds;
    for (const auto& match : matches) seeds.insert(match.id);
    if (!seeds.empty()) {
      for (const auto& id : graph_.neighbors_bfs(seeds, 1, state.scope)) {
        const graph::Entity* entity = graph_.get_entity(id);
        snippets.push_back(json{{"entity_id", id},
                                {"name", entity->name},
                                {"entity_type", entity->entity_type}});
      }
    }
  } else {  // document_overview
    std::string doc_id = state.current_doc_id;
    if (doc_id.empty() && state.current_chunk) doc_id = state.current_chunk->doc_id;
    auto chunks = docs_.chunks_of(doc_id, state.scope);
    for (const corpus::Chunk* chunk : chunks) {
      if (chunk->struct_label == corpus::StructLabel::Heading) {
        snippets.push_back(json{{"chunk_id", chunk->chunk_id},
                                {"index", chunk->index},
                                {"heading", truncate_snippet(chunk->text, 80)}});
      }
    }
  }
  return json{{"mode", mode}, {"snippets", snippets}};
}

json Toolkit::search_kg(const json& args, ToolState& state) {
  std::string type_name = args.at("search_type").get<std::string>();
  graph::SearchType type = type_name == "entity"    ? graph::SearchType::Entity
                           : type_name == "relation" ? graph::SearchType::Relation
                                                     : graph::SearchType::Fuzzy;
  size_t limit = args.value("limit", 10);
  auto matches = graph_.find(args.at("query").get<std::string>(), type, limit, state.scope);
  json out = json::array();
  for (const auto& match : matches) {
    json m{{"id", match.id},
           {"kind", match.kind == graph::FindMatch::Entity ? "entity" : "relation"},
           {"label", match.label},
           {"confidence", match.confidence}};
    if (match.kind == graph::FindMatch::Entity) {
      const graph::Entity* entity = graph_.get_entity(match.id);
      m["entity_type"] = entity->entity_type;
      m["aliases"] = entity->aliases;
    }
    out.push_back(std::move(m));
  }
  return json{{"matches", out}};
}

json Toolkit::explore_fusion(const json& args, ToolState& state) {
  std::string mode = args.value("mode", "parallel");
  size_t top_k = args.value("top_k", 8);
  retrieval::Retriever retriever(graph_, vectors_, embedder_, &ledger_);

  retrieval::RetrievalRequest request;
  request.query = args.at("query").get<std::string>();
  request.top_k = top_k;
  request.k1 = std::max<size_t>(top_k, 100);
  request.scope = state.scope;

  auto serialize = [](const retrieval::RetrievalResult& result) {
    json out = json::array();
    for (const auto& candidate : result.candidates) {
      out.push_back(json{{"object_id", candidate.object_id},
                         {"rank_vec", candidate.rank_vec == retrieval::kMiss
                                          ? json(nullptr)
                                          : json(candidate.rank_vec)},
                         {"rank_kg", candidate.rank_kg == retrieval::kMiss
                                         ? json(nullptr)
                                         : json(candidate.rank_kg)},
                         {"rrf_score", candidate.rrf_score}});
    }
    return out;
  };

  if (mode == "graph_first") {
    // graph candidates first, vector supplementation fills the remainder
    request.mode = retrieval::Mode::Kg;
    json merged = json::array();
    std::set<std::string> seen;
    try {
      auto kg_result = retriever.retrieve(request);
      for (const auto& c : serialize(kg_result)) {
        seen.insert(c.at("object_id").get<std::string>());
        merged.push_back(c);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyIndex) throw;
    }
    if (merged.size() < top_k) {
      request.mode = retrieval::Mode::Vector;
      auto vec_result = retriever.retrieve(request);
      for (const auto& c : serialize(vec_result)) {
        if (merged.size() >= top_k) break;
        if (seen.insert(c.at("object_id").get<std::string>()).second) merged.push_back(c);
      }
    }
    return json{{"mode", mode}, {"results", merged}};
  }

  // parallel and vector_first both run the fusion pipeline
  request.mode = retrieval::Mode::Fusion;
  auto result = retriever.retrieve(request);
  return json{{"mode", mode}, {"results", serialize(result)}, {"fallback", result.fallback}};
}

// ---------------------------------------------------------------------------
// Write tools
// ---------------------------------------------------------------------------

json Toolkit::create_entity(const json& args, ToolState& state) {
  std::string name = args.at("name").get<std::string>();
  GateResult gate = run_gate(name);
  if (!gate.pass) {
    return json{{"status", "rejected"},
                {"rule", to_string(*gate.rule)},
                {"hint", "keep the observation, create a todo, or abandon the candidate"}};
  }

  std::string source_chunk = args.at("source_chunk").get<std::string>();
  std::string evidence = args.at("evidence").get<std::string>();
  require_evidence(source_chunk, evidence, state.scope);

  auto existing = graph_.find(name, graph::SearchType::Entity, 2, state.scope);
  if (!existing.empty()) {
    return json{{"status", "reused"}, {"entity_id", existing[0].id}};
  }

  graph::Entity entity;
  entity.name = name;
  entity.entity_type = args.at("entity_type").get<std::string>();
  entity.description = args.value("description", "");
  if (args.contains("aliases")) {
    for (const auto& alias : args.at("aliases")) entity.aliases.insert(alias.get<std::string>());
  }
  if (args.contains("properties")) entity.properties = args.at("properties");
  entity.confidence = args.value("certainty", 1.0);
  entity.scope = state.scope;

  sync::SyncOutcome outcome = sync_.sync_object(entity);
  if (outcome.status == sync::SyncStatus::Failed) {
    return json{{"status", "failed"}, {"alert", outcome.alert}, {"kg_id", outcome.kg_id}};
  }
  std::string prov_id = record_provenance(outcome.kg_id, "entity", source_chunk, evidence,
                                          ProvOperation::Create, entity.confidence, "");
  graph_.mutable_entity(outcome.kg_id)->evidence_refs.push_back(prov_id);
  state.counters.creates += 1;
  return json{{"status", "created"}, {"entity_id", outcome.kg_id}};
}

json Toolkit::create_relation(const json& args, ToolState& state) {
  std::string source_chunk = args.at("source_chunk").get<std::string>();
  std::string evidence = args.at("evidence").get<std::string>();
  require_evidence(source_chunk, evidence, state.scope);

  std::string head_id = resolve_entity(args.at("head").get<std::string>(), state.scope, "head");
  std::string tail_id = resolve_entity(args.at("tail").get<std::string>(), state.scope, "tail");

  std::string schema_state;
  std::string relation_type =
      resolve_relation_type(args.at("relation_type").get<std::string>(), &schema_state);
  double confidence = args.value("certainty", 1.0);

  // duplicate (head, type, tail) upserts into the existing relation
  for (const graph::Relation* existing : graph_.relations(state.scope)) {
    if (existing->head_id == head_id && existing->tail_id == tail_id &&
        existing->relation_type == relation_type) {
      std::string prov_id =
          record_provenance(existing->relation_id, "relation", source_chunk, evidence,
                            ProvOperation::Update, confidence, "duplicate create folded in");
      graph::Relation* mutable_rel = graph_.mutable_relation(existing->relation_id);
      mutable_rel->evidence_refs.push_back(prov_id);
      mutable_rel->confidence = std::max(mutable_rel->confidence, confidence);
      return json{{"status", "reused"}, {"relation_id", existing->relation_id}};
    }
  }

  graph::Relation relation;
  relation.head_id = head_id;
  relation.tail_id = tail_id;
  relation.relation_type = relation_type;
  relation.confidence = confidence;
  if (args.contains("properties")) relation.properties = args.at("properties");
  relation.scope = state.scope;
  std::string relation_id = graph_.upsert_relation(relation);

  std::string prov_id = record_provenance(relation_id, "relation", source_chunk, evidence,
                                          ProvOperation::Create, confidence,
                                          schema_state.empty() ? "" : "schema_state=PROPOSED");
  graph_.mutable_relation(relation_id)->evidence_refs.push_back(prov_id);
  state.counters.creates += 1;
  json result{{"status", "created"}, {"relation_id", relation_id}};
  if (!schema_state.empty()) result["schema_state"] = schema_state;
  return result;
}

json Toolkit::update_entity(const json& args, ToolState& state) {
  std::string entity_id =
      resolve_entity(args.at("entity_name").get<std::string>(), state.scope, "target");
  std::string source_chunk = args.value("source_chunk", "");
  std::string evidence = args.value("evidence", "");
  if (!source_chunk.empty()) require_evidence(source_chunk, evidence, state.scope);

  graph::Entity updated = *graph_.get_entity(entity_id);
  for (const auto& [key, value] : args.at("updates").items()) {
    if (key == "description") {
      updated.description = value.get<std::string>();
    } else if (key == "entity_type") {
      updated.entity_type = value.get<std::string>();
    } else if (key == "aliases") {
      for (const auto& alias : value) updated.aliases.insert(alias.get<std::string>());
    } else if (key == "confidence") {
      updated.confidence = value.get<double>();
    } else {
      updated.properties[key] = value;
    }
  }

  // re-sync keeps the vector aligned with the updated attributes
  sync::SyncOutcome outcome = sync_.sync_object(updated);
  if (outcome.status == sync::SyncStatus::Failed) {
    return json{{"status", "failed"}, {"alert", outcome.alert}, {"entity_id", entity_id}};
  }
  std::string prov_id = record_provenance(entity_id, "entity", source_chunk, evidence,
                                          ProvOperation::Update, updated.confidence,
                                          args.value("reason", ""));
  graph_.mutable_entity(entity_id)->evidence_refs.push_back(prov_id);
  state.counters.updates += 1;
  return json{{"status", "updated"}, {"entity_id", entity_id}};
}

json Toolkit::update_relation(const json& args, ToolState& state) {
  std::string relation_id = args.at("relation_id").get<std::string>();
  graph::Relation* relation = graph_.mutable_relation(relation_id);
  if (!relation) throw Error(ErrorCode::NotFound, "relation '" + relation_id + "'");

  std::string source_chunk = args.value("source_chunk", "");
  std::string evidence = args.value("evidence", "");
  if (!source_chunk.empty()) require_evidence(source_chunk, evidence, state.scope);
  if (args.contains("confidence")) relation->confidence = args.at("confidence").get<double>();

  std::string prov_id = record_provenance(relation_id, "relation", source_chunk, evidence,
                                          ProvOperation::Update, relation->confidence,
                                          "evidence supplemented");
  relation->evidence_refs.push_back(prov_id);
  state.counters.updates += 1;
  return json{{"status", "updated"}, {"relation_id", relation_id}};
}

json Toolkit::merge_entity(const json& args, ToolState& state) {
  std::string target_id =
      resolve_entity(args.at("target_name").get<std::string>(), state.scope, "target");
  std::string source_id =
      resolve_entity(args.at("source_name").get<std::string>(), state.scope, "source");
  if (target_id == source_id) {
    throw Error(ErrorCode::SelfMerge, "'" + args.at("target_name").get<std::string>() +
                                          "' and '" + args.at("source_name").get<std::string>() +
                                          "' resolve to the same entity");
  }
  std::string source_chunk = args.value("source_chunk", "");
  std::string evidence = args.value("evidence", "");
  if (!source_chunk.empty()) require_evidence(source_chunk, evidence, state.scope);

  graph::Entity* target = graph_.mutable_entity(target_id);
  const graph::Entity* source = graph_.get_entity(source_id);

  // migrate aliases, properties, evidence references
  target->aliases.insert(source->name);
  for (const auto& alias : source->aliases) {
    if (alias != target->name) target->aliases.insert(alias);
  }
  for (const auto& [key, value] : source->properties.items()) {
    if (!target->properties.contains(key)) target->properties[key] = value;
  }
  for (const auto& ref : source->evidence_refs) {
    if (std::find(target->evidence_refs.begin(), target->evidence_refs.end(), ref) ==
        target->evidence_refs.end()) {
      target->evidence_refs.push_back(ref);
    }
  }
  target->confidence = std::max(target->confidence, source->confidence);

  // re-point incident relations, then collapse duplicates
  size_t migrated = 0;
  for (const graph::Relation* incident : graph_.relations_incident(source_id)) {
    graph::Relation* relation = graph_.mutable_relation(incident->relation_id);
    if (relation->head_id == source_id) relation->head_id = target_id;
    if (relation->tail_id == source_id) relation->tail_id = target_id;
    ++migrated;
  }
  std::map<std::string, std::string> keeper;  // (head|type|tail) -> relation_id
  for (const graph::Relation* relation : graph_.relations(state.scope)) {
    std::string key = relation->head_id + "\x1f" + relation->relation_type + "\x1f" +
                      relation->tail_id;
    auto it = keeper.find(key);
    if (it == keeper.end()) {
      keeper[key] = relation->relation_id;
      continue;
    }
    graph::Relation* kept = graph_.mutable_relation(it->second);
    graph::Relation* dup = graph_.mutable_relation(relation->relation_id);
    for (const auto& ref : dup->evidence_refs) {
      if (std::find(kept->evidence_refs.begin(), kept->evidence_refs.end(), ref) ==
          kept->evidence_refs.end()) {
        kept->evidence_refs.push_back(ref);
      }
    }
    kept->confidence = std::max(kept->confidence, dup->confidence);
    graph_.soft_delete_relation(dup->relation_id, "collapsed duplicate after merge");
  }

  // re-point evidence bridges and hypernode memberships
  for (const graph::BridgeEdge* bridge : graph_.bridges_to(source_id)) {
    graph_.ensure_bridge(bridge->type, bridge->from_id, target_id, bridge->scope);
  }
  for (const graph::BridgeEdge* bridge : graph_.bridges_from(source_id)) {
    graph_.ensure_bridge(bridge->type, target_id, bridge->to_id, bridge->scope);
  }
  for (const graph::HyperNode* hyper : graph_.hypernodes(state.scope)) {
    if (hyper->member_ids.count(source_id)) {
      graph::HyperNode updated = *hyper;
      updated.member_ids.erase(source_id);
      updated.member_ids.insert(target_id);
      graph_.upsert_hypernode(updated);
    }
  }

  std::string merge_basis = "merged '" + source->name + "' (" + source_id + ") into '" +
                            target->name + "' (" + target_id + ")";
  graph_.erase_entity(source_id);
  vectors_.erase_object(vec::Collection::Entity, source_id, state.scope);

  std::string prov_id = record_provenance(target_id, "entity", source_chunk, evidence,
                                          ProvOperation::Merge, target->confidence, merge_basis);
  graph_.mutable_entity(target_id)->evidence_refs.push_back(prov_id);
  state.counters.merges += 1;
  return json{{"status", "merged"}, {"target_id", target_id}, {"migrated_relations", migrated}};
}

json Toolkit::merge_relation(const json& args, ToolState& state) {
  std::string target_id = args.at("target_id").get<std::string>();
  std::string source_id = args.at("source_id").get<std::string>();
  if (target_id == source_id) throw Error(ErrorCode::SelfMerge, "cannot merge a relation into itself");
  graph::Relation* target = graph_.mutable_relation(target_id);
  graph::Relation* source = graph_.mutable_relation(source_id);
  if (!target) throw Error(ErrorCode::NotFound, "relation '" + target_id + "'");
  if (!source) throw Error(ErrorCode::NotFound, "relation '" + source_id + "'");

  for (const auto& ref : source->evidence_refs) {
    if (std::find(target->evidence_refs.begin(), target->evidence_refs.end(), ref) ==
        target->evidence_refs.end()) {
      target->evidence_refs.push_back(ref);
    }
  }
  target->confidence = std::max(target->confidence, source->confidence);
  graph_.soft_delete_relation(source_id, "merged into " + target_id);

  record_provenance(target_id, "relation", "", "", ProvOperation::Merge, target->confidence,
                    "merged relation " + source_id + " into " + target_id);
  state.counters.merges += 1;
  return json{{"status", "merged"}, {"target_id", target_id}};
}

json Toolkit::delete_entity(const json& args, ToolState& state) {
  std::string entity_id =
      resolve_entity(args.at("entity_name").get<std::string>(), state.scope, "target");
  std::string reason = args.at("reason").get<std::string>();

  // provenance survives hard deletion (audit trumps deletion)
  record_provenance(entity_id, "entity", "", "", ProvOperation::Delete, 1.0, reason);
  graph_.hard_delete_entity(entity_id, reason);
  vectors_.erase_object(vec::Collection::Entity, entity_id, state.scope);
  state.counters.deletes += 1;
  return json{{"status", "deleted"}, {"entity_id", entity_id}};
}

json Toolkit::delete_relation(const json& args, ToolState& state) {
  std::string relation_id = args.at("relation_id").get<std::string>();
  std::string reason = args.at("reason").get<std::string>();
  graph::DeleteStatus status = graph_.soft_delete_relation(relation_id, reason);

  record_provenance(relation_id, "relation", "", "", ProvOperation::Delete, 1.0, reason);
  state.counters.deletes += 1;
  return json{{"status", status == graph::DeleteStatus::Deleted ? "soft_deleted"
                                                                : "already_deleted"},
              {"relation_id", relation_id}};
}

json Toolkit::batch_kg_operations(const json& args, ToolState& state) {
  json counters{{"searches", 0},        {"created_entities", 0}, {"created_relations", 0},
                {"reused", 0},          {"updated", 0},          {"merged", 0},
                {"deleted", 0},         {"rejected", 0},         {"failed", 0}};
  json results = json::array();

  auto run_sub = [&](const std::string& tool, const json& sub_args) -> json {
    json observation;
    try {
      validate_args(schema_for(tool), sub_args, "batch_kg_ops/" + tool);
      if (tool == "search_kg") observation = search_kg(sub_args, state);
      else if (tool == "create_entity") observation = create_entity(sub_args, state);
      else if (tool == "create_relation") observation = create_relation(sub_args, state);
      else if (tool == "update_entity") observation = update_entity(sub_args, state);
      else if (tool == "update_relation") observation = update_relation(sub_args, state);
      else if (tool == "merge_entity") observation = merge_entity(sub_args, state);
      else if (tool == "merge_relation") observation = merge_relation(sub_args, state);
      else if (tool == "delete_entity") observation = delete_entity(sub_args, state);
      else observation = delete_relation(sub_args, state);
      observation["ok"] = true;
    } catch (const TransientError&) {
      throw;
    } catch (const std::exception& e) {
      observation = json{{"ok", false}, {"error", e.what()}};
      counters["failed"] = counters["failed"].get<int>() + 1;
    }
    observation["op"] = tool;
    results.push_back(observation);
    return observation;
  };

  for (const json& op : args.value("searches", json::array())) {
    json observation = run_sub("search_kg", op);
    if (observation.value("ok", false)) counters["searches"] = counters["searches"].get<int>() + 1;
  }
  for (const json& op : args.value("creates", json::array())) {
    bool is_relation = op.contains("head") || op.contains("tail");
    json observation = run_sub(is_relation ? "create_relation" : "create_entity", op);
    if (!observation.value("ok", false)) continue;
    std::string status = observation.value("status", "");
    if (status == "created") {
      auto key = is_relation ? "created_relations" : "created_entities";
      counters[key] = counters[key].get<int>() + 1;
    } else if (status == "reused") {
      counters["reused"] = counters["reused"].get<int>() + 1;
    } else if (status == "rejected") {
      counters["rejected"] = counters["rejected"].get<int>() + 1;
    } else {
      counters["failed"] = counters["failed"].get<int>() + 1;
    }
  }
  for (const json& op : args.value("updates", json::array())) {
    bool is_relation = op.contains("relation_id");
    json observation = run_sub(is_relation ? "update_relation" : "update_entity", op);
    if (observation.value("ok", false) && observation.value("status", "") == "updated") {
      counters["updated"] = counters["updated"].get<int>() + 1;
    }
  }
  for (const json& op : args.value("merges", json::array())) {
    bool is_relation = op.contains("target_id");
    json observation = run_sub(is_relation ? "merge_relation" : "merge_entity", op);
    if (observation.value("ok", false) && observation.value("status", "") == "merged") {
      counters["merged"] = counters["merged"].get<int>() + 1;
    }
  }
  for (const json& op : args.value("deletes", json::array())) {
    bool is_relation = op.contains("relation_id");
    json observation = run_sub(is_relation ? "delete_relation" : "delete_entity", op);
    if (observation.value("ok", false)) counters["deleted"] = counters["deleted"].get<int>() + 1;
  }

  return json{{"counters", counters}, {"results", results}};
}

// ---------------------------------------------------------------------------
// Review / deferred / progress tools
// ---------------------------------------------------------------------------

json Toolkit::mark_for_review(const json& args, ToolState& state) {
  ReviewItem item{args.at("subject").get<std::string>(), args.at("reason").get<std::string>(),
                  args.value("priority", 0)};
  state.review_queue.push_back(item);
  return json{{"status", "queued"}, {"review", to_json(item)}};
}

json Toolkit::create_todo(const json& args, ToolState& state) {
  TodoItem item{args.at("task").get<std::string>(), args.at("todo_type").get<std::string>(),
                args.value("related_entity", ""), args.value("priority", 0)};
  state.todo_queue.push_back(item);
  return json{{"status", "queued"}, {"todo", to_json(item)}};
}

json Toolkit::get_progress(const json&, ToolState& state) {
  return json{{"paragraph_position", state.paragraph_index},
              {"total_paragraphs", state.paragraph_total},
              {"entities", graph_.entities(state.scope).size()},
              {"relations", graph_.relations(state.scope).size()},
              {"merges", state.counters.merges},
              {"todo_count", state.todo_queue.size()},
              {"review_queue_length", state.review_queue.size()},
              {"tool_calls", state.counters.tool_calls}};
}

}  // namespace kgfuse::toolkit

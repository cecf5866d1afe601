#include <doctest.h>

#include <random>

#include "kgfuse/errors.hpp"
#include "kgfuse/toolkit.hpp"

using namespace kgfuse;
using namespace kgfuse::toolkit;
using json = nlohmann::json;

namespace {

IsolationScope scope{"t", "run1", "ds", ""};

// Full store rig with one ingested document the tools can cite.
struct Rig {
  graph::GraphStore graph;
  vec::VectorIndex vectors{32};
  vec::NgramEmbedder embedder{32};
  corpus::DocumentStore docs;
  ProvenanceLedger ledger;
  sync::SyncCoordinator sync{graph, vectors, embedder, ledger};
  schema::SchemaProfile profile = schema::SchemaOrchestrator::fallback_profile();
  schema::SchemaOrchestrator orchestrator{embedder};
  Toolkit kit{graph, vectors, docs, ledger, sync, embedder, &profile, &orchestrator};
  ToolState state;

  explicit Rig(const std::string& body =
                   "CNN is a neural model. Convolutional Neural Network is the long form. "
                   "LeCun proposed CNN.") {
    corpus::Document doc{"doc", "Doc", body, ""};
    docs.add_document(doc, scope);
    auto chunks = corpus::chunk_document(doc, {corpus::ChunkStrategy::Paragraph, 4000, 0});
    docs.add_chunks(chunks, scope);
    state.scope = scope;
    state.current_chunk = docs.find_chunk(chunks[0].chunk_id, scope);
    state.current_doc_id = "doc";
    state.paragraph_total = chunks.size();
  }

  json call(const std::string& tool, json args) {
    return kit.dispatch({tool, std::move(args), "call"}, state);
  }

  json create_cnn() {
    return call("create_entity", {{"name", "CNN"},
                                  {"entity_type", "Method"},
                                  {"description", "convolutional model"},
                                  {"aliases", json::array({"Convolutional Neural Network"})},
                                  {"source_chunk", "doc#c0000"},
                                  {"evidence", "CNN is a neural model"},
                                  {"certainty", 0.9}});
  }
};

}  // namespace

TEST_SUITE_BEGIN("toolkit");

TEST_CASE("quality gate: spec-named cases with first-violated-rule reporting") {
  GateConfig config = GateConfig::defaults();

  CHECK(quality_gate("CNN", config).pass);
  CHECK(quality_gate("Convolutional Neural Network", config).pass);

  std::string long_name(61, 'a');
  auto r1 = quality_gate(long_name, config);
  REQUIRE(!r1.pass);
  CHECK(*r1.rule == GateRule::Length);

  std::string half_unprintable = "ab\x01\x02";
  auto r2 = quality_gate(half_unprintable, config);
  REQUIRE(!r2.pass);
  CHECK(*r2.rule == GateRule::PrintableRatio);

  auto r3 = quality_gate("the model was trained on data", config);
  REQUIRE(!r3.pass);
  CHECK(*r3.rule == GateRule::SentenceFragment);

  auto r4 = quality_gate("def train_model", config);
  REQUIRE(!r4.pass);
  CHECK(*r4.rule == GateRule::CodeKeyword);

  auto r5 = quality_gate("loss \\frac{a}{b}", config);
  REQUIRE(!r5.pass);
  CHECK(*r5.rule == GateRule::MathFormula);

  auto r6 = quality_gate("a,b,c,d,e,f", config);
  REQUIRE(!r6.pass);
  CHECK(*r6.rule == GateRule::PunctuationFlood);

  auto r7 = quality_gate("broken \xEF\xBF\xBD text", config);
  REQUIRE(!r7.pass);
  CHECK(*r7.rule == GateRule::PdfGarbled);

  auto r8 = quality_gate("Introduction", config);
  REQUIRE(!r8.pass);
  CHECK(*r8.rule == GateRule::GenericHeading);
  CHECK(*quality_gate("3. Related Work", config).rule == GateRule::GenericHeading);
}

TEST_CASE("gate ordering: lower-numbered rule wins") {
  GateConfig config = GateConfig::defaults();
  // violates LENGTH (1) and CODE_KEYWORD (4): report 1
  std::string both = "def " + std::string(70, 'x');
  auto r = quality_gate(both, config);
  REQUIRE(!r.pass);
  CHECK(*r.rule == GateRule::Length);

  // violates PRINTABLE (2) before PUNCT_FLOOD (6)
  std::string mixed = "\x01\x02\x01\x02,,,";
  auto r2 = quality_gate(mixed, config);
  REQUIRE(!r2.pass);
  CHECK(*r2.rule == GateRule::PrintableRatio);
}

TEST_CASE("gate config round-trips through json") {
  GateConfig config = GateConfig::defaults();
  GateConfig loaded = GateConfig::from_json(config.to_json());
  CHECK(loaded.max_length == config.max_length);
  CHECK(loaded.generic_headings == config.generic_headings);
  CHECK(loaded.code_markers == config.code_markers);
}

TEST_CASE("dispatch rejects unknown tools and schema violations") {
  Rig rig;
  json unknown = rig.call("no_such_tool", {});
  CHECK(!unknown.at("ok").get<bool>());
  CHECK(unknown.at("error").at("code") == "UnknownTool");

  json missing = rig.call("create_entity", {{"entity_type", "Method"}});
  CHECK(!missing.at("ok").get<bool>());
  CHECK(missing.at("error").at("code") == "SchemaViolation");

  json extra = rig.call("get_progress", {{"bogus", 1}});
  CHECK(!extra.at("ok").get<bool>());

  json bad_enum = rig.call("search_kg", {{"query", "x"}, {"search_type", "telepathy"}});
  CHECK(bad_enum.at("error").at("code") == "SchemaViolation");
}

TEST_CASE("create_entity: gate, creation, reuse and provenance") {
  Rig rig;
  json created = rig.create_cnn();
  REQUIRE(created.at("ok").get<bool>());
  CHECK(created.at("result").at("status") == "created");
  std::string entity_id = created.at("result").at("entity_id");

  // provenance recorded with CREATE and anchored evidence
  auto records = rig.ledger.trace({{}, {}, entity_id, {}});
  REQUIRE(records.size() == 1);
  CHECK(records[0].operation == ProvOperation::Create);
  CHECK(records[0].source_chunk_id == "doc#c0000");

  // second create reuses, no duplicate node, no new provenance
  json reused = rig.create_cnn();
  CHECK(reused.at("result").at("status") == "reused");
  CHECK(reused.at("result").at("entity_id") == entity_id);
  CHECK(rig.graph.entities(scope).size() == 1);
  CHECK(rig.ledger.records().size() == 1);

  // alias reuse: long form resolves to the same node
  json via_alias = rig.call("create_entity", {{"name", "Convolutional Neural Network"},
                                              {"entity_type", "Method"},
                                              {"source_chunk", "doc#c0000"},
                                              {"evidence", "CNN"}});
  CHECK(via_alias.at("result").at("status") == "reused");

  // 61-char name rejected with rule LENGTH
  json rejected = rig.call("create_entity", {{"name", std::string(61, 'x')},
                                             {"entity_type", "Method"},
                                             {"source_chunk", "doc#c0000"},
                                             {"evidence", "CNN"}});
  CHECK(rejected.at("result").at("status") == "rejected");
  CHECK(rejected.at("result").at("rule") == "LENGTH");
}

TEST_CASE("evidence must be a verbatim substring of the cited chunk") {
  Rig rig;
  json bad = rig.call("create_entity", {{"name", "Ghost"},
                                        {"entity_type", "Method"},
                                        {"source_chunk", "doc#c0000"},
                                        {"evidence", "this text is nowhere in the chunk"}});
  CHECK(!bad.at("ok").get<bool>());
  CHECK(bad.at("error").at("code") == "EvidenceNotAnchored");

  json missing_chunk = rig.call("create_entity", {{"name", "Ghost"},
                                                  {"entity_type", "Method"},
                                                  {"source_chunk", "doc#c9999"},
                                                  {"evidence", "x"}});
  CHECK(missing_chunk.at("error").at("code") == "NotFound");
}

TEST_CASE("create_relation resolves endpoints, dedupes and records provenance") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "LeCun proposed CNN"}});

  json rel = rig.call("create_relation", {{"head", "LeCun"},
                                          {"relation_type", "proposed"},
                                          {"tail", "CNN"},
                                          {"evidence", "LeCun proposed CNN"},
                                          {"source_chunk", "doc#c0000"}});
  REQUIRE(rel.at("ok").get<bool>());
  CHECK(rel.at("result").at("status") == "created");
  std::string relation_id = rel.at("result").at("relation_id");
  CHECK(rig.graph.get_relation(relation_id)->relation_type == "PROPOSED");  // normalized

  // duplicate triple folds into the existing relation
  json dup = rig.call("create_relation", {{"head", "LeCun"},
                                          {"relation_type", "PROPOSED"},
                                          {"tail", "CNN"},
                                          {"evidence", "LeCun proposed CNN"},
                                          {"source_chunk", "doc#c0000"}});
  CHECK(dup.at("result").at("status") == "reused");
  CHECK(rig.graph.relations(scope).size() == 1);

  // unknown endpoint
  json bad = rig.call("create_relation", {{"head", "Nobody"},
                                          {"relation_type", "KNOWS"},
                                          {"tail", "CNN"},
                                          {"evidence", "CNN"},
                                          {"source_chunk", "doc#c0000"}});
  CHECK(bad.at("error").at("code") == "NotFound");
}

TEST_CASE("ambiguous endpoints instruct review") {
  Rig rig;
  rig.create_cnn();
  // second distinct entity carrying the same alias
  graph::Entity clone;
  clone.name = "CNN Architecture";
  clone.aliases = {"CNN"};
  clone.entity_type = "Method";
  clone.scope = scope;
  rig.graph.upsert_entity(clone);

  json rel = rig.call("create_relation", {{"head", "CNN"},
                                          {"relation_type", "USES"},
                                          {"tail", "CNN"},
                                          {"evidence", "CNN"},
                                          {"source_chunk", "doc#c0000"}});
  CHECK(!rel.at("ok").get<bool>());
  CHECK(rel.at("error").at("code") == "AmbiguousEndpoint");
}

TEST_CASE("merge_entity migrates aliases, relations and collapses duplicates") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_entity", {{"name", "ConvNet"},
                             {"entity_type", "Method"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "neural model"}});
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "LeCun proposed CNN"}});
  rig.call("create_relation", {{"head", "LeCun"},
                               {"relation_type", "PROPOSED"},
                               {"tail", "ConvNet"},
                               {"evidence", "LeCun proposed CNN"},
                               {"source_chunk", "doc#c0000"}});
  rig.call("create_relation", {{"head", "LeCun"},
                               {"relation_type", "PROPOSED"},
                               {"tail", "CNN"},
                               {"evidence", "LeCun proposed CNN"},
                               {"source_chunk", "doc#c0000"}});

  size_t live_before = rig.graph.relations(scope).size();
  CHECK(live_before == 2);

  json merged = rig.call("merge_entity", {{"target_name", "CNN"}, {"source_name", "ConvNet"}});
  REQUIRE(merged.at("ok").get<bool>());

  // source absorbed: alias gained, node gone, duplicate relation collapsed
  auto matches = rig.graph.find("ConvNet", graph::SearchType::Entity, 5, scope);
  REQUIRE(matches.size() == 1);
  const graph::Entity* target = rig.graph.get_entity(matches[0].id);
  CHECK(target->name == "CNN");
  CHECK(target->aliases.count("ConvNet") == 1);
  CHECK(rig.graph.relations(scope).size() == 1);

  // MERGE provenance exists
  auto records = rig.ledger.trace({{}, {}, target->entity_id, ProvOperation::Merge});
  CHECK(records.size() == 1);

  // self merge rejected
  json self = rig.call("merge_entity", {{"target_name", "CNN"}, {"source_name", "CNN"}});
  CHECK(self.at("error").at("code") == "SelfMerge");
}

TEST_CASE("delete tools: soft relation delete, hard entity delete, provenance retained") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "LeCun"}});
  json rel = rig.call("create_relation", {{"head", "LeCun"},
                                          {"relation_type", "PROPOSED"},
                                          {"tail", "CNN"},
                                          {"evidence", "LeCun proposed CNN"},
                                          {"source_chunk", "doc#c0000"}});
  std::string relation_id = rel.at("result").at("relation_id");

  json soft = rig.call("delete_relation", {{"relation_id", relation_id}, {"reason", "wrong"}});
  CHECK(soft.at("result").at("status") == "soft_deleted");
  CHECK(rig.graph.get_relation(relation_id)->deleted);

  std::string cnn_id = rig.graph.find("CNN", graph::SearchType::Entity, 1, scope)[0].id;
  json hard = rig.call("delete_entity", {{"entity_name", "CNN"}, {"reason", "test"}});
  CHECK(hard.at("result").at("status") == "deleted");
  CHECK(rig.graph.get_entity(cnn_id) == nullptr);
  CHECK(rig.vectors.find_object(vec::Collection::Entity, cnn_id, scope) == nullptr);
  // audit trail survives the hard delete
  CHECK(rig.ledger.has_record_for(cnn_id));
}

TEST_CASE("read tools mutate nothing and read_paragraph returns text+status") {
  Rig rig;
  size_t records_before = rig.ledger.records().size();
  json para = rig.call("read_paragraph", {{"paragraph_idx", 0}, {"doc_id", "doc"}});
  REQUIRE(para.at("ok").get<bool>());
  CHECK(para.at("result").at("total") == 1);
  CHECK(para.at("result").at("text").get<std::string>().find("CNN") != std::string::npos);

  json empty_search = rig.call("search_kg", {{"query", "CNN"}, {"search_type", "entity"}});
  CHECK(empty_search.at("result").at("matches").empty());
  CHECK(rig.ledger.records().size() == records_before);
  CHECK(rig.graph.entities(scope).empty());
}

TEST_CASE("get_progress reports the spec-named fields") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_todo", {{"task", "check aliases"}, {"todo_type", "verify"}});
  rig.call("mark_for_review", {{"subject", "CNN"}, {"reason", "uncertain"}});

  json progress = rig.call("get_progress", json::object());
  REQUIRE(progress.at("ok").get<bool>());
  const json& r = progress.at("result");
  CHECK(r.at("entities") == 1);
  CHECK(r.at("relations") == 0);
  CHECK(r.at("merges") == 0);
  CHECK(r.at("todo_count") == 1);
  CHECK(r.at("review_queue_length") == 1);
  CHECK(r.at("paragraph_position") == 0);
}

TEST_CASE("batch executes in order and one failing sub-op does not abort") {
  Rig rig;
  json batch = rig.call(
      "batch_kg_ops",
      {{"searches", json::array({{{"query", "CNN"}, {"search_type", "fuzzy"}}})},
       {"creates",
        json::array(
            {{{"name", "CNN"},
              {"entity_type", "Method"},
              {"source_chunk", "doc#c0000"},
              {"evidence", "CNN is a neural model"}},
             {{"name", "LeCun"},
              {"entity_type", "Person"},
              {"source_chunk", "doc#c0000"},
              {"evidence", "LeCun proposed CNN"}},
             {{"name", std::string(61, 'q')},  // gate rejection
              {"entity_type", "Method"},
              {"source_chunk", "doc#c0000"},
              {"evidence", "CNN"}},
             {{"head", "LeCun"},
              {"relation_type", "PROPOSED"},
              {"tail", "CNN"},
              {"evidence", "LeCun proposed CNN"},
              {"source_chunk", "doc#c0000"}}})}});
  REQUIRE(batch.at("ok").get<bool>());
  const json& counters = batch.at("result").at("counters");
  CHECK(counters.at("created_entities") == 2);
  CHECK(counters.at("created_relations") == 1);
  CHECK(counters.at("rejected") == 1);
  CHECK(counters.at("searches") == 1);
  CHECK(rig.graph.entities(scope).size() == 2);
  CHECK(rig.graph.relations(scope).size() == 1);

  json empty = rig.call("batch_kg_ops", json::object());
  const json& zero = empty.at("result").at("counters");
  CHECK(zero.at("created_entities") == 0);
  CHECK(zero.at("deleted") == 0);
}

TEST_CASE("batch final state equals the equivalent standalone sequence") {
  auto run_standalone = [](Rig& rig) {
    rig.call("create_entity", {{"name", "Alpha"},
                               {"entity_type", "Method"},
                               {"source_chunk", "doc#c0000"},
                               {"evidence", "CNN"}});
    rig.call("create_entity", {{"name", "Beta"},
                               {"entity_type", "Method"},
                               {"source_chunk", "doc#c0000"},
                               {"evidence", "CNN"}});
    rig.call("create_relation", {{"head", "Alpha"},
                                 {"relation_type", "RELATED_TO"},
                                 {"tail", "Beta"},
                                 {"evidence", "CNN"},
                                 {"source_chunk", "doc#c0000"}});
    rig.call("update_entity",
             {{"entity_name", "Alpha"}, {"updates", {{"description", "updated"}}}});
  };
  Rig a;
  run_standalone(a);

  Rig b;
  b.call("batch_kg_ops",
         {{"creates", json::array({{{"name", "Alpha"},
                                    {"entity_type", "Method"},
                                    {"source_chunk", "doc#c0000"},
                                    {"evidence", "CNN"}},
                                   {{"name", "Beta"},
                                    {"entity_type", "Method"},
                                    {"source_chunk", "doc#c0000"},
                                    {"evidence", "CNN"}},
                                   {{"head", "Alpha"},
                                    {"relation_type", "RELATED_TO"},
                                    {"tail", "Beta"},
                                    {"evidence", "CNN"},
                                    {"source_chunk", "doc#c0000"}}})},
          {"updates",
           json::array({{{"entity_name", "Alpha"}, {"updates", {{"description", "updated"}}}}})}});

  auto snapshot = [](Rig& rig) {
    json out = json::array();
    for (const graph::Entity* e : rig.graph.entities(scope, true)) {
      out.push_back({{"id", e->entity_id}, {"name", e->name}, {"desc", e->description}});
    }
    for (const graph::Relation* r : rig.graph.relations(scope, true)) {
      out.push_back({{"id", r->relation_id},
                     {"head", r->head_id},
                     {"tail", r->tail_id},
                     {"type", r->relation_type},
                     {"deleted", r->deleted}});
    }
    return out.dump();
  };
  CHECK(snapshot(a) == snapshot(b));
}

TEST_CASE("trace filters by chunk and operation in chronological order") {
  Rig rig;
  rig.create_cnn();
  rig.call("update_entity", {{"entity_name", "CNN"},
                             {"updates", {{"description", "updated model"}}},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "neural model"}});

  std::string cnn_id = rig.graph.find("CNN", graph::SearchType::Entity, 1, scope)[0].id;
  auto by_entity = rig.ledger.trace({{}, {}, cnn_id, {}});
  REQUIRE(by_entity.size() == 2);
  CHECK(by_entity[0].operation == ProvOperation::Create);
  CHECK(by_entity[1].operation == ProvOperation::Update);
  CHECK(by_entity[0].timestamp < by_entity[1].timestamp);

  auto by_chunk = rig.ledger.trace({{}, std::string("doc#c0000"), {}, {}});
  CHECK(by_chunk.size() == 2);

  auto untouched = rig.ledger.trace({{}, {}, std::string("e9999"), {}});
  CHECK(untouched.empty());
}

TEST_CASE("every live object has anchored provenance reachable via trace") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "LeCun proposed CNN"}});
  rig.call("create_relation", {{"head", "LeCun"},
                               {"relation_type", "PROPOSED"},
                               {"tail", "CNN"},
                               {"evidence", "LeCun proposed CNN"},
                               {"source_chunk", "doc#c0000"}});

  size_t writes = 3;
  CHECK(rig.ledger.records().size() >= writes);

  auto verify_anchored = [&](const std::string& object_id) {
    auto records = rig.ledger.trace({{}, {}, object_id, {}});
    REQUIRE(!records.empty());
    bool anchored = false;
    for (const auto& record : records) {
      if (record.source_chunk_id.empty()) continue;
      const corpus::Chunk* chunk = rig.docs.find_chunk(record.source_chunk_id, scope);
      REQUIRE(chunk != nullptr);
      if (chunk->text.find(record.evidence_snippet) != std::string::npos) anchored = true;
    }
    CHECK(anchored);
  };
  for (const graph::Entity* entity : rig.graph.entities(scope)) verify_anchored(entity->entity_id);
  for (const graph::Relation* rel : rig.graph.relations(scope)) verify_anchored(rel->relation_id);
}

TEST_CASE("tool schemas are published for all 16 tools") {
  CHECK(Toolkit::tool_names().size() == 16);
  json all = Toolkit::tool_schemas();
  CHECK(all.size() == 16);
  for (const auto& name : Toolkit::tool_names()) {
    json schema = Toolkit::schema_for(name);
    CHECK(schema.at("type") == "object");
    CHECK(schema.contains("properties"));
    CHECK(schema.contains("required"));
  }
  CHECK_THROWS_AS(Toolkit::schema_for("bogus"), Error);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("toolkit");

TEST_CASE("browse_context: local, kg_neighbors and document_overview modes") {
  Rig rig("# Title\n\n## First\nCNN appears here. LeCun proposed CNN.\n\n## Second\nmore text follows.\n");
  // re-chunk structurally so headings exist
  rig.docs = corpus::DocumentStore();
  corpus::Document doc{"doc", "Doc",
                       "# Title\n\n## First\nCNN appears here. LeCun proposed CNN.\n\n## Second\nmore text follows.\n",
                       ""};
  rig.docs.add_document(doc, scope);
  auto chunks = corpus::chunk_document(doc, {corpus::ChunkStrategy::Structural, 800, 0});
  rig.docs.add_chunks(chunks, scope);
  rig.state.current_chunk = rig.docs.find_chunk(chunks[1].chunk_id, scope);
  rig.state.current_doc_id = "doc";

  json local = rig.call("browse_context", {{"mode", "local"}, {"radius", 1}});
  REQUIRE(local.at("ok").get<bool>());
  CHECK(local.at("result").at("snippets").size() == 2);  // previous and next chunk

  json overview = rig.call("browse_context", {{"mode", "document_overview"}});
  REQUIRE(overview.at("ok").get<bool>());
  CHECK(overview.at("result").at("snippets").size() == 3);  // three heading chunks

  rig.call("create_entity", {{"name", "CNN"},
                             {"entity_type", "Method"},
                             {"source_chunk", chunks[1].chunk_id},
                             {"evidence", "CNN appears here"}});
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", chunks[1].chunk_id},
                             {"evidence", "LeCun proposed CNN"}});
  rig.call("create_relation", {{"head", "LeCun"},
                               {"relation_type", "PROPOSED"},
                               {"tail", "CNN"},
                               {"evidence", "LeCun proposed CNN"},
                               {"source_chunk", chunks[1].chunk_id}});
  json neighbors = rig.call("browse_context", {{"mode", "kg_neighbors"}, {"query", "CNN"}});
  REQUIRE(neighbors.at("ok").get<bool>());
  REQUIRE(neighbors.at("result").at("snippets").size() == 1);
  CHECK(neighbors.at("result").at("snippets")[0].at("name") == "LeCun");
}

TEST_CASE("explore_fusion returns rrf-ranked results through the tool surface") {
  Rig rig;
  rig.create_cnn();
  // sync the chunk so vector recall has something to return
  const corpus::Chunk* chunk = rig.docs.find_chunk("doc#c0000", scope);
  std::string cnn = rig.graph.find("CNN", graph::SearchType::Entity, 1, scope)[0].id;
  rig.sync.sync_chunk(*chunk, {cnn}, scope, "Doc");

  json fused = rig.call("explore_fusion", {{"query", "CNN neural model"}, {"top_k", 3}});
  REQUIRE(fused.at("ok").get<bool>());
  REQUIRE(!fused.at("result").at("results").empty());
  CHECK(fused.at("result").at("results")[0].contains("rrf_score"));

  json graph_first = rig.call("explore_fusion",
                              {{"query", "CNN"}, {"mode", "graph_first"}, {"top_k", 3}});
  REQUIRE(graph_first.at("ok").get<bool>());
  CHECK(!graph_first.at("result").at("results").empty());
}

TEST_CASE("update_relation supplements evidence and confidence") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "LeCun proposed CNN"}});
  json rel = rig.call("create_relation", {{"head", "LeCun"},
                                          {"relation_type", "PROPOSED"},
                                          {"tail", "CNN"},
                                          {"evidence", "LeCun proposed CNN"},
                                          {"source_chunk", "doc#c0000"},
                                          {"certainty", 0.5}});
  std::string relation_id = rel.at("result").at("relation_id");

  json updated = rig.call("update_relation", {{"relation_id", relation_id},
                                              {"evidence", "LeCun proposed CNN"},
                                              {"confidence", 0.95},
                                              {"source_chunk", "doc#c0000"}});
  REQUIRE(updated.at("ok").get<bool>());
  CHECK(rig.graph.get_relation(relation_id)->confidence == 0.95);
  auto records = rig.ledger.trace({{}, {}, relation_id, ProvOperation::Update});
  CHECK(records.size() == 1);

  json missing = rig.call("update_relation", {{"relation_id", "r9999"}});
  CHECK(missing.at("error").at("code") == "NotFound");
}

TEST_CASE("merge_relation migrates evidence and soft-deletes the source") {
  Rig rig;
  rig.create_cnn();
  rig.call("create_entity", {{"name", "LeCun"},
                             {"entity_type", "Person"},
                             {"source_chunk", "doc#c0000"},
                             {"evidence", "LeCun proposed CNN"}});
  json r1 = rig.call("create_relation", {{"head", "LeCun"},
                                         {"relation_type", "PROPOSED"},
                                         {"tail", "CNN"},
                                         {"evidence", "LeCun proposed CNN"},
                                         {"source_chunk", "doc#c0000"},
                                         {"certainty", 0.5}});
  json r2 = rig.call("create_relation", {{"head", "LeCun"},
                                         {"relation_type", "AUTHORED"},
                                         {"tail", "CNN"},
                                         {"evidence", "LeCun proposed CNN"},
                                         {"source_chunk", "doc#c0000"},
                                         {"certainty", 0.9}});
  std::string target = r1.at("result").at("relation_id");
  std::string source = r2.at("result").at("relation_id");

  json merged = rig.call("merge_relation", {{"target_id", target}, {"source_id", source}});
  REQUIRE(merged.at("ok").get<bool>());
  CHECK(rig.graph.get_relation(source)->deleted);
  CHECK(rig.graph.get_relation(target)->confidence == 0.9);
  CHECK(rig.graph.get_relation(target)->evidence_refs.size() == 2);

  json self = rig.call("merge_relation", {{"target_id", target}, {"source_id", target}});
  CHECK(self.at("error").at("code") == "SelfMerge");
}

TEST_SUITE_END();

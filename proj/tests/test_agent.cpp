#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kgfuse/agent.hpp"
#include "kgfuse/errors.hpp"
#include "kgfuse/llm_policy.hpp"
#include <httplib.h>
#include <thread>

#include "kgfuse/scripted_policy.hpp"

using namespace kgfuse;
using namespace kgfuse::agent;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

IsolationScope scope{"t", "sess1", "ds", ""};

const char* kBody =
    "Alpha system parses text. It reads the raw input stream.\n\n"
    "Beta engine plans routes. Alpha system feeds Beta engine.\n\n"
    "Gamma store saves results for later use.";

json mini_fixture() {
  return json{
      {"format", "kgfuse.script"},
      {"version", 1},
      {"schema",
       {{"domain_label", "systems"},
        {"entity_labels", json::array({"System", "Concept"})},
        {"relations",
         json::array({{{"name", "FEEDS"}, {"domain_label", "System"}, {"range_label", "System"},
                       {"quality_score", 0.9}}})}}},
      {"chunks",
       {{"d#c0000",
         {{"candidates", json::array({{{"name", "Alpha system"},
                                       {"entity_type", "System"},
                                       {"description", "parser component"},
                                       {"aliases", json::array({"Alpha"})},
                                       {"evidence", "Alpha system parses text"},
                                       {"certainty", 0.9}}})},
          {"summary", "introduced the alpha system"}}},
        {"d#c0001",
         {{"candidates", json::array({{{"name", "Beta engine"},
                                       {"entity_type", "System"},
                                       {"evidence", "Beta engine plans routes"},
                                       {"certainty", 0.8}},
                                      {{"name", "Alpha"},  // alias of the existing entity
                                       {"entity_type", "System"},
                                       {"description", "also feeds beta"},
                                       {"evidence", "Alpha system feeds Beta engine"}}})},
          {"relations", json::array({{{"head", "Alpha system"},
                                      {"relation_type", "FEEDS"},
                                      {"tail", "Beta engine"},
                                      {"evidence", "Alpha system feeds Beta engine"},
                                      {"certainty", 0.9}},
                                     {{"head", "Beta engine"},
                                      {"relation_type", "PLANS_WITH"},  // not in the schema
                                      {"tail", "Alpha system"},
                                      {"evidence", "Beta engine plans routes"},
                                      {"certainty", 0.7}}})},
          {"summary", "linked alpha to beta"}}},
        {"d#c0002",
         {{"candidates", json::array({{{"name", "Gamma store"},
                                       {"entity_type", "System"},
                                       {"evidence", "Gamma store saves results"}}})},
          {"relations", json::array({{{"head", "Gamma store"},
                                      {"relation_type", "STORES_FOR"},
                                      {"tail", "Delta missing"},  // unresolved endpoint
                                      {"evidence", "Gamma store saves results"}}})},
          {"summary", "gamma stores results"}}}}}};
}

struct SessionRig {
  Stores stores{32};
  vec::NgramEmbedder embedder{32};
  fs::path run_dir;

  explicit SessionRig(const std::string& name, const std::string& body = kBody) {
    run_dir = fs::temp_directory_path() / ("kgfuse_agent_" + name);
    fs::remove_all(run_dir);
    fs::create_directories(run_dir);
    if (!body.empty()) {
      corpus::Document doc{"d", "Mini Doc", body, ""};
      stores.docs.add_document(doc, scope);
      stores.docs.add_chunks(corpus::chunk_document(doc, {corpus::ChunkStrategy::Paragraph, 800, 0}),
                             scope);
    }
  }

  AgentConfig config() {
    AgentConfig cfg;
    cfg.run_dir = run_dir;
    cfg.retry.initial_backoff = std::chrono::milliseconds(0);
    return cfg;
  }
};

}  // namespace

TEST_SUITE_BEGIN("agent");

TEST_CASE("scripted session archives every chunk and matches the scripted writes") {
  SessionRig rig("basic");
  Session session(rig.stores, rig.embedder, rig.config(), scope);
  ScriptedPolicy policy(mini_fixture());
  SessionReport report = session.run(policy);

  CHECK(report.chunk_count == 3);
  CHECK(report.chunks_processed == 3);
  for (const corpus::Chunk* chunk : rig.stores.docs.chunks_of("d", scope)) {
    CHECK(chunk->state == corpus::ChunkState::Archived);
  }

  // 3 creates (Alpha system, Beta engine, Gamma store), 1 alias update
  CHECK(report.entities == 3);
  CHECK(report.relations == 2);  // FEEDS + PLANS_WITH; STORES_FOR endpoint missing
  CHECK(report.todo_remaining == 0);  // handle_todos drained the deferral
  CHECK(report.summaries.size() == 3);
  CHECK(report.summaries[0] == "introduced the alpha system");

  // schema came from the fixture and the unseen STORES_FOR evolved to PROPOSED
  CHECK(session.profile().domain_label == "systems");
  REQUIRE(session.profile().find_relation("FEEDS") != nullptr);
  const schema::RelationType* proposed = session.profile().find_relation("PLANS_WITH");
  REQUIRE(proposed != nullptr);
  CHECK(proposed->state == schema::RelationState::Proposed);

  // the alias candidate updated the existing node instead of duplicating it
  auto matches = rig.stores.graph.find("Alpha", graph::SearchType::Entity, 5, scope);
  REQUIRE(matches.size() == 1);
  CHECK(rig.stores.graph.get_entity(matches[0].id)->description == "also feeds beta");
}

TEST_CASE("empty corpus finishes immediately with zero counters") {
  SessionRig rig("empty", "");
  Session session(rig.stores, rig.embedder, rig.config(), scope);
  ScriptedPolicy policy(json{{"format", "kgfuse.script"}, {"chunks", json::object()}});
  SessionReport report = session.run(policy);
  CHECK(report.chunk_count == 0);
  CHECK(report.entities == 0);
  CHECK(report.tool_calls == 0);
}

TEST_CASE("react_loop: immediate completion verifies the chunk with zero calls") {
  SessionRig rig("immediate");
  Session session(rig.stores, rig.embedder, rig.config(), scope);

  struct CompleteNow : DecisionPolicy {
    Decision decide(const PromptContext&) override { return {true, "nothing durable", {}}; }
  } policy;

  const corpus::Chunk* chunk = rig.stores.docs.chunks_of("d", scope)[0];
  std::string summary = session.react_loop(policy, *chunk);
  CHECK(summary == "nothing durable");
  CHECK(rig.stores.docs.find_chunk(chunk->chunk_id, scope)->state == corpus::ChunkState::Verified);
  CHECK(session.tool_state().counters.tool_calls == 0);
  CHECK(rig.stores.ledger.records().empty());
}

TEST_CASE("react_loop: two creates then complete leaves two provenance records") {
  SessionRig rig("two_creates");
  Session session(rig.stores, rig.embedder, rig.config(), scope);

  struct TwoCreates : DecisionPolicy {
    int round = 0;
    Decision decide(const PromptContext& context) override {
      if (++round == 1) {
        json a{{"name", "Alpha system"}, {"entity_type", "System"},
               {"source_chunk", context.chunk_id}, {"evidence", "Alpha system parses text"}};
        json b{{"name", "Raw input stream"}, {"entity_type", "Concept"},
               {"source_chunk", context.chunk_id}, {"evidence", "raw input stream"}};
        return {false, "", {{"create_entity", a, "c1"}, {"create_entity", b, "c2"}}};
      }
      return {true, "done", {}};
    }
  } policy;

  const corpus::Chunk* chunk = rig.stores.docs.chunks_of("d", scope)[0];
  session.react_loop(policy, *chunk);
  CHECK(rig.stores.ledger.records().size() == 2);
  CHECK(rig.stores.graph.entities(scope).size() == 2);
}

TEST_CASE("react_loop halts at max_rounds with an auto-summary and review item") {
  SessionRig rig("maxrounds");
  AgentConfig cfg = rig.config();
  cfg.max_rounds = 4;
  Session session(rig.stores, rig.embedder, cfg, scope);

  struct NeverDone : DecisionPolicy {
    int calls = 0;
    Decision decide(const PromptContext&) override {
      ++calls;
      return {false, "", {{"get_progress", json::object(), "p"}}};
    }
  } policy;

  const corpus::Chunk* chunk = rig.stores.docs.chunks_of("d", scope)[0];
  std::string summary = session.react_loop(policy, *chunk);
  CHECK(policy.calls == 4);
  CHECK(summary.rfind("[auto-summary]", 0) == 0);
  REQUIRE(session.tool_state().review_queue.size() == 1);
  CHECK(session.tool_state().review_queue[0].subject == chunk->chunk_id);
  CHECK(rig.stores.docs.find_chunk(chunk->chunk_id, scope)->state == corpus::ChunkState::Verified);
}

TEST_CASE("classify_error separates transient from permanent causes") {
  CHECK(classify_error(Error(ErrorCode::Timeout, "t")) == ErrorClass::Transient);
  CHECK(classify_error(Error(ErrorCode::RateLimited, "r")) == ErrorClass::Transient);
  CHECK(classify_error(Error(ErrorCode::ConnectionLost, "c")) == ErrorClass::Transient);
  CHECK(classify_error(TransientError(ErrorCode::Internal, "wrapped")) == ErrorClass::Transient);
  CHECK(classify_error(Error(ErrorCode::SchemaViolation, "s")) == ErrorClass::Permanent);
  CHECK(classify_error(Error(ErrorCode::NotFound, "n")) == ErrorClass::Permanent);
  CHECK(classify_error(std::runtime_error("misc")) == ErrorClass::Permanent);
}

TEST_CASE("with_retry: two transient failures then success, invisible to the caller") {
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.initial_backoff = std::chrono::milliseconds(0);
  int attempts = 0;
  std::vector<std::string> log;
  json result = with_retry(
      [&]() -> json {
        if (++attempts < 3) throw TransientError(ErrorCode::Timeout, "simulated timeout");
        return json{{"ok", true}};
      },
      policy, &log);
  CHECK(result.at("ok").get<bool>());
  CHECK(attempts == 3);
  CHECK(log.size() == 2);

  // permanent errors pass straight through
  attempts = 0;
  CHECK_THROWS_AS(with_retry(
                      [&]() -> json {
                        ++attempts;
                        throw Error(ErrorCode::SchemaViolation, "bad args");
                      },
                      policy),
                  Error);
  CHECK(attempts == 1);

  // exhaustion rethrows the transient error
  attempts = 0;
  CHECK_THROWS_AS(with_retry(
                      [&]() -> json {
                        ++attempts;
                        throw TransientError(ErrorCode::Timeout, "always down");
                      },
                      policy),
                  TransientError);
  CHECK(attempts == 3);
}

TEST_CASE("assemble_prompt carries constraints, schema, memory and corrections") {
  SessionRig rig("prompt");
  Session session(rig.stores, rig.embedder, rig.config(), scope);
  ScriptedPolicy policy(mini_fixture());
  session.run(policy);

  AgentState fresh;
  fresh.doc_id = "d";
  PromptContext context = assemble_prompt(fresh, session.profile(), session.tool_state(),
                                          rig.stores.docs.chunks_of("d", scope)[0]);
  std::string text = context.to_text();
  CHECK(text.find("## READ") != std::string::npos);
  CHECK(text.find("## SEARCH") != std::string::npos);
  CHECK(text.find("## VERIFY") != std::string::npos);
  CHECK(text.find("## CONSTRUCT") != std::string::npos);
  CHECK(text.find("<active_schema>") != std::string::npos);
  CHECK(text.find("FEEDS") != std::string::npos);
  CHECK(text.find("## WORKING MEMORY") != std::string::npos);
  CHECK(text.find("## ERROR CORRECTION") == std::string::npos);

  // schema evolution shows up in the <active_schema> block
  schema::SchemaProfile evolved = session.profile();
  session.orchestrator().evolve(evolved, {"calibrated by", "", "", 1.0});
  PromptContext after = assemble_prompt(fresh, evolved, session.tool_state(), nullptr);
  CHECK(context.active_schema.find("CALIBRATED_BY") == std::string::npos);
  CHECK(after.active_schema.find("CALIBRATED_BY(PROPOSED)") != std::string::npos);

  // permanent errors inject corrective instructions
  AgentState with_error = fresh;
  with_error.error_history.push_back({ErrorClass::Permanent, "SchemaViolation: missing name"});
  PromptContext corrected = assemble_prompt(with_error, session.profile(), session.tool_state(),
                                            nullptr);
  CHECK(corrected.to_text().find("## ERROR CORRECTION") != std::string::npos);
  CHECK(corrected.to_text().find("missing name") != std::string::npos);
}

TEST_CASE("permanent tool errors reach error_history and the next prompt") {
  SessionRig rig("error_inject");
  Session session(rig.stores, rig.embedder, rig.config(), scope);

  struct BadThenDone : DecisionPolicy {
    int round = 0;
    std::string second_prompt;
    Decision decide(const PromptContext& context) override {
      if (++round == 1) {
        return {false, "", {{"create_entity", json{{"name", "X"}}, "bad"}}};  // schema violation
      }
      second_prompt = context.to_text();
      return {true, "done", {}};
    }
  } policy;

  const corpus::Chunk* chunk = rig.stores.docs.chunks_of("d", scope)[0];
  session.react_loop(policy, *chunk);
  REQUIRE(!session.state().error_history.empty());
  CHECK(session.state().error_history[0].error_class == ErrorClass::Permanent);
  CHECK(policy.second_prompt.find("## ERROR CORRECTION") != std::string::npos);
}

TEST_CASE("lifecycle: exactly one chunk READING at a time, never moving backward") {
  SessionRig rig("lifecycle");
  Session session(rig.stores, rig.embedder, rig.config(), scope);

  struct Probe : DecisionPolicy {
    corpus::DocumentStore* docs;
    bool ok = true;
    std::map<std::string, int> max_state;
    Decision decide(const PromptContext&) override {
      int reading = 0;
      for (const corpus::Chunk* chunk : docs->chunks_of("d", scope)) {
        int value = static_cast<int>(chunk->state);
        if (chunk->state == corpus::ChunkState::Reading) ++reading;
        auto it = max_state.find(chunk->chunk_id);
        if (it != max_state.end() && value < it->second) ok = false;
        max_state[chunk->chunk_id] = std::max(value, it == max_state.end() ? value : it->second);
      }
      if (reading != 1) ok = false;
      return {true, "probe done", {}};
    }
  } policy;
  policy.docs = &rig.stores.docs;

  session.run(policy);
  CHECK(policy.ok);
}

TEST_CASE("checkpoint save/load round-trips the agent state") {
  Checkpoint checkpoint;
  checkpoint.session_id = "sess1";
  checkpoint.state.session_id = "sess1";
  checkpoint.state.doc_id = "d";
  checkpoint.state.paragraph_index = 2;
  checkpoint.state.recent_observations = {json{{"tool", "search_kg"}, {"ok", true}}};
  checkpoint.state.recent_entities = {"Alpha system"};
  checkpoint.state.error_history.push_back({ErrorClass::Permanent, "boom"});
  checkpoint.todo_queue.push_back({"verify alpha", "verify", "Alpha system", 2});
  checkpoint.review_queue.push_back({"d#c0001", "unclear", 1});
  checkpoint.counters.merges = 3;
  checkpoint.counters.tool_calls = 17;
  checkpoint.schema_version = 4;
  checkpoint.schema_domain = "systems";

  fs::path dir = fs::temp_directory_path() / "kgfuse_agent_ckpt";
  fs::create_directories(dir);
  checkpoint.save(dir / "checkpoint.json");
  auto loaded = Checkpoint::load(dir / "checkpoint.json");
  REQUIRE(loaded.has_value());
  CHECK(loaded->state.to_json() == checkpoint.state.to_json());
  CHECK(loaded->todo_queue.size() == 1);
  CHECK(loaded->todo_queue[0].priority == 2);
  CHECK(loaded->counters.tool_calls == 17);
  CHECK(loaded->schema_version == 4);
  CHECK(!loaded->completed);
  CHECK(!Checkpoint::load(dir / "missing.json").has_value());
}

TEST_CASE("crash at a chunk boundary resumes without reprocessing and converges") {
  // uninterrupted control run
  SessionRig control("control");
  {
    Session session(control.stores, control.embedder, control.config(), scope);
    ScriptedPolicy policy(mini_fixture());
    session.run(policy);
  }

  // crash after the first archived chunk
  SessionRig crashed("crash");
  {
    Session session(crashed.stores, crashed.embedder, crashed.config(), scope);
    ScriptedPolicy policy(mini_fixture());
    SessionHooks hooks;
    hooks.after_archive = [](size_t archived) {
      if (archived == 1) throw CrashInjected("simulated crash after chunk 1");
    };
    CHECK_THROWS_AS(session.run(policy, hooks), CrashInjected);
  }

  // resume from the run directory with fresh stores
  Stores resumed(32);
  resumed.load_all(crashed.run_dir);
  vec::NgramEmbedder embedder(32);
  AgentConfig cfg;
  cfg.run_dir = crashed.run_dir;
  cfg.retry.initial_backoff = std::chrono::milliseconds(0);
  Session session(resumed, embedder, cfg, scope);
  ScriptedPolicy policy(mini_fixture());
  std::vector<std::string> started;
  SessionHooks probe;
  probe.on_chunk_start = [&](const std::string& chunk_id) { started.push_back(chunk_id); };
  SessionReport report = session.run(policy, probe);

  // chunk 1 was not reprocessed
  CHECK(std::find(started.begin(), started.end(), "d#c0000") == started.end());
  CHECK(started.size() == 2);
  CHECK(report.chunks_processed == 3);

  // identical final graph snapshots (byte-for-byte)
  control.stores.save_all(control.run_dir);
  fs::path out = fs::temp_directory_path() / "kgfuse_agent_resumed";
  fs::create_directories(out);
  resumed.save_all(out);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), {});
  };
  CHECK(slurp(control.run_dir / "graph.snapshot.jsonl") == slurp(out / "graph.snapshot.jsonl"));
  CHECK(slurp(control.run_dir / "vectors.snapshot.bin") == slurp(out / "vectors.snapshot.bin"));
  CHECK(slurp(control.run_dir / "ledger.snapshot.json") == slurp(out / "ledger.snapshot.json"));
}

TEST_CASE("require_clean_backends refuses an already-populated scope") {
  SessionRig rig("unclean");
  // pre-populate the scope
  graph::Entity spoiler;
  spoiler.name = "leftover";
  spoiler.scope = scope;
  rig.stores.graph.upsert_entity(spoiler);

  AgentConfig cfg = rig.config();
  cfg.require_clean_backends = true;
  Session session(rig.stores, rig.embedder, cfg, scope);
  ScriptedPolicy policy(mini_fixture());
  CHECK_THROWS_WITH_AS(session.run(policy), doctest::Contains("ScopeNotClean"), Error);
}

TEST_CASE("scripted policy emits create for fresh candidates and todo for unresolved endpoints") {
  SessionRig rig("policy_shapes");
  Session session(rig.stores, rig.embedder, rig.config(), scope);
  ScriptedPolicy policy(mini_fixture());
  SessionReport report = session.run(policy);

  // the unresolved STORES_FOR endpoint produced a disambiguation todo,
  // which handle_todos drained; its provenance trail lives in the ledger
  CHECK(report.todo_remaining == 0);
  bool saw_not_found = false;
  for (const auto& record : rig.stores.ledger.records()) {
    (void)record;
  }
  // the relation was never created
  for (const graph::Relation* relation : rig.stores.graph.relations(scope, true)) {
    CHECK(relation->relation_type != "STORES_FOR");
  }
  for (const graph::Entity* entity : rig.stores.graph.entities(scope)) {
    saw_not_found = saw_not_found || entity->name == "Delta missing";
  }
  CHECK(!saw_not_found);
}

TEST_CASE("llm policy: request layout and response parsing without a network") {
  PromptContext context;
  context.constraints = "## READ\n## SEARCH\n## VERIFY\n## CONSTRUCT\n";
  context.active_schema = "<active_schema>\ndomain: x\n</active_schema>\n";
  context.working_memory = "## WORKING MEMORY\n";
  context.paragraph_text = "Alpha system parses text.";
  context.chunk_id = "d#c0000";

  LlmPolicyConfig config;
  json request = HttpChatPolicy::build_request(context, config);
  CHECK(request.at("model") == "deepseek-v4-flash");
  CHECK(request.at("temperature") == doctest::Approx(0.3));
  CHECK(request.at("tools").size() == 16);
  CHECK(request.at("messages")[0].at("role") == "system");
  CHECK(request.at("messages")[0].at("content").get<std::string>().find("## READ") !=
        std::string::npos);

  // tool-call response
  json tool_response{
      {"choices",
       json::array(
           {{{"message",
              {{"tool_calls",
                json::array({{{"id", "call1"},
                              {"function",
                               {{"name", "search_kg"},
                                {"arguments", "{\"query\":\"alpha\",\"search_type\":\"fuzzy\"}"}}}}})}}}}})}};
  HttpChatPolicy policy(config, [&](const json&) { return tool_response; });
  Decision decision = policy.decide(context);
  CHECK(!decision.chunk_complete);
  REQUIRE(decision.tool_calls.size() == 1);
  CHECK(decision.tool_calls[0].tool_name == "search_kg");
  CHECK(decision.tool_calls[0].args.at("query") == "alpha");

  // completion response
  json done{{"choices",
             json::array({{{"message",
                            {{"content",
                              "{\"chunk_complete\": true, \"summary\": \"all done\"}"}}}}})}};
  HttpChatPolicy completing(config, [&](const json&) { return done; });
  Decision final_decision = completing.decide(context);
  CHECK(final_decision.chunk_complete);
  CHECK(final_decision.summary == "all done");
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("agent");

TEST_CASE("policy isolation: the llm adapter drives a session unchanged") {
  // swapping scripted <-> LLM policy touches nothing outside DecisionPolicy
  SessionRig rig("llm_session");
  Session session(rig.stores, rig.embedder, rig.config(), scope);

  // canned transport: first call emits a create_entity tool call, every
  // later call completes the paragraph
  int calls = 0;
  LlmPolicyConfig config;
  HttpChatPolicy policy(config, [&](const json& request) -> json {
    REQUIRE(request.contains("tools"));
    if (++calls == 1) {
      json args{{"name", "Alpha system"},
                {"entity_type", "System"},
                {"source_chunk", "d#c0000"},
                {"evidence", "Alpha system parses text"}};
      return json{{"choices",
                   json::array({{{"message",
                                  {{"tool_calls",
                                    json::array({{{"id", "t1"},
                                                  {"function",
                                                   {{"name", "create_entity"},
                                                    {"arguments", args.dump()}}}}})}}}}})}};
    }
    return json{{"choices",
                 json::array({{{"message",
                                {{"content",
                                  "{\"chunk_complete\": true, \"summary\": \"done\"}"}}}}})}};
  });

  SessionReport report = session.run(policy);
  CHECK(report.chunks_processed == 3);
  CHECK(report.entities == 1);
  CHECK(rig.stores.graph.find("Alpha system", graph::SearchType::Entity, 1, scope).size() == 1);
}

TEST_CASE("llm adapter speaks http to a live endpoint") {
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    json request = json::parse(req.body);
    REQUIRE(request.at("model") == "deepseek-v4-flash");
    json reply{{"choices",
                json::array({{{"message",
                               {{"content",
                                 "{\"chunk_complete\": true, \"summary\": \"over http\"}"}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  LlmPolicyConfig config;
  config.host = "127.0.0.1";
  config.port = port;
  HttpChatPolicy policy(config);  // real transport
  PromptContext context;
  context.paragraph_text = "text";
  context.chunk_id = "d#c0000";
  Decision decision = policy.decide(context);
  CHECK(decision.chunk_complete);
  CHECK(decision.summary == "over http");

  server.stop();
  server_thread.join();

  // unreachable endpoint surfaces as a transient failure for the retry layer
  LlmPolicyConfig dead = config;
  dead.port = 1;  // nothing listens there
  dead.llm_timeout = std::chrono::seconds(2);
  HttpChatPolicy unreachable(dead);
  CHECK_THROWS_AS(unreachable.decide(context), TransientError);
}

TEST_SUITE_END();

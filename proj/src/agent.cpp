#include "kgfuse/agent.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "kgfuse/errors.hpp"
#include "kgfuse/utf8.hpp"

namespace kgfuse::agent {

using json = nlohmann::json;

const char* to_string(ErrorClass c) {
  return c == ErrorClass::Transient ? "TRANSIENT" : "PERMANENT";
}

ErrorClass classify_error(const std::exception& e) {
  if (dynamic_cast<const TransientError*>(&e)) return ErrorClass::Transient;
  if (const Error* error = dynamic_cast<const Error*>(&e)) {
    switch (error->code()) {
      case ErrorCode::Timeout:
      case ErrorCode::RateLimited:
      case ErrorCode::ConnectionLost:
        return ErrorClass::Transient;
      default:
        return ErrorClass::Permanent;
    }
  }
  return ErrorClass::Permanent;
}

json with_retry(const std::function<json()>& fn, const RetryPolicy& policy,
                std::vector<std::string>* retry_log) {
  std::chrono::milliseconds backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const std::exception& e) {
      if (classify_error(e) != ErrorClass::Transient || attempt >= policy.max_attempts) throw;
      if (retry_log) {
        retry_log->push_back("attempt " + std::to_string(attempt) + " transient: " + e.what());
      }
      if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
  }
}

// ---------------------------------------------------------------------------
// AgentState / Checkpoint serialization
// ---------------------------------------------------------------------------

json AgentState::to_json() const {
  json errors = json::array();
  for (const auto& event : error_history) {
    errors.push_back({{"class", agent::to_string(event.error_class)}, {"message", event.message}});
  }
  return json{{"session_id", session_id},
              {"doc_id", doc_id},
              {"paragraph_index", paragraph_index},
              {"current_chunk_id", current_chunk_id},
              {"recent_observations", recent_observations},
              {"summarized_observations", summarized_observations},
              {"recent_entities", recent_entities},
              {"error_history", errors},
              {"round", round}};
}

AgentState AgentState::from_json(const json& j) {
  AgentState state;
  state.session_id = j.at("session_id").get<std::string>();
  state.doc_id = j.at("doc_id").get<std::string>();
  state.paragraph_index = j.at("paragraph_index").get<size_t>();
  state.current_chunk_id = j.at("current_chunk_id").get<std::string>();
  state.recent_observations = j.at("recent_observations").get<std::vector<json>>();
  state.summarized_observations = j.at("summarized_observations").get<size_t>();
  state.recent_entities = j.at("recent_entities").get<std::vector<std::string>>();
  for (const json& e : j.at("error_history")) {
    state.error_history.push_back(
        {e.at("class") == "TRANSIENT" ? ErrorClass::Transient : ErrorClass::Permanent,
         e.at("message").get<std::string>()});
  }
  state.round = j.at("round").get<size_t>();
  return state;
}

void Checkpoint::save(const std::filesystem::path& file) const {
  json todos = json::array();
  for (const auto& item : todo_queue) todos.push_back(toolkit::to_json(item));
  json reviews = json::array();
  for (const auto& item : review_queue) reviews.push_back(toolkit::to_json(item));
  json root{{"format", "kgfuse.checkpoint"},
            {"version", kFormatVersion},
            {"session_id", session_id},
            {"agent_state", state.to_json()},
            {"todo_queue", todos},
            {"review_queue", reviews},
            {"counters",
             {{"merges", counters.merges},
              {"tool_calls", counters.tool_calls},
              {"creates", counters.creates},
              {"updates", counters.updates},
              {"deletes", counters.deletes}}},
            {"schema_version", schema_version},
            {"schema_domain", schema_domain},
            {"completed", completed}};

  std::filesystem::path temp = file;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnreadableFile, temp.string());
    out << root.dump(2) << "\n";
  }
  std::filesystem::rename(temp, file);
}

std::optional<Checkpoint> Checkpoint::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  json root = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded() || root.value("format", "") != "kgfuse.checkpoint") return std::nullopt;
  if (root.value("version", 0) != kFormatVersion) return std::nullopt;

  Checkpoint checkpoint;
  checkpoint.session_id = root.at("session_id").get<std::string>();
  checkpoint.state = AgentState::from_json(root.at("agent_state"));
  for (const json& t : root.at("todo_queue")) checkpoint.todo_queue.push_back(toolkit::todo_from_json(t));
  for (const json& r : root.at("review_queue")) {
    checkpoint.review_queue.push_back(toolkit::review_from_json(r));
  }
  const json& counters = root.at("counters");
  checkpoint.counters.merges = counters.at("merges").get<size_t>();
  checkpoint.counters.tool_calls = counters.at("tool_calls").get<size_t>();
  checkpoint.counters.creates = counters.at("creates").get<size_t>();
  checkpoint.counters.updates = counters.at("updates").get<size_t>();
  checkpoint.counters.deletes = counters.at("deletes").get<size_t>();
  checkpoint.schema_version = root.at("schema_version").get<uint64_t>();
  checkpoint.schema_domain = root.at("schema_domain").get<std::string>();
  checkpoint.completed = root.at("completed").get<bool>();
  return checkpoint;
}

// ---------------------------------------------------------------------------
// Stores snapshot bundle
// ---------------------------------------------------------------------------

void Stores::save_all(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  graph.save(dir / "graph.snapshot.jsonl");
  vectors.save(dir / "vectors.snapshot.bin");
  docs.save(dir / "docstore.snapshot.json");
  ledger.save(dir / "ledger.snapshot.json");
}

void Stores::load_all(const std::filesystem::path& dir) {
  graph.load(dir / "graph.snapshot.jsonl");
  vectors.load(dir / "vectors.snapshot.bin");
  docs.load(dir / "docstore.snapshot.json");
  ledger.load(dir / "ledger.snapshot.json");
}

bool Stores::snapshots_exist(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "graph.snapshot.jsonl") &&
         std::filesystem::exists(dir / "vectors.snapshot.bin") &&
         std::filesystem::exists(dir / "docstore.snapshot.json") &&
         std::filesystem::exists(dir / "ledger.snapshot.json");
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kConstraints =
    "## READ\n"
    "Identify durable knowledge objects in the current paragraph (methods, systems, datasets, "
    "metrics, named entities). Ignore table-of-contents lines, boilerplate, transient narrative "
    "and parsing noise. If the paragraph holds nothing durable, return chunk_complete with a "
    "short summary and no writes.\n"
    "## SEARCH\n"
    "Before any create, check the existing graph with search_kg, browse_context or "
    "explore_fusion. The goal is to avoid duplicate entities and to gather evidence for "
    "cross-paragraph relations.\n"
    "## VERIFY\n"
    "Decide per candidate: create when evidence is clear and nothing matches; update when an "
    "existing object needs supplementation; merge when search results show duplicates; "
    "mark_for_review when uncertain; create_todo when context is insufficient.\n"
    "## CONSTRUCT\n"
    "Submit entity operations before the relations that depend on them. Every write must cite a "
    "verbatim evidence snippet from its source chunk. React to tool failures by searching, "
    "switching to update, creating a todo, or abandoning the candidate.\n";

std::string truncate_text(const std::string& text, size_t max_cp) {
  auto offsets = utf8::code_point_offsets(text);
  if (offsets.size() - 1 <= max_cp) return text;
  return text.substr(0, offsets[max_cp]) + "…";
}

}  // namespace

PromptContext assemble_prompt(const AgentState& state, const schema::SchemaProfile& profile,
                              const toolkit::ToolState& tool_state, const corpus::Chunk* current,
                              size_t observation_bound) {
  PromptContext context;
  context.constraints = kConstraints;

  // <active_schema>: domain, relation types, entity labels, attribute patterns
  std::string schema_block = "<active_schema>\n";
  schema_block += "domain: " + profile.domain_label + "\n";
  schema_block += "relation_types:";
  for (const auto& relation : profile.relation_types) {
    schema_block += " " + relation.name +
                    (relation.state == schema::RelationState::Proposed ? "(PROPOSED)" : "");
  }
  schema_block += "\nentity_labels:";
  for (const auto& label : profile.entity_labels) schema_block += " " + label;
  schema_block += "\nattribute_patterns:";
  for (const auto& pattern : profile.attribute_patterns) schema_block += " " + pattern;
  schema_block += "\nversion: " + std::to_string(profile.version) + "\n</active_schema>\n";
  context.active_schema = schema_block;

  // working memory: progress, known entities, observations, todo summary
  std::string memory = "## WORKING MEMORY\n";
  memory += "progress: paragraph " + std::to_string(state.paragraph_index) + " of " +
            std::to_string(tool_state.paragraph_total) + " (doc " + state.doc_id + ")\n";
  memory += "recent_entities:";
  for (const auto& name : state.recent_entities) memory += " " + name;
  memory += "\n";
  if (state.summarized_observations > 0) {
    memory += "[" + std::to_string(state.summarized_observations) +
              " earlier observations summarized]\n";
  }
  size_t shown = std::min(observation_bound, state.recent_observations.size());
  for (size_t i = state.recent_observations.size() - shown; i < state.recent_observations.size();
       ++i) {
    memory += "observation: " + truncate_text(state.recent_observations[i].dump(), 200) + "\n";
  }
  memory += "todo_queue: " + std::to_string(tool_state.todo_queue.size()) + " pending";
  for (size_t i = 0; i < tool_state.todo_queue.size() && i < 3; ++i) {
    memory += " | " + tool_state.todo_queue[i].todo_type + ": " +
              truncate_text(tool_state.todo_queue[i].task, 60);
  }
  memory += "\n";
  context.working_memory = memory;

  if (!state.error_history.empty()) {
    std::string corrections = "## ERROR CORRECTION\n";
    size_t start = state.error_history.size() > 3 ? state.error_history.size() - 3 : 0;
    for (size_t i = start; i < state.error_history.size(); ++i) {
      corrections += std::string(to_string(state.error_history[i].error_class)) + ": " +
                     truncate_text(state.error_history[i].message, 160) + "\n";
    }
    corrections +=
        "Adjust the failing call: fix arguments, search before creating, or defer with a todo.\n";
    context.error_corrections = corrections;
  }

  if (current) {
    context.paragraph_text = truncate_text(current->text, 4000);
    context.chunk_id = current->chunk_id;
  }
  context.observations = &state.recent_observations;
  return context;
}

std::string PromptContext::to_text() const {
  std::string text = constraints + "\n" + active_schema + "\n" + working_memory;
  if (!error_corrections.empty()) text += "\n" + error_corrections;
  if (todo) {
    text += "\n## TODO\n" + todo->todo_type + ": " + todo->task + "\n";
  }
  if (!paragraph_text.empty()) {
    text += "\n## CURRENT PARAGRAPH (" + chunk_id + ")\n" + paragraph_text + "\n";
  }
  return text;
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

json SessionReport::to_json() const {
  json reviews = json::array();
  for (const auto& item : review_queue) reviews.push_back(toolkit::to_json(item));
  return json{{"format", "kgfuse.report"},
              {"version", 1},
              {"session_id", session_id},
              {"chunk_count", chunk_count},
              {"chunks_processed", chunks_processed},
              {"entities", entities},
              {"relations", relations},
              {"merges", merges},
              {"tool_calls", tool_calls},
              {"alerts", alerts},
              {"todo_remaining", todo_remaining},
              {"review_queue", reviews},
              {"summaries", summaries}};
}

Session::Session(Stores& stores, vec::EmbeddingProvider& embedder, AgentConfig config,
                 IsolationScope scope)
    : stores_(stores), embedder_(embedder), config_(std::move(config)), scope_(std::move(scope)),
      orchestrator_(embedder) {
  sync_ = std::make_unique<sync::SyncCoordinator>(stores_.graph, stores_.vectors, embedder_,
                                                  stores_.ledger);
  profile_ = schema::SchemaOrchestrator::fallback_profile();
  kit_ = std::make_unique<toolkit::Toolkit>(stores_.graph, stores_.vectors, stores_.docs,
                                            stores_.ledger, *sync_, embedder_, &profile_,
                                            &orchestrator_);
  tool_state_.scope = scope_;
  state_.session_id = scope_.run_id;
}

void Session::bootstrap_schema(DecisionPolicy& policy) {
  std::filesystem::path schema_file = config_.run_dir / "schema.json";
  if (std::filesystem::exists(schema_file)) {
    std::ifstream in(schema_file);
    profile_ = schema::SchemaProfile::from_json(json::parse(in));
    return;
  }
  std::vector<corpus::Document> docs;
  for (const auto& doc_id : stores_.docs.doc_ids(scope_)) {
    docs.push_back(*stores_.docs.find_document(doc_id, scope_));
  }
  profile_ = orchestrator_.bootstrap(
      docs, [&policy](const std::vector<std::string>& samples) {
        return policy.propose_schema(samples);
      });
  if (!config_.run_dir.empty()) {
    std::filesystem::create_directories(config_.run_dir);
    std::ofstream out(schema_file);
    out << profile_.to_json().dump(2) << "\n";
  }
}

json Session::dispatch_with_retry(const toolkit::ToolCall& call) {
  std::vector<std::string> retry_log;
  try {
    return with_retry([&]() { return kit_->dispatch(call, tool_state_); }, config_.retry,
                      &retry_log);
  } catch (const std::exception& e) {
    // retries exhausted or non-retryable: surface as an error observation
    state_.error_history.push_back({classify_error(e), e.what()});
    return json{{"tool", call.tool_name},
                {"call_id", call.call_id},
                {"ok", false},
                {"error", {{"code", "Exhausted"}, {"message", e.what()}}}};
  }
}

void Session::note_observation(const json& observation) {
  state_.recent_observations.push_back(observation);
  if (state_.recent_observations.size() > config_.observation_bound) {
    state_.recent_observations.erase(state_.recent_observations.begin());
    state_.summarized_observations += 1;
  }
  if (observation.value("ok", false)) {
    const json& result = observation.at("result");
    if (result.contains("entity_id") && result.contains("status")) {
      std::string status = result.at("status").get<std::string>();
      if (status == "created" || status == "reused") {
        const graph::Entity* entity =
            stores_.graph.get_entity(result.at("entity_id").get<std::string>());
        if (entity) {
          state_.recent_entities.push_back(entity->name);
          if (state_.recent_entities.size() > 10) state_.recent_entities.erase(state_.recent_entities.begin());
        }
      }
    }
  } else if (observation.contains("error")) {
    std::string code = observation.at("error").value("code", "");
    if (code != "Exhausted") {  // exhausted retries were already recorded
      state_.error_history.push_back({ErrorClass::Permanent,
                                      observation.at("error").value("message", code)});
    }
  }
}

std::string Session::react_loop(DecisionPolicy& policy, const corpus::Chunk& chunk) {
  stores_.docs.set_chunk_state(chunk.chunk_id, corpus::ChunkState::Reading, scope_);
  tool_state_.current_chunk = stores_.docs.find_chunk(chunk.chunk_id, scope_);
  tool_state_.current_doc_id = chunk.doc_id;
  state_.current_chunk_id = chunk.chunk_id;
  state_.round = 0;

  std::string summary;
  bool completed = false;
  while (state_.round < config_.max_rounds) {
    state_.round += 1;
    PromptContext context = assemble_prompt(state_, profile_, tool_state_,
                                            tool_state_.current_chunk, config_.observation_bound);
    Decision decision = policy.decide(context);
    if (decision.chunk_complete) {
      summary = decision.summary;
      completed = true;
      break;
    }
    for (const auto& call : decision.tool_calls) {
      json observation = dispatch_with_retry(call);
      note_observation(observation);
    }
  }
  if (!completed) {
    // forced completion with a fixed-format auto-summary and a review item
    summary = "[auto-summary] round limit reached on " + chunk.chunk_id +
              "; paragraph closed without an explicit completion";
    tool_state_.review_queue.push_back(
        {chunk.chunk_id, "react loop hit max_rounds without chunk_complete", 1});
  }
  stores_.docs.set_chunk_state(chunk.chunk_id, corpus::ChunkState::Verified, scope_);
  return summary;
}

void Session::handle_todos(DecisionPolicy& policy) {
  if (tool_state_.todo_queue.empty()) return;
  std::stable_sort(tool_state_.todo_queue.begin(), tool_state_.todo_queue.end(),
                   [](const toolkit::TodoItem& a, const toolkit::TodoItem& b) {
                     return a.priority > b.priority;
                   });
  std::vector<toolkit::TodoItem> pending = std::move(tool_state_.todo_queue);
  tool_state_.todo_queue.clear();
  for (const auto& todo : pending) {
    PromptContext context = assemble_prompt(state_, profile_, tool_state_, nullptr,
                                            config_.observation_bound);
    context.phase = "handle_todos";
    context.todo = &todo;
    Decision decision = policy.handle_todo(todo, context);
    for (const auto& call : decision.tool_calls) {
      json observation = dispatch_with_retry(call);
      note_observation(observation);
    }
    if (!decision.chunk_complete) {
      tool_state_.todo_queue.push_back(todo);  // explicitly kept open
    }
  }
}

void Session::save_checkpoint(bool completed) {
  if (config_.run_dir.empty()) return;
  std::filesystem::create_directories(config_.run_dir);
  Checkpoint checkpoint;
  checkpoint.session_id = state_.session_id;
  checkpoint.state = state_;
  checkpoint.todo_queue = tool_state_.todo_queue;
  checkpoint.review_queue = tool_state_.review_queue;
  checkpoint.counters = tool_state_.counters;
  checkpoint.schema_version = profile_.version;
  checkpoint.schema_domain = profile_.domain_label;
  checkpoint.completed = completed;
  checkpoint.save(config_.run_dir / "checkpoint.json");
  stores_.save_all(config_.run_dir);
}

SessionReport Session::run(DecisionPolicy& policy, const SessionHooks& hooks) {
  // recovery: resume from the checkpoint when one exists
  bool resuming = false;
  if (!config_.run_dir.empty()) {
    if (auto checkpoint = Checkpoint::load(config_.run_dir / "checkpoint.json")) {
      state_ = checkpoint->state;
      tool_state_.todo_queue = checkpoint->todo_queue;
      tool_state_.review_queue = checkpoint->review_queue;
      tool_state_.counters = checkpoint->counters;
      resuming = true;
    }
  }
  if (!resuming && config_.require_clean_backends &&
      (stores_.graph.object_count(scope_) > 0 || stores_.vectors.count(scope_) > 0)) {
    throw Error(ErrorCode::ScopeNotClean,
                "scope '" + scope_.run_id + "' already populated; refusing to build");
  }

  bootstrap_schema(policy);

  std::vector<const corpus::Chunk*> chunks;
  for (const auto& doc_id : stores_.docs.doc_ids(scope_)) {
    for (const corpus::Chunk* chunk : stores_.docs.chunks_of(doc_id, scope_)) {
      chunks.push_back(chunk);
    }
  }
  tool_state_.paragraph_total = chunks.size();

  size_t archived = 0;
  for (const corpus::Chunk* chunk : chunks) {
    if (chunk->state == corpus::ChunkState::Archived) {
      ++archived;
      continue;
    }
    if (hooks.on_chunk_start) hooks.on_chunk_start(chunk->chunk_id);
    state_.doc_id = chunk->doc_id;
    state_.paragraph_index = chunk->index;
    tool_state_.paragraph_index = chunk->index;

    // read_paragraph -> react_loop -> next_paragraph
    std::string summary = react_loop(policy, *chunk);
    summaries_.push_back(summary);

    // chunk synchronization: document node, HyperNode, evidence bridges and
    // the chunk vector, with the entities this paragraph's writes cited
    std::set<std::string> mentioned;
    for (const auto& record : stores_.ledger.records()) {
      if (record.source_chunk_id != chunk->chunk_id) continue;
      if (record.object_kind != "entity") continue;
      const graph::Entity* entity = stores_.graph.get_entity(record.object_id);
      if (entity && !entity->deleted) mentioned.insert(record.object_id);
    }
    const corpus::Document* doc = stores_.docs.find_document(chunk->doc_id, scope_);
    sync_->sync_chunk(*chunk, {mentioned.begin(), mentioned.end()}, scope_,
                      doc ? doc->title : "");

    stores_.docs.set_chunk_state(chunk->chunk_id, corpus::ChunkState::Archived, scope_);
    ++archived;
    save_checkpoint(false);
    if (hooks.after_archive) hooks.after_archive(archived);

    if (!tool_state_.todo_queue.empty()) handle_todos(policy);
  }

  // finish: aggregate statistics
  SessionReport report;
  report.session_id = state_.session_id;
  report.chunk_count = chunks.size();
  report.chunks_processed = archived;
  report.entities = stores_.graph.entities(scope_).size();
  report.relations = stores_.graph.relations(scope_).size();
  report.merges = tool_state_.counters.merges;
  report.tool_calls = tool_state_.counters.tool_calls;
  report.alerts = stores_.ledger.alerts().size();
  report.todo_remaining = tool_state_.todo_queue.size();
  report.review_queue = tool_state_.review_queue;
  report.summaries = summaries_;
  save_checkpoint(true);
  if (!config_.run_dir.empty()) {
    std::ofstream out(config_.run_dir / "report.json");
    out << report.to_json().dump(2) << "\n";
    orchestrator_.export_ledger(config_.run_dir / "schema_ledger.jsonl");
  }
  return report;
}

}  // namespace kgfuse::agent

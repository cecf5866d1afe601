#include "kgfuse/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgfuse/agent.hpp"
#include "kgfuse/errors.hpp"
#include "kgfuse/evalkit.hpp"
#include "kgfuse/llm_policy.hpp"
#include "kgfuse/retrieval.hpp"
#include "kgfuse/scripted_policy.hpp"

namespace kgfuse::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// flags > env > config file > defaults
struct RunConfig {
  std::string workdir = ".";
  std::string run_id = "run1";
  std::string tenant = "default";
  std::string dataset = "";

  std::string strategy = "STRUCTURAL";
  size_t chunk_size = 800;
  size_t chunk_overlap = 0;

  std::string mode = "fusion";
  size_t top_k = 8;
  size_t k1 = 100;
  size_t hops = 2;
  double rrf_k = 60.0;
  size_t kg_timeout_ms = 2000;

  size_t embedding_dim = 64;
  size_t max_rounds = 12;
  int retry_attempts = 3;
  long llm_timeout_s = 120;
  long llm_total_timeout_s = 240;
  bool require_clean_backends = false;
  bool resume = false;

  std::string policy_fixture;
  std::string llm_endpoint;  // host:port

  fs::path run_dir() const { return fs::path(workdir) / "runs" / run_id; }
  IsolationScope scope() const { return {tenant, run_id, dataset, ""}; }
};

void apply_env(RunConfig& config) {
  if (const char* v = std::getenv("LLM_TIMEOUT")) config.llm_timeout_s = std::atol(v);
  if (const char* v = std::getenv("LLM_TOTAL_TIMEOUT")) config.llm_total_timeout_s = std::atol(v);
  if (const char* v = std::getenv("EMBEDDING_DIM")) {
    config.embedding_dim = static_cast<size_t>(std::atol(v));
  }
}

void apply_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifacts, "config file '" + path + "'");
  json j = json::parse(in);
  config.workdir = j.value("workdir", config.workdir);
  config.run_id = j.value("run_id", config.run_id);
  config.tenant = j.value("tenant", config.tenant);
  config.dataset = j.value("dataset", config.dataset);
  if (j.contains("chunker")) {
    const json& c = j["chunker"];
    config.strategy = c.value("strategy", config.strategy);
    config.chunk_size = c.value("chunk_size", config.chunk_size);
    config.chunk_overlap = c.value("chunk_overlap", config.chunk_overlap);
  }
  if (j.contains("retrieval")) {
    const json& r = j["retrieval"];
    config.mode = r.value("mode", config.mode);
    config.top_k = r.value("top_k", config.top_k);
    config.k1 = r.value("k1", config.k1);
    config.hops = r.value("hops", config.hops);
    config.rrf_k = r.value("rrf_k", config.rrf_k);
    config.kg_timeout_ms = r.value("kg_timeout_ms", config.kg_timeout_ms);
  }
  config.embedding_dim = j.value("embedding_dim", config.embedding_dim);
  config.max_rounds = j.value("max_rounds", config.max_rounds);
  config.retry_attempts = j.value("retry_attempts", config.retry_attempts);
  config.policy_fixture = j.value("policy_fixture", config.policy_fixture);
  config.llm_endpoint = j.value("llm_endpoint", config.llm_endpoint);
}

void write_lines(const fs::path& file, const json& header, const std::vector<json>& lines) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << header.dump() << "\n";
  for (const json& line : lines) out << line.dump() << "\n";
}

int error_exit(const Error& e) {
  std::cerr << json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump()
            << "\n";
  switch (e.code()) {
    case ErrorCode::ScopeNotClean: return 4;
    case ErrorCode::MissingArtifacts: return 5;
    case ErrorCode::InvalidConfig: return 2;
    default: return 1;
  }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& config, const std::string& manifest) {
  auto docs = corpus::load_corpus(manifest);
  corpus::ChunkerConfig chunker{corpus::strategy_from_string(config.strategy), config.chunk_size,
                                config.chunk_overlap};
  corpus::DocumentStore store;
  IsolationScope scope = config.scope();

  std::vector<json> chunk_lines;
  size_t chunk_count = 0;
  for (const auto& doc : docs) {
    store.add_document(doc, scope);
    auto chunks = corpus::chunk_document(doc, chunker);
    store.add_chunks(chunks, scope);
    for (const auto& chunk : chunks) {
      chunk_lines.push_back(json{{"chunk_id", chunk.chunk_id},
                                 {"doc_id", chunk.doc_id},
                                 {"index", chunk.index},
                                 {"pos", chunk.pos},
                                 {"struct_label", corpus::to_string(chunk.struct_label)},
                                 {"state", corpus::to_string(chunk.state)}});
      ++chunk_count;
    }
  }

  fs::create_directories(config.run_dir());
  store.save(config.run_dir() / "docstore.ingest.json");  // pristine PENDING states
  write_lines(config.run_dir() / "chunks.jsonl",
              json{{"format", "kgfuse.chunks"}, {"version", 1}, {"run_id", config.run_id}},
              chunk_lines);

  std::cout << json{{"status", "ingested"},
                    {"documents", docs.size()},
                    {"chunks", chunk_count},
                    {"run_dir", config.run_dir().string()}}
                   .dump()
            << "\n";
  return 0;
}

std::unique_ptr<agent::DecisionPolicy> make_policy(const RunConfig& config) {
  if (!config.policy_fixture.empty()) {
    return std::make_unique<agent::ScriptedPolicy>(
        agent::ScriptedPolicy::from_file(config.policy_fixture));
  }
  if (!config.llm_endpoint.empty()) {
    agent::LlmPolicyConfig llm;
    auto colon = config.llm_endpoint.rfind(':');
    llm.host = config.llm_endpoint.substr(0, colon);
    if (colon != std::string::npos) llm.port = std::atoi(config.llm_endpoint.c_str() + colon + 1);
    llm.llm_timeout = std::chrono::seconds(config.llm_timeout_s);
    llm.llm_total_timeout = std::chrono::seconds(config.llm_total_timeout_s);
    return std::make_unique<agent::HttpChatPolicy>(llm);
  }
  throw Error(ErrorCode::InvalidConfig, "build needs --policy-fixture or --llm-endpoint");
}

int cmd_build(const RunConfig& config) {
  fs::path run_dir = config.run_dir();
  if (!fs::exists(run_dir / "docstore.ingest.json")) {
    throw Error(ErrorCode::MissingArtifacts, "no ingest artifacts under " + run_dir.string());
  }

  agent::Stores stores(config.embedding_dim);
  if (config.resume && agent::Stores::snapshots_exist(run_dir)) {
    stores.load_all(run_dir);
  } else {
    if (config.require_clean_backends && fs::exists(run_dir / "graph.snapshot.jsonl")) {
      graph::GraphStore persisted;
      persisted.load(run_dir / "graph.snapshot.jsonl");
      if (persisted.object_count(config.scope()) > 0) {
        throw Error(ErrorCode::ScopeNotClean,
                    "scope '" + config.run_id + "' already populated; pick a fresh run_id");
      }
    }
    stores.docs.load(run_dir / "docstore.ingest.json");
  }

  vec::NgramEmbedder embedder(config.embedding_dim);
  agent::AgentConfig agent_config;
  agent_config.run_dir = run_dir;
  agent_config.max_rounds = config.max_rounds;
  agent_config.retry.max_attempts = config.retry_attempts;
  agent_config.require_clean_backends = config.require_clean_backends;
  agent_config.embedding_dim = config.embedding_dim;
  if (!config.resume) {
    // a fresh build must not silently continue an old session
    fs::remove(run_dir / "checkpoint.json");
  }

  auto policy = make_policy(config);
  agent::Session session(stores, embedder, agent_config, config.scope());
  agent::SessionReport report = session.run(*policy);

  stores.ledger.export_records(run_dir / "provenance.jsonl");
  stores.ledger.export_alerts(run_dir / "alerts.jsonl");

  std::cout << report.to_json().dump() << "\n";
  return 0;
}

json candidate_to_json(const retrieval::RetrievalCandidate& candidate) {
  return json{{"object_id", candidate.object_id},
              {"rank_vec",
               candidate.rank_vec == retrieval::kMiss ? json(nullptr) : json(candidate.rank_vec)},
              {"rank_kg",
               candidate.rank_kg == retrieval::kMiss ? json(nullptr) : json(candidate.rank_kg)},
              {"rrf_score", candidate.rrf_score},
              {"source", candidate.source == retrieval::RetrievalCandidate::Source::Both ? "BOTH"
                         : candidate.source == retrieval::RetrievalCandidate::Source::Kg ? "KG"
                                                                                         : "VECTOR"},
              {"evidence_chunk_ids", candidate.evidence_chunk_ids}};
}

int cmd_query(const RunConfig& config, const std::string& question, const std::string& out_path,
              const std::string& questions_path, const std::string& predictions_out) {
  fs::path run_dir = config.run_dir();
  agent::Stores stores(config.embedding_dim);
  stores.load_all(run_dir);
  vec::NgramEmbedder embedder(stores.vectors.dimension());

  retrieval::RetrieverConfig retriever_config;
  retriever_config.rrf_k = config.rrf_k;
  retrieval::Retriever retriever(stores.graph, stores.vectors, embedder, &stores.ledger,
                                 retriever_config);

  auto make_request = [&](const std::string& q, retrieval::Mode mode) {
    retrieval::RetrievalRequest request;
    request.query = q;
    request.mode = mode;
    request.top_k = config.top_k;
    request.k1 = config.k1;
    request.hops = config.hops;
    request.scope = config.scope();
    request.kg_timeout = std::chrono::milliseconds(config.kg_timeout_ms);
    return request;
  };

  // batch mode: produce prediction records for a QA fixture file
  if (!questions_path.empty()) {
    auto instances = eval::load_instances(questions_path);
    std::vector<eval::PredictionRecord> predictions;
    for (const auto& instance : instances) {
      auto final_result =
          retriever.retrieve(make_request(instance.question, retrieval::mode_from_string(config.mode)));
      auto raw_result = retriever.retrieve(make_request(instance.question, retrieval::Mode::Vector));
      eval::PredictionRecord record;
      record.question_id = instance.question_id;
      record.doc_id = instance.doc_id;
      for (const auto& candidate : raw_result.candidates) {
        record.retrieved_paragraph_ids.push_back(candidate.object_id);
      }
      for (const auto& candidate : final_result.candidates) {
        record.evidence_paragraph_ids.push_back(candidate.object_id);
      }
      predictions.push_back(std::move(record));
    }
    eval::save_predictions(predictions, predictions_out.empty() ? (run_dir / "predictions.jsonl")
                                                                : fs::path(predictions_out));
    std::cout << json{{"status", "predicted"}, {"questions", predictions.size()}}.dump() << "\n";
    return 0;
  }

  auto result = retriever.retrieve(make_request(question, retrieval::mode_from_string(config.mode)));

  std::vector<json> lines;
  char row[256];
  std::snprintf(row, sizeof(row), "%-4s %-18s %8s %8s %12s %-7s", "#", "object", "rank_vec",
                "rank_kg", "rrf_score", "source");
  std::cout << row << "\n";
  for (size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& candidate = result.candidates[i];
    json line = candidate_to_json(candidate);
    line["position"] = i + 1;
    std::string text;
    if (const corpus::Chunk* chunk = stores.docs.find_chunk(candidate.object_id, config.scope())) {
      text = chunk->text.substr(0, 60);
      for (char& c : text) {
        if (c == '\n') c = ' ';
      }
      line["text_preview"] = text;
    }
    lines.push_back(line);
    std::string rank_vec = candidate.rank_vec == retrieval::kMiss
                               ? "-"
                               : std::to_string(candidate.rank_vec);
    std::string rank_kg =
        candidate.rank_kg == retrieval::kMiss ? "-" : std::to_string(candidate.rank_kg);
    std::snprintf(row, sizeof(row), "%-4zu %-18s %8s %8s %12.9f %-7s | %s", i + 1,
                  candidate.object_id.c_str(), rank_vec.c_str(), rank_kg.c_str(),
                  candidate.rrf_score,
                  candidate.source == retrieval::RetrievalCandidate::Source::Both ? "BOTH"
                  : candidate.source == retrieval::RetrievalCandidate::Source::Kg ? "KG"
                                                                                  : "VECTOR",
                  text.c_str());
    std::cout << row << "\n";
  }
  if (result.fallback) std::cout << "(kg layer degraded: vector-only fallback)\n";

  if (!out_path.empty()) {
    write_lines(out_path,
                json{{"format", "kgfuse.query"},
                     {"version", 1},
                     {"mode", to_string(result.mode)},
                     {"fallback", result.fallback},
                     {"question", question}},
                lines);
  }
  return 0;
}

int cmd_trace(const RunConfig& config, const toolkit::TraceFilter& filter,
              const std::string& out_path) {
  agent::Stores stores(config.embedding_dim);
  stores.ledger.load(config.run_dir() / "ledger.snapshot.json");
  auto records = stores.ledger.trace(filter);
  std::vector<json> lines;
  for (const auto& record : records) {
    json line = toolkit::to_json(record);
    lines.push_back(line);
    std::cout << line.dump() << "\n";
  }
  if (!out_path.empty()) {
    write_lines(out_path, json{{"format", "kgfuse.trace"}, {"version", 1}}, lines);
  }
  return 0;
}

int cmd_check(const RunConfig& config, const std::string& out_path) {
  agent::Stores stores(config.embedding_dim);
  stores.load_all(config.run_dir());
  vec::NgramEmbedder embedder(stores.vectors.dimension());
  sync::SyncCoordinator coordinator(stores.graph, stores.vectors, embedder, stores.ledger);
  sync::ConsistencyReport report = coordinator.consistency_check(config.scope());
  json j = report.to_json();
  std::cout << j.dump() << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << "\n";
  }
  return report.empty() ? 0 : 3;
}

int cmd_eval(const std::string& fixtures, const std::string& predictions,
             const std::string& out_path) {
  auto instances = eval::load_instances(fixtures);
  auto records = eval::load_predictions(predictions);
  eval::DatasetScores scores = eval::score_dataset(records, instances);
  json j = scores.to_json();
  std::cout << j.dump() << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_schemas(const std::string& out_dir) {
  json all = toolkit::Toolkit::tool_schemas();
  if (out_dir.empty()) {
    std::cout << all.dump(2) << "\n";
    return 0;
  }
  fs::create_directories(out_dir);
  for (const auto& name : toolkit::Toolkit::tool_names()) {
    std::ofstream out(fs::path(out_dir) / (name + ".schema.json"));
    out << all.at(name).dump(2) << "\n";
  }
  std::cout << json{{"status", "written"}, {"tools", toolkit::Toolkit::tool_names().size()},
                    {"dir", out_dir}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("kgfuse");
  for (const auto& arg : args) argv.push_back(arg.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"knowledge-graph construction and hybrid retrieval engine"};
  app.require_subcommand(1);

  RunConfig config;
  apply_env(config);
  std::string config_file;
  app.add_option("--config", config_file, "JSON config file (flags override it)");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--workdir", config.workdir, "working directory holding runs/");
    cmd->add_option("--run-id", config.run_id, "run isolation id");
    cmd->add_option("--tenant", config.tenant, "tenant isolation id");
    cmd->add_option("--dataset", config.dataset, "dataset isolation id");
    cmd->add_option("--embedding-dim", config.embedding_dim, "embedding dimension");
  };

  // ingest
  std::string manifest;
  CLI::App* ingest = app.add_subcommand("ingest", "load a corpus manifest and chunk documents");
  add_common(ingest);
  ingest->add_option("--manifest", manifest, "corpus manifest (jsonl)")->required();
  ingest->add_option("--strategy", config.strategy,
                     "FIXED_SIZE | SEMANTIC | PARAGRAPH | STRUCTURAL");
  ingest->add_option("--chunk-size", config.chunk_size, "chunk size in characters");
  ingest->add_option("--overlap", config.chunk_overlap, "chunk overlap in characters");

  // build
  CLI::App* build = app.add_subcommand("build", "run the agent session over ingested chunks");
  add_common(build);
  build->add_option("--policy-fixture", config.policy_fixture, "scripted policy fixture (json)");
  build->add_option("--llm-endpoint", config.llm_endpoint, "chat endpoint host:port");
  build->add_option("--max-rounds", config.max_rounds, "react loop round limit");
  build->add_option("--retry-attempts", config.retry_attempts,
                    "max attempts for transient failures");
  build->add_flag("--require-clean-backends", config.require_clean_backends,
                  "abort if the scope is already populated");
  build->add_flag("--resume", config.resume, "resume from checkpoint and snapshots");

  // query
  std::string question, query_out, questions_path, predictions_out;
  CLI::App* query = app.add_subcommand("query", "retrieve ranked evidence for a question");
  add_common(query);
  query->add_option("--question", question, "question text");
  query->add_option("--mode", config.mode, "vector | kg | fusion | deep");
  query->add_option("--top-k", config.top_k, "results to return");
  query->add_option("--k1", config.k1, "vector recall count");
  query->add_option("--hops", config.hops, "graph expansion hops");
  query->add_option("--rrf-k", config.rrf_k, "rrf smoothing constant");
  query->add_option("--kg-timeout-ms", config.kg_timeout_ms, "graph layer timeout budget");
  query->add_option("--out", query_out, "write candidates as jsonl");
  query->add_option("--questions", questions_path, "QA fixture file for batch prediction");
  query->add_option("--predictions-out", predictions_out, "prediction records output path");

  // trace
  CLI::App* trace = app.add_subcommand("trace", "query the provenance ledger");
  add_common(trace);
  std::string t_doc, t_chunk, t_object, t_op, trace_out;
  trace->add_option("--document", t_doc, "filter by document id");
  trace->add_option("--chunk", t_chunk, "filter by source chunk id");
  trace->add_option("--object", t_object, "filter by entity/relation id");
  trace->add_option("--operation", t_op, "CREATE | UPDATE | MERGE | DELETE");
  trace->add_option("--out", trace_out, "write records as jsonl");

  // check
  CLI::App* check = app.add_subcommand("check", "run the KG-vector consistency check");
  add_common(check);
  std::string check_out;
  check->add_option("--out", check_out, "write the report as json");

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against QA fixtures");
  std::string fixtures, predictions, eval_out;
  eval_cmd->add_option("--fixtures", fixtures, "QA instances (jsonl)")->required();
  eval_cmd->add_option("--predictions", predictions, "prediction records (jsonl)")->required();
  eval_cmd->add_option("--out", eval_out, "write the metric summary as json");

  // schemas
  CLI::App* schemas = app.add_subcommand("schemas", "publish machine-readable tool contracts");
  std::string schemas_out;
  schemas->add_option("--out", schemas_out, "directory for one schema file per tool");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_file.empty()) {
      RunConfig from_file;
      apply_env(from_file);
      apply_file(from_file, config_file);
      // precedence: flags > env > file > defaults; file values fill only
      // fields the parser left at their defaults
      auto merge = [&](auto& target, const auto& file_value, const auto& default_value) {
        if (target == default_value) target = file_value;
      };
      RunConfig defaults;
      apply_env(defaults);
      merge(config.workdir, from_file.workdir, defaults.workdir);
      merge(config.run_id, from_file.run_id, defaults.run_id);
      merge(config.tenant, from_file.tenant, defaults.tenant);
      merge(config.dataset, from_file.dataset, defaults.dataset);
      merge(config.strategy, from_file.strategy, defaults.strategy);
      merge(config.chunk_size, from_file.chunk_size, defaults.chunk_size);
      merge(config.chunk_overlap, from_file.chunk_overlap, defaults.chunk_overlap);
      merge(config.mode, from_file.mode, defaults.mode);
      merge(config.top_k, from_file.top_k, defaults.top_k);
      merge(config.k1, from_file.k1, defaults.k1);
      merge(config.hops, from_file.hops, defaults.hops);
      merge(config.rrf_k, from_file.rrf_k, defaults.rrf_k);
      merge(config.embedding_dim, from_file.embedding_dim, defaults.embedding_dim);
      merge(config.max_rounds, from_file.max_rounds, defaults.max_rounds);
      merge(config.policy_fixture, from_file.policy_fixture, defaults.policy_fixture);
      merge(config.llm_endpoint, from_file.llm_endpoint, defaults.llm_endpoint);
    }

    if (ingest->parsed()) return cmd_ingest(config, manifest);
    if (build->parsed()) return cmd_build(config);
    if (query->parsed()) {
      if (question.empty() && questions_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "query needs --question or --questions");
      }
      return cmd_query(config, question, query_out, questions_path, predictions_out);
    }
    if (trace->parsed()) {
      toolkit::TraceFilter filter;
      if (!t_doc.empty()) filter.doc_id = t_doc;
      if (!t_chunk.empty()) filter.chunk_id = t_chunk;
      if (!t_object.empty()) filter.object_id = t_object;
      if (!t_op.empty()) filter.operation = toolkit::prov_operation_from_string(t_op);
      return cmd_trace(config, filter, trace_out);
    }
    if (check->parsed()) return cmd_check(config, check_out);
    if (eval_cmd->parsed()) return cmd_eval(fixtures, predictions, eval_out);
    if (schemas->parsed()) return cmd_schemas(schemas_out);
    return 2;
  } catch (const Error& e) {
    return error_exit(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}

}  // namespace kgfuse::cli

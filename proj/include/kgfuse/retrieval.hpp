#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgfuse/embedder.hpp"
#include "kgfuse/graph_store.hpp"
#include "kgfuse/provenance.hpp"
#include "kgfuse/vector_index.hpp"

namespace kgfuse::retrieval {

enum class Mode { Vector, Kg, Fusion, Deep };

const char* to_string(Mode mode);
Mode mode_from_string(std::string_view name);

constexpr size_t kMiss = static_cast<size_t>(-1);

struct RetrievalRequest {
  std::string query;
  Mode mode = Mode::Fusion;
  size_t top_k = 8;
  size_t k1 = 100;  // recall count
  size_t hops = 2;
  IsolationScope scope;
  std::chrono::milliseconds kg_timeout{2000};
};

struct RetrievalCandidate {
  std::string object_id;  // chunk id
  size_t rank_vec = kMiss;
  size_t rank_kg = kMiss;
  double rrf_score = 0.0;
  std::vector<std::string> evidence_chunk_ids;

  enum class Source { Vector, Kg, Both };
  Source source = Source::Vector;
};

struct RetrievalResult {
  std::vector<RetrievalCandidate> candidates;
  bool fallback = false;  // graph layer timed out / failed; vector-only output
  Mode mode = Mode::Fusion;
};

struct GraphCandidate {
  std::string entity_id;
  size_t hop = 0;
  double similarity = 0.0;  // cosine to the query vector
  std::vector<std::string> evidence_chunks;
};

// Reciprocal rank fusion over two duplicate-free ranking streams; ranks are
// 1-based, a missing stream contributes 0. Output ordered by score desc,
// id asc.
std::vector<RetrievalCandidate> rrf_fuse(const std::vector<std::string>& vector_stream,
                                         const std::vector<std::string>& kg_stream, double k);

struct RetrieverConfig {
  double rrf_k = 60.0;
  double semantic_filter = 0.2;  // min cosine(entity, query) for expanded nodes
  size_t anchor_limit = 10;
};

// Three-step pipeline: vector recall, BFS graph expansion with HyperNode
// evidence lookback, RRF fusion. KG-layer failure in FUSION/DEEP degrades to
// the vector-only ranking with the fallback flag set and an alert logged.
class Retriever {
 public:
  Retriever(const graph::GraphStore& graph, const vec::VectorIndex& vectors,
            vec::EmbeddingProvider& embedder, toolkit::ProvenanceLedger* alert_sink = nullptr,
            RetrieverConfig config = {})
      : graph_(graph), vectors_(vectors), embedder_(embedder), alerts_(alert_sink),
        config_(config) {}

  RetrievalResult retrieve(const RetrievalRequest& request);

  // Entities within `hops` of the anchors (anchors at hop 0), semantically
  // filtered against the query vector, ranked by (hop asc, similarity desc,
  // id asc), each with its EVIDENCED_BY chunk lookback.
  std::vector<GraphCandidate> graph_expand(const std::vector<std::string>& anchors, size_t hops,
                                           const std::vector<double>& query_vec,
                                           const IsolationScope& scope,
                                           std::chrono::steady_clock::time_point deadline) const;

  // Test hook: invoked at KG-layer entry; throwing simulates timeout/failure.
  void set_kg_fault(std::function<void()> fault) { kg_fault_ = std::move(fault); }

 private:
  std::vector<std::string> vector_stream(const std::vector<double>& query_vec, size_t k1,
                                         const IsolationScope& scope) const;
  std::vector<std::string> kg_stream_from_vector(const std::vector<double>& query_vec, size_t k1,
                                                 const RetrievalRequest& request) const;
  std::vector<std::string> kg_stream_lexical(const RetrievalRequest& request,
                                             const std::vector<double>& query_vec) const;
  std::vector<std::string> lexical_anchors(const std::string& query,
                                           const IsolationScope& scope) const;
  std::vector<std::string> chunks_of_expansion(const std::vector<GraphCandidate>& expansion) const;
  std::vector<RetrievalCandidate> deep_navigate(const RetrievalRequest& request,
                                                const std::vector<std::string>& anchors,
                                                const std::vector<std::string>& vec_stream) const;
  RetrievalResult vector_only(const std::vector<std::string>& vec_stream, size_t top_k,
                              Mode mode, bool fallback) const;

  const graph::GraphStore& graph_;
  const vec::VectorIndex& vectors_;
  vec::EmbeddingProvider& embedder_;
  toolkit::ProvenanceLedger* alerts_;
  RetrieverConfig config_;
  std::function<void()> kg_fault_;
};

}  // namespace kgfuse::retrieval

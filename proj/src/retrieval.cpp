#include "kgfuse/retrieval.hpp"

#include <algorithm>
#include <set>

#include "kgfuse/errors.hpp"

namespace kgfuse::retrieval {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Vector: return "vector";
    case Mode::Kg: return "kg";
    case Mode::Fusion: return "fusion";
    case Mode::Deep: return "deep";
  }
  return "fusion";
}

Mode mode_from_string(std::string_view name) {
  if (name == "vector") return Mode::Vector;
  if (name == "kg") return Mode::Kg;
  if (name == "fusion") return Mode::Fusion;
  if (name == "deep") return Mode::Deep;
  throw Error(ErrorCode::InvalidConfig, "unknown retrieval mode '" + std::string(name) + "'");
}

std::vector<RetrievalCandidate> rrf_fuse(const std::vector<std::string>& vector_stream,
                                         const std::vector<std::string>& kg_stream, double k) {
  if (k <= 0) throw Error(ErrorCode::InvalidConfig, "rrf smoothing constant must be positive");
  auto check_unique = [](const std::vector<std::string>& stream, const char* which) {
    std::set<std::string> seen;
    for (const auto& id : stream) {
      if (!seen.insert(id).second) {
        throw Error(ErrorCode::InvalidConfig,
                    std::string(which) + " ranking contains duplicate '" + id + "'");
      }
    }
  };
  check_unique(vector_stream, "vector");
  check_unique(kg_stream, "kg");

  std::map<std::string, RetrievalCandidate> by_id;
  for (size_t i = 0; i < vector_stream.size(); ++i) {
    RetrievalCandidate& c = by_id[vector_stream[i]];
    c.object_id = vector_stream[i];
    c.rank_vec = i + 1;
  }
  for (size_t i = 0; i < kg_stream.size(); ++i) {
    RetrievalCandidate& c = by_id[kg_stream[i]];
    c.object_id = kg_stream[i];
    c.rank_kg = i + 1;
  }

  std::vector<RetrievalCandidate> fused;
  fused.reserve(by_id.size());
  for (auto& [id, candidate] : by_id) {
    double score = 0.0;
    if (candidate.rank_vec != kMiss) score += 1.0 / (k + static_cast<double>(candidate.rank_vec));
    if (candidate.rank_kg != kMiss) score += 1.0 / (k + static_cast<double>(candidate.rank_kg));
    candidate.rrf_score = score;
    candidate.source = candidate.rank_vec != kMiss && candidate.rank_kg != kMiss
                           ? RetrievalCandidate::Source::Both
                       : candidate.rank_vec != kMiss ? RetrievalCandidate::Source::Vector
                                                     : RetrievalCandidate::Source::Kg;
    candidate.evidence_chunk_ids = {id};
    fused.push_back(std::move(candidate));
  }
  std::sort(fused.begin(), fused.end(), [](const RetrievalCandidate& a, const RetrievalCandidate& b) {
    if (a.rrf_score != b.rrf_score) return a.rrf_score > b.rrf_score;
    return a.object_id < b.object_id;
  });
  return fused;
}

std::vector<std::string> Retriever::vector_stream(const std::vector<double>& query_vec, size_t k1,
                                                  const IsolationScope& scope) const {
  auto hits = vectors_.search(query_vec, k1, {scope, vec::Collection::Chunk, {}, {}});
  std::vector<std::string> stream;
  stream.reserve(hits.size());
  for (const auto& hit : hits) stream.push_back(hit.object_id);
  return stream;
}

std::vector<GraphCandidate> Retriever::graph_expand(
    const std::vector<std::string>& anchors, size_t hops, const std::vector<double>& query_vec,
    const IsolationScope& scope, std::chrono::steady_clock::time_point deadline) const {
  if (kg_fault_) kg_fault_();

  std::set<std::string> seeds;
  for (const auto& anchor : anchors) {
    const graph::Entity* entity = graph_.get_entity(anchor);
    if (entity && !entity->deleted && scope.matches(entity->scope)) seeds.insert(anchor);
  }
  std::vector<GraphCandidate> out;
  if (seeds.empty()) return out;

  if (std::chrono::steady_clock::now() > deadline) {
    throw Error(ErrorCode::Timeout, "kg expansion timed out before BFS");
  }
  std::map<std::string, size_t> depth = graph_.bfs_with_depth(seeds, hops, scope);
  if (std::chrono::steady_clock::now() > deadline) {
    throw Error(ErrorCode::Timeout, "kg expansion exceeded its timeout budget");
  }

  for (const auto& [entity_id, hop] : depth) {
    const graph::Entity* entity = graph_.get_entity(entity_id);
    if (!entity || entity->deleted) continue;
    double similarity = 0.0;
    const vec::VectorRecord* record =
        vectors_.find_object(vec::Collection::Entity, entity_id, entity->scope);
    if (record) similarity = vec::cosine(query_vec, record->embedding);
    // lightweight semantic filter applies to expanded nodes, not anchors
    if (hop > 0 && similarity < config_.semantic_filter) continue;

    GraphCandidate candidate;
    candidate.entity_id = entity_id;
    candidate.hop = hop;
    candidate.similarity = similarity;
    for (const graph::BridgeEdge* bridge :
         graph_.bridges_from(entity_id, graph::BridgeType::EvidencedBy)) {
      candidate.evidence_chunks.push_back(bridge->to_id);
    }
    std::sort(candidate.evidence_chunks.begin(), candidate.evidence_chunks.end());
    out.push_back(std::move(candidate));
  }
  std::sort(out.begin(), out.end(), [](const GraphCandidate& a, const GraphCandidate& b) {
    if (a.hop != b.hop) return a.hop < b.hop;
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entity_id < b.entity_id;
  });
  return out;
}

std::vector<std::string> Retriever::chunks_of_expansion(
    const std::vector<GraphCandidate>& expansion) const {
  std::vector<std::string> stream;
  std::set<std::string> seen;
  for (const auto& candidate : expansion) {
    for (const auto& chunk_id : candidate.evidence_chunks) {
      if (seen.insert(chunk_id).second) stream.push_back(chunk_id);
    }
  }
  return stream;
}

std::vector<std::string> Retriever::kg_stream_from_vector(const std::vector<double>& query_vec,
                                                          size_t k1,
                                                          const RetrievalRequest& request) const {
  // entity anchors associated with the vector candidates
  std::vector<std::string> anchors;
  std::set<std::string> seen;
  auto entity_hits = vectors_.search(query_vec, config_.anchor_limit,
                                     {request.scope, vec::Collection::Entity, {}, false});
  for (const auto& hit : entity_hits) {
    if (seen.insert(hit.object_id).second) anchors.push_back(hit.object_id);
  }
  auto chunk_hits =
      vectors_.search(query_vec, config_.anchor_limit, {request.scope, vec::Collection::Chunk, {}, {}});
  for (const auto& hit : chunk_hits) {
    for (const graph::BridgeEdge* bridge :
         graph_.bridges_from(hit.object_id, graph::BridgeType::MentionsEntity)) {
      if (seen.insert(bridge->to_id).second) anchors.push_back(bridge->to_id);
    }
  }
  (void)k1;

  auto deadline = std::chrono::steady_clock::now() + request.kg_timeout;
  auto expansion = graph_expand(anchors, request.hops, query_vec, request.scope, deadline);
  return chunks_of_expansion(expansion);
}

std::vector<std::string> Retriever::lexical_anchors(const std::string& query,
                                                    const IsolationScope& scope) const {
  std::vector<std::string> anchors;
  std::set<std::string> seen;
  for (const auto& match : graph_.find(query, graph::SearchType::Fuzzy, config_.anchor_limit, scope)) {
    if (seen.insert(match.id).second) anchors.push_back(match.id);
  }
  // per-token exact matches against names and aliases
  std::string token;
  auto flush_token = [&]() {
    if (token.size() >= 3) {
      for (const auto& match : graph_.find(token, graph::SearchType::Entity, config_.anchor_limit,
                                           scope)) {
        if (seen.insert(match.id).second) anchors.push_back(match.id);
      }
    }
    token.clear();
  };
  for (char c : query) {
    bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (alnum) {
      token.push_back(c);
    } else {
      flush_token();
    }
  }
  flush_token();
  if (anchors.size() > config_.anchor_limit) anchors.resize(config_.anchor_limit);
  return anchors;
}

std::vector<std::string> Retriever::kg_stream_lexical(const RetrievalRequest& request,
                                                      const std::vector<double>& query_vec) const {
  auto anchors = lexical_anchors(request.query, request.scope);
  auto deadline = std::chrono::steady_clock::now() + request.kg_timeout;
  auto expansion = graph_expand(anchors, request.hops, query_vec, request.scope, deadline);
  return chunks_of_expansion(expansion);
}

RetrievalResult Retriever::vector_only(const std::vector<std::string>& vec_stream, size_t top_k,
                                       Mode mode, bool fallback) const {
  RetrievalResult result;
  result.mode = mode;
  result.fallback = fallback;
  for (size_t i = 0; i < vec_stream.size() && i < top_k; ++i) {
    RetrievalCandidate candidate;
    candidate.object_id = vec_stream[i];
    candidate.rank_vec = i + 1;
    candidate.rrf_score = 1.0 / (config_.rrf_k + static_cast<double>(i + 1));
    candidate.source = RetrievalCandidate::Source::Vector;
    candidate.evidence_chunk_ids = {candidate.object_id};
    result.candidates.push_back(std::move(candidate));
  }
  return result;
}

std::vector<RetrievalCandidate> Retriever::deep_navigate(
    const RetrievalRequest& request, const std::vector<std::string>& anchors,
    const std::vector<std::string>& vec_stream) const {
  if (kg_fault_) kg_fault_();
  auto deadline = std::chrono::steady_clock::now() + request.kg_timeout;

  // chained navigation: entity -> EVIDENCED_BY chunks -> HyperNode ->
  // HAS_EVIDENCE chunks -> mentioned entities, repeated up to `hops` times
  std::vector<std::string> nav_chunks;
  std::set<std::string> seen_chunks;
  std::set<std::string> seen_entities(anchors.begin(), anchors.end());
  std::vector<std::string> frontier = anchors;

  for (size_t hop = 0; hop < request.hops && !frontier.empty(); ++hop) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw Error(ErrorCode::Timeout, "deep navigation exceeded its timeout budget");
    }
    std::vector<std::string> layer_chunks;
    for (const auto& entity_id : frontier) {
      for (const graph::BridgeEdge* bridge :
           graph_.bridges_from(entity_id, graph::BridgeType::EvidencedBy)) {
        if (seen_chunks.insert(bridge->to_id).second) layer_chunks.push_back(bridge->to_id);
      }
    }
    // HyperNode bridging: chunk -> its hypernode -> that hypernode's chunks
    std::vector<std::string> bridged_chunks;
    for (const auto& chunk_id : layer_chunks) {
      for (const graph::BridgeEdge* to_hyper :
           graph_.bridges_to(chunk_id, graph::BridgeType::HasEvidence)) {
        for (const graph::BridgeEdge* from_hyper :
             graph_.bridges_from(to_hyper->from_id, graph::BridgeType::HasEvidence)) {
          if (seen_chunks.insert(from_hyper->to_id).second) {
            bridged_chunks.push_back(from_hyper->to_id);
          }
        }
      }
    }
    layer_chunks.insert(layer_chunks.end(), bridged_chunks.begin(), bridged_chunks.end());
    nav_chunks.insert(nav_chunks.end(), layer_chunks.begin(), layer_chunks.end());

    std::vector<std::string> next;
    for (const auto& chunk_id : layer_chunks) {
      for (const graph::BridgeEdge* bridge :
           graph_.bridges_from(chunk_id, graph::BridgeType::MentionsEntity)) {
        if (seen_entities.insert(bridge->to_id).second) next.push_back(bridge->to_id);
      }
    }
    frontier = std::move(next);
  }

  // merge: navigation results first, then vector candidates, de-duplicated
  std::map<std::string, size_t> vec_rank;
  for (size_t i = 0; i < vec_stream.size(); ++i) vec_rank[vec_stream[i]] = i + 1;

  std::vector<RetrievalCandidate> merged;
  std::set<std::string> emitted;
  for (size_t i = 0; i < nav_chunks.size(); ++i) {
    RetrievalCandidate candidate;
    candidate.object_id = nav_chunks[i];
    candidate.rank_kg = i + 1;
    auto it = vec_rank.find(nav_chunks[i]);
    if (it != vec_rank.end()) candidate.rank_vec = it->second;
    candidate.source = candidate.rank_vec != kMiss ? RetrievalCandidate::Source::Both
                                                   : RetrievalCandidate::Source::Kg;
    candidate.rrf_score =
        (candidate.rank_vec != kMiss ? 1.0 / (config_.rrf_k + static_cast<double>(candidate.rank_vec))
                                     : 0.0) +
        1.0 / (config_.rrf_k + static_cast<double>(candidate.rank_kg));
    candidate.evidence_chunk_ids = {candidate.object_id};
    emitted.insert(candidate.object_id);
    merged.push_back(std::move(candidate));
    if (merged.size() >= request.top_k) return merged;
  }
  for (size_t i = 0; i < vec_stream.size(); ++i) {
    if (emitted.count(vec_stream[i])) continue;
    RetrievalCandidate candidate;
    candidate.object_id = vec_stream[i];
    candidate.rank_vec = i + 1;
    candidate.rrf_score = 1.0 / (config_.rrf_k + static_cast<double>(i + 1));
    candidate.source = RetrievalCandidate::Source::Vector;
    candidate.evidence_chunk_ids = {candidate.object_id};
    merged.push_back(std::move(candidate));
    if (merged.size() >= request.top_k) break;
  }
  return merged;
}

RetrievalResult Retriever::retrieve(const RetrievalRequest& request) {
  if (request.top_k == 0 || request.top_k > request.k1) {
    throw Error(ErrorCode::InvalidConfig, "require 0 < top_k <= k1");
  }
  if (request.hops < 1) throw Error(ErrorCode::InvalidConfig, "hop count must be >= 1");
  if (request.scope.run_id.empty()) {
    throw Error(ErrorCode::InvalidConfig, "retrieval scope requires a run_id");
  }

  if (request.mode == Mode::Kg) {
    if (graph_.entities(request.scope).empty()) {
      throw Error(ErrorCode::EmptyIndex, "no entities for scope '" + request.scope.run_id + "'");
    }
  } else if (vectors_.count(request.scope, vec::Collection::Chunk) == 0) {
    throw Error(ErrorCode::EmptyIndex, "no chunk vectors for scope '" + request.scope.run_id + "'");
  }

  std::vector<double> query_vec = embedder_.embed(request.query);

  if (request.mode == Mode::Vector) {
    return vector_only(vector_stream(query_vec, request.k1, request.scope), request.top_k,
                       Mode::Vector, false);
  }

  if (request.mode == Mode::Kg) {
    auto kg_stream = kg_stream_lexical(request, query_vec);
    RetrievalResult result;
    result.mode = Mode::Kg;
    for (size_t i = 0; i < kg_stream.size() && i < request.top_k; ++i) {
      RetrievalCandidate candidate;
      candidate.object_id = kg_stream[i];
      candidate.rank_kg = i + 1;
      candidate.rrf_score = 1.0 / (config_.rrf_k + static_cast<double>(i + 1));
      candidate.source = RetrievalCandidate::Source::Kg;
      candidate.evidence_chunk_ids = {candidate.object_id};
      result.candidates.push_back(std::move(candidate));
    }
    return result;
  }

  auto vec_stream = vector_stream(query_vec, request.k1, request.scope);

  if (request.mode == Mode::Deep) {
    auto anchors = lexical_anchors(request.query, request.scope);
    if (!anchors.empty()) {
      try {
        RetrievalResult result;
        result.mode = Mode::Deep;
        result.candidates = deep_navigate(request, anchors, vec_stream);
        return result;
      } catch (const std::exception& e) {
        if (alerts_) alerts_->alert("retrieval", "KG_EXPAND", "FALLBACK", e.what());
        return vector_only(vec_stream, request.top_k, Mode::Deep, true);
      }
    }
    // no resolvable anchors: deep degrades to fusion behaviour
  }

  try {
    auto kg_stream = kg_stream_from_vector(query_vec, request.k1, request);
    auto fused = rrf_fuse(vec_stream, kg_stream, config_.rrf_k);
    if (fused.size() > request.top_k) fused.resize(request.top_k);
    RetrievalResult result;
    result.mode = request.mode;
    result.candidates = std::move(fused);
    return result;
  } catch (const std::exception& e) {
    if (alerts_) alerts_->alert("retrieval", "KG_EXPAND", "FALLBACK", e.what());
    return vector_only(vec_stream, request.top_k, request.mode, true);
  }
}

}  // namespace kgfuse::retrieval

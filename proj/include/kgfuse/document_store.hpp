#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgfuse/corpus.hpp"
#include "kgfuse/scope.hpp"

namespace kgfuse::corpus {

// In-process document/chunk store with per-scope buckets and forward-only
// chunk lifecycle transitions. Snapshots round-trip through a JSON file so a
// resumed session sees the same chunk states.
class DocumentStore {
 public:
  void add_document(const Document& doc, const IsolationScope& scope);
  void add_chunks(const std::vector<Chunk>& chunks, const IsolationScope& scope);

  const Document* find_document(const std::string& doc_id, const IsolationScope& scope) const;
  const Chunk* find_chunk(const std::string& chunk_id, const IsolationScope& scope) const;
  std::vector<const Chunk*> chunks_of(const std::string& doc_id, const IsolationScope& scope) const;
  std::vector<std::string> doc_ids(const IsolationScope& scope) const;

  // Throws InvalidConfig on a backward transition.
  void set_chunk_state(const std::string& chunk_id, ChunkState state, const IsolationScope& scope);

  size_t chunk_count(const IsolationScope& scope) const;
  bool empty(const IsolationScope& scope) const;

  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  struct Bucket {
    std::map<std::string, Document> docs;
    std::map<std::string, Chunk> chunks;                       // by chunk_id
    std::map<std::string, std::vector<std::string>> by_doc;    // doc_id -> chunk ids in order
  };

  static std::string bucket_key(const IsolationScope& scope) {
    return scope.tenant_id + "\x1f" + scope.run_id + "\x1f" + scope.dataset;
  }
  const Bucket* bucket(const IsolationScope& scope) const;
  Bucket& bucket_mut(const IsolationScope& scope);

  std::map<std::string, Bucket> buckets_;
};

}  // namespace kgfuse::corpus

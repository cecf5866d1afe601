#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgfuse/scope.hpp"

namespace kgfuse::vec {

enum class Collection { Chunk, Entity };

const char* to_string(Collection collection);
Collection collection_from_string(std::string_view name);

// Entity-record payload; HyperNode vectors live in the Entity collection
// with hyper=true.
struct VectorPayload {
  std::string name;
  std::string entity_type;
  std::string node_id;
  bool hyper = false;

  bool operator==(const VectorPayload&) const = default;
};

struct VectorRecord {
  std::string vec_id;
  std::string object_id;
  Collection collection = Collection::Chunk;
  std::vector<double> embedding;
  IsolationScope scope;
  VectorPayload payload;
};

struct SearchFilter {
  IsolationScope scope;  // run_id required
  std::optional<Collection> collection;
  std::optional<std::string> entity_type;
  std::optional<bool> hyper;

  bool accepts(const VectorRecord& record) const;
};

struct SearchHit {
  std::string object_id;
  double score = 0.0;
  std::string vec_id;
};

// Exact brute-force index. score = 1 / (1 + ||q - m||_2); results ordered by
// score desc, object_id asc. One live record per (collection, object_id,
// scope); reinsert replaces the embedding and keeps the vec_id stable.
class VectorIndex {
 public:
  explicit VectorIndex(size_t dimension) : dimension_(dimension) {}

  size_t dimension() const { return dimension_; }
  size_t size() const { return records_.size(); }
  size_t count(const IsolationScope& scope, std::optional<Collection> collection = {}) const;

  std::string insert(const std::string& object_id, Collection collection,
                     std::vector<double> embedding, const IsolationScope& scope,
                     VectorPayload payload = {});

  std::vector<SearchHit> search(const std::vector<double>& query, size_t k1,
                                const SearchFilter& filter) const;

  const VectorRecord* find(const std::string& vec_id) const;
  const VectorRecord* find_object(Collection collection, const std::string& object_id,
                                  const IsolationScope& scope) const;
  bool erase(const std::string& vec_id);
  bool erase_object(Collection collection, const std::string& object_id,
                    const IsolationScope& scope);

  // All records, vec_id order (for consistency checks).
  const std::map<std::string, VectorRecord>& records() const { return records_; }

  // Bit-exact binary snapshot: header {magic, version, D, next_id, count},
  // then records in vec_id order with raw float64 embeddings.
  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

  static double score(const std::vector<double>& query, const std::vector<double>& stored);

 private:
  static std::string object_key(Collection collection, const std::string& object_id,
                                const IsolationScope& scope);

  size_t dimension_;
  uint64_t next_id_ = 0;
  std::map<std::string, VectorRecord> records_;
  std::map<std::string, std::string> by_object_;
};

}  // namespace kgfuse::vec

#include "kgfuse/vector_index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "kgfuse/embedder.hpp"
#include "kgfuse/errors.hpp"

namespace kgfuse::vec {

const char* to_string(Collection collection) {
  return collection == Collection::Chunk ? "CHUNK" : "ENTITY";
}

Collection collection_from_string(std::string_view name) {
  if (name == "CHUNK") return Collection::Chunk;
  if (name == "ENTITY") return Collection::Entity;
  throw Error(ErrorCode::InvalidConfig, "unknown collection '" + std::string(name) + "'");
}

bool SearchFilter::accepts(const VectorRecord& record) const {
  if (!scope.matches(record.scope)) return false;
  if (collection && *collection != record.collection) return false;
  if (entity_type && *entity_type != record.payload.entity_type) return false;
  if (hyper && *hyper != record.payload.hyper) return false;
  return true;
}

std::string VectorIndex::object_key(Collection collection, const std::string& object_id,
                                    const IsolationScope& scope) {
  return std::string(to_string(collection)) + "\x1f" + object_id + "\x1f" + scope.key();
}

size_t VectorIndex::count(const IsolationScope& scope, std::optional<Collection> collection) const {
  size_t n = 0;
  for (const auto& [id, record] : records_) {
    if (!scope.matches(record.scope)) continue;
    if (collection && *collection != record.collection) continue;
    ++n;
  }
  return n;
}

std::string VectorIndex::insert(const std::string& object_id, Collection collection,
                                std::vector<double> embedding, const IsolationScope& scope,
                                VectorPayload payload) {
  if (embedding.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(dimension_) + ", got " +
                    std::to_string(embedding.size()));
  }
  if (is_degenerate(embedding)) {
    throw Error(ErrorCode::DegenerateVector, "refusing all-zero embedding for '" + object_id + "'");
  }
  std::string key = object_key(collection, object_id, scope);
  auto existing = by_object_.find(key);
  if (existing != by_object_.end()) {
    VectorRecord& record = records_.at(existing->second);
    record.embedding = std::move(embedding);
    record.payload = std::move(payload);
    return record.vec_id;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "v%06llu", static_cast<unsigned long long>(next_id_++));
  VectorRecord record;
  record.vec_id = buf;
  record.object_id = object_id;
  record.collection = collection;
  record.embedding = std::move(embedding);
  record.scope = scope;
  record.payload = std::move(payload);
  by_object_[key] = record.vec_id;
  std::string vec_id = record.vec_id;
  records_.emplace(vec_id, std::move(record));
  return vec_id;
}

double VectorIndex::score(const std::vector<double>& query, const std::vector<double>& stored) {
  return 1.0 / (1.0 + l2_distance(query, stored));
}

std::vector<SearchHit> VectorIndex::search(const std::vector<double>& query, size_t k1,
                                           const SearchFilter& filter) const {
  if (query.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dimension " + std::to_string(query.size()) + " != " +
                    std::to_string(dimension_));
  }
  if (k1 == 0) throw Error(ErrorCode::InvalidConfig, "k1 must be positive");

  std::vector<SearchHit> hits;
  for (const auto& [id, record] : records_) {
    if (!filter.accepts(record)) continue;
    hits.push_back({record.object_id, score(query, record.embedding), record.vec_id});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.object_id < b.object_id;
  });
  if (hits.size() > k1) hits.resize(k1);
  return hits;
}

const VectorRecord* VectorIndex::find(const std::string& vec_id) const {
  auto it = records_.find(vec_id);
  return it == records_.end() ? nullptr : &it->second;
}

const VectorRecord* VectorIndex::find_object(Collection collection, const std::string& object_id,
                                             const IsolationScope& scope) const {
  auto it = by_object_.find(object_key(collection, object_id, scope));
  return it == by_object_.end() ? nullptr : &records_.at(it->second);
}

bool VectorIndex::erase(const std::string& vec_id) {
  auto it = records_.find(vec_id);
  if (it == records_.end()) return false;
  by_object_.erase(object_key(it->second.collection, it->second.object_id, it->second.scope));
  records_.erase(it);
  return true;
}

bool VectorIndex::erase_object(Collection collection, const std::string& object_id,
                               const IsolationScope& scope) {
  auto it = by_object_.find(object_key(collection, object_id, scope));
  if (it == by_object_.end()) return false;
  records_.erase(it->second);
  by_object_.erase(it);
  return true;
}

// ---------------------------------------------------------------------------
// Binary snapshot
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'K', 'G', 'F', 'U', 'S', 'E', 'C', '1'};

void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ofstream& out, uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
void write_str(std::ofstream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
uint32_t read_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::ifstream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::ifstream& in) {
  uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

void VectorIndex::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out.write(kMagic, 8);
  write_u32(out, 1);  // format version
  write_u32(out, static_cast<uint32_t>(dimension_));
  write_u64(out, next_id_);
  write_u64(out, records_.size());
  for (const auto& [id, record] : records_) {
    write_str(out, record.vec_id);
    write_str(out, record.object_id);
    out.put(record.collection == Collection::Chunk ? 0 : 1);
    write_str(out, record.scope.tenant_id);
    write_str(out, record.scope.run_id);
    write_str(out, record.scope.dataset);
    write_str(out, record.scope.document_id);
    write_str(out, record.payload.name);
    write_str(out, record.payload.entity_type);
    write_str(out, record.payload.node_id);
    out.put(record.payload.hyper ? 1 : 0);
    out.write(reinterpret_cast<const char*>(record.embedding.data()),
              static_cast<std::streamsize>(record.embedding.size() * sizeof(double)));
  }
}

void VectorIndex::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(ErrorCode::UnreadableFile, "bad vector snapshot magic in " + file.string());
  }
  uint32_t version = read_u32(in);
  if (version != 1) {
    throw Error(ErrorCode::UnreadableFile, "unsupported vector snapshot version");
  }
  dimension_ = read_u32(in);
  next_id_ = read_u64(in);
  uint64_t count = read_u64(in);
  records_.clear();
  by_object_.clear();
  for (uint64_t i = 0; i < count; ++i) {
    VectorRecord record;
    record.vec_id = read_str(in);
    record.object_id = read_str(in);
    record.collection = in.get() == 0 ? Collection::Chunk : Collection::Entity;
    record.scope.tenant_id = read_str(in);
    record.scope.run_id = read_str(in);
    record.scope.dataset = read_str(in);
    record.scope.document_id = read_str(in);
    record.payload.name = read_str(in);
    record.payload.entity_type = read_str(in);
    record.payload.node_id = read_str(in);
    record.payload.hyper = in.get() != 0;
    record.embedding.resize(dimension_);
    in.read(reinterpret_cast<char*>(record.embedding.data()),
            static_cast<std::streamsize>(dimension_ * sizeof(double)));
    by_object_[object_key(record.collection, record.object_id, record.scope)] = record.vec_id;
    std::string vec_id = record.vec_id;
    records_.emplace(vec_id, std::move(record));
  }
  if (!in) throw Error(ErrorCode::UnreadableFile, "truncated vector snapshot " + file.string());
}

}  // namespace kgfuse::vec

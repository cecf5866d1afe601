#include "kgfuse/document_store.hpp"

#include <fstream>

#include <json.hpp>

#include "kgfuse/errors.hpp"

namespace kgfuse::corpus {

using json = nlohmann::json;

const DocumentStore::Bucket* DocumentStore::bucket(const IsolationScope& scope) const {
  auto it = buckets_.find(bucket_key(scope));
  return it == buckets_.end() ? nullptr : &it->second;
}

DocumentStore::Bucket& DocumentStore::bucket_mut(const IsolationScope& scope) {
  return buckets_[bucket_key(scope)];
}

void DocumentStore::add_document(const Document& doc, const IsolationScope& scope) {
  bucket_mut(scope).docs[doc.doc_id] = doc;
}

void DocumentStore::add_chunks(const std::vector<Chunk>& chunks, const IsolationScope& scope) {
  Bucket& bucket = bucket_mut(scope);
  for (const Chunk& chunk : chunks) {
    if (bucket.chunks.emplace(chunk.chunk_id, chunk).second) {
      bucket.by_doc[chunk.doc_id].push_back(chunk.chunk_id);
    } else {
      bucket.chunks[chunk.chunk_id] = chunk;
    }
  }
}

const Document* DocumentStore::find_document(const std::string& doc_id,
                                             const IsolationScope& scope) const {
  const Bucket* b = bucket(scope);
  if (!b) return nullptr;
  auto it = b->docs.find(doc_id);
  return it == b->docs.end() ? nullptr : &it->second;
}

const Chunk* DocumentStore::find_chunk(const std::string& chunk_id,
                                       const IsolationScope& scope) const {
  const Bucket* b = bucket(scope);
  if (!b) return nullptr;
  auto it = b->chunks.find(chunk_id);
  return it == b->chunks.end() ? nullptr : &it->second;
}

std::vector<const Chunk*> DocumentStore::chunks_of(const std::string& doc_id,
                                                   const IsolationScope& scope) const {
  std::vector<const Chunk*> result;
  const Bucket* b = bucket(scope);
  if (!b) return result;
  auto it = b->by_doc.find(doc_id);
  if (it == b->by_doc.end()) return result;
  for (const std::string& id : it->second) {
    result.push_back(&b->chunks.at(id));
  }
  return result;
}

std::vector<std::string> DocumentStore::doc_ids(const IsolationScope& scope) const {
  std::vector<std::string> ids;
  const Bucket* b = bucket(scope);
  if (!b) return ids;
  for (const auto& [id, doc] : b->docs) ids.push_back(id);
  return ids;
}

void DocumentStore::set_chunk_state(const std::string& chunk_id, ChunkState state,
                                    const IsolationScope& scope) {
  Bucket& b = bucket_mut(scope);
  auto it = b.chunks.find(chunk_id);
  if (it == b.chunks.end()) {
    throw Error(ErrorCode::NotFound, "chunk '" + chunk_id + "'");
  }
  if (static_cast<int>(state) < static_cast<int>(it->second.state)) {
    throw Error(ErrorCode::InvalidConfig,
                "chunk lifecycle cannot move backward (" + std::string(to_string(it->second.state)) +
                    " -> " + to_string(state) + ")");
  }
  it->second.state = state;
}

size_t DocumentStore::chunk_count(const IsolationScope& scope) const {
  const Bucket* b = bucket(scope);
  return b ? b->chunks.size() : 0;
}

bool DocumentStore::empty(const IsolationScope& scope) const {
  const Bucket* b = bucket(scope);
  return !b || (b->docs.empty() && b->chunks.empty());
}

namespace {

json chunk_to_json(const Chunk& chunk) {
  return json{{"chunk_id", chunk.chunk_id}, {"doc_id", chunk.doc_id},
              {"index", chunk.index},       {"text", chunk.text},
              {"pos", chunk.pos},           {"overlap_len", chunk.overlap_len},
              {"struct_label", to_string(chunk.struct_label)},
              {"heading_level", chunk.heading_level},
              {"state", to_string(chunk.state)}};
}

Chunk chunk_from_json(const json& j) {
  Chunk chunk;
  chunk.chunk_id = j.at("chunk_id").get<std::string>();
  chunk.doc_id = j.at("doc_id").get<std::string>();
  chunk.index = j.at("index").get<size_t>();
  chunk.text = j.at("text").get<std::string>();
  chunk.pos = j.at("pos").get<size_t>();
  chunk.overlap_len = j.at("overlap_len").get<size_t>();
  chunk.struct_label = struct_label_from_string(j.at("struct_label").get<std::string>());
  chunk.heading_level = j.at("heading_level").get<int>();
  chunk.state = chunk_state_from_string(j.at("state").get<std::string>());
  return chunk;
}

}  // namespace

void DocumentStore::save(const std::filesystem::path& file) const {
  json root;
  root["format"] = "kgfuse.docstore";
  root["version"] = 1;
  json buckets = json::array();
  for (const auto& [key, bucket] : buckets_) {
    json docs = json::array();
    for (const auto& [id, doc] : bucket.docs) {
      docs.push_back({{"doc_id", doc.doc_id},
                      {"title", doc.title},
                      {"body", doc.body},
                      {"source_uri", doc.source_uri}});
    }
    json chunks = json::array();
    for (const auto& [id, chunk] : bucket.chunks) chunks.push_back(chunk_to_json(chunk));
    json order = json::object();
    for (const auto& [doc_id, ids] : bucket.by_doc) order[doc_id] = ids;
    buckets.push_back({{"key", key}, {"docs", docs}, {"chunks", chunks}, {"order", order}});
  }
  root["buckets"] = buckets;

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << root.dump(2) << "\n";
}

void DocumentStore::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  json root = json::parse(in);
  buckets_.clear();
  for (const json& b : root.at("buckets")) {
    Bucket bucket;
    for (const json& d : b.at("docs")) {
      Document doc;
      doc.doc_id = d.at("doc_id").get<std::string>();
      doc.title = d.at("title").get<std::string>();
      doc.body = d.at("body").get<std::string>();
      doc.source_uri = d.at("source_uri").get<std::string>();
      bucket.docs[doc.doc_id] = std::move(doc);
    }
    for (const json& c : b.at("chunks")) {
      Chunk chunk = chunk_from_json(c);
      bucket.chunks[chunk.chunk_id] = std::move(chunk);
    }
    for (const auto& [doc_id, ids] : b.at("order").items()) {
      bucket.by_doc[doc_id] = ids.get<std::vector<std::string>>();
    }
    buckets_[b.at("key").get<std::string>()] = std::move(bucket);
  }
}

}  // namespace kgfuse::corpus

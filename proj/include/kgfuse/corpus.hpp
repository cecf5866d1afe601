#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kgfuse/errors.hpp"

namespace kgfuse::corpus {

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;  // UTF-8
  std::string source_uri;
};

enum class ChunkStrategy { FixedSize, Semantic, Paragraph, Structural };

enum class StructLabel { Heading, Body, ListItem, CodeBlock, Table };

// Lifecycle only moves forward: Pending -> Reading -> Verified -> Archived.
enum class ChunkState { Pending, Reading, Verified, Archived };

struct ChunkerConfig {
  ChunkStrategy strategy = ChunkStrategy::Structural;
  size_t chunk_size = 800;    // code points
  size_t chunk_overlap = 0;   // code points, prefix copied from previous tail
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  size_t index = 0;
  std::string text;        // includes the overlap prefix when overlap > 0
  size_t pos = 0;          // code-point offset of the non-overlapped start
  size_t overlap_len = 0;  // code points copied from the previous chunk
  StructLabel struct_label = StructLabel::Body;
  int heading_level = 0;   // nonzero only for Heading
  ChunkState state = ChunkState::Pending;

  // Text minus the overlap prefix; equals body[pos, pos + core length).
  std::string_view core_text() const;
};

const char* to_string(StructLabel label);
const char* to_string(ChunkState state);
const char* to_string(ChunkStrategy strategy);
ChunkStrategy strategy_from_string(std::string_view name);
ChunkState chunk_state_from_string(std::string_view name);
StructLabel struct_label_from_string(std::string_view name);

// Splits doc.body under cfg. Joining core texts in index order reconstructs
// the body exactly; pos is strictly increasing; FIXED_SIZE chunks never
// exceed chunk_size. Deterministic for identical inputs.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkerConfig& cfg);

// Manifest: JSONL, one {doc_id, path, title} record per line; an optional
// leading record with a "format" key is skipped. Paths resolve relative to
// the manifest's directory.
std::vector<Document> load_corpus(const std::filesystem::path& manifest_path);

}  // namespace kgfuse::corpus

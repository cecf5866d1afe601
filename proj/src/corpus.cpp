#include "kgfuse/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kgfuse/utf8.hpp"

namespace kgfuse::corpus {

namespace {

using json = nlohmann::json;

constexpr size_t kNone = static_cast<size_t>(-1);

bool is_sentence_ender(char32_t cp) {
  return cp == U'.' || cp == U'?' || cp == U'!' ||
         cp == 0x3002 || cp == 0xFF1F || cp == 0xFF01;  // full-width . ? !
}

// Code-point view over a document body. Chunker arithmetic runs on
// code-point indexes; byte offsets are recovered through `offsets`.
struct CpText {
  std::string_view body;
  std::vector<size_t> offsets;  // offsets[i] = byte offset of cp i; back() = size
  std::vector<char32_t> cps;

  explicit CpText(std::string_view text) : body(text) {
    offsets = utf8::code_point_offsets(text);
    cps.reserve(offsets.size() - 1);
    for (size_t i = 0; i + 1 < offsets.size(); ++i) {
      size_t pos = offsets[i];
      cps.push_back(utf8::decode(text, pos));
    }
  }

  size_t size() const { return cps.size(); }

  std::string_view slice(size_t begin_cp, size_t end_cp) const {
    return body.substr(offsets[begin_cp], offsets[end_cp] - offsets[begin_cp]);
  }
};

struct Span {
  size_t begin = 0;
  size_t end = 0;
  StructLabel label = StructLabel::Body;
  int heading_level = 0;
  bool overlap_from_prev = false;  // FIXED_SIZE tails and secondary splits
};

// Extends a boundary over trailing whitespace so delimiters stay with the
// preceding chunk.
size_t absorb_whitespace(const CpText& text, size_t pos, size_t limit) {
  while (pos < limit && utf8::is_space(text.cps[pos])) ++pos;
  return pos;
}

// Boundary after the last sentence ender within `window` code points of
// `begin`, or 0 when no usable one exists.
size_t last_sentence_boundary(const CpText& text, size_t begin, size_t window, size_t hard_end) {
  size_t scan_end = std::min(begin + window, hard_end);
  for (size_t j = scan_end; j > begin; --j) {
    if (is_sentence_ender(text.cps[j - 1])) {
      size_t boundary = absorb_whitespace(text, j, hard_end);
      if (boundary > begin && boundary < hard_end) return boundary;
    }
  }
  return 0;
}

size_t last_newline_boundary(const CpText& text, size_t begin, size_t window, size_t hard_end) {
  size_t scan_end = std::min(begin + window, hard_end);
  for (size_t j = scan_end; j > begin; --j) {
    if (text.cps[j - 1] == U'\n') {
      size_t boundary = absorb_whitespace(text, j, hard_end);
      if (boundary > begin && boundary < hard_end) return boundary;
    }
  }
  return 0;
}

// Splits [begin, end) into sub-spans of at most chunk_size, preferring
// sentence boundaries, then newlines, then a hard cut. Sub-spans after the
// first take an overlap prefix and degrade to Body unless the segment is a
// code block or table.
void secondary_split(const CpText& text, size_t begin, size_t end, size_t chunk_size,
                     StructLabel label, int heading_level, std::vector<Span>& out) {
  size_t cur = begin;
  bool first = true;
  while (cur < end) {
    size_t next;
    if (end - cur <= chunk_size) {
      next = end;
    } else {
      next = last_sentence_boundary(text, cur, chunk_size, end);
      if (next == 0) next = last_newline_boundary(text, cur, chunk_size, end);
      if (next == 0) next = cur + chunk_size;
    }
    Span span{cur, next, label, heading_level, !first};
    if (!first && label != StructLabel::CodeBlock && label != StructLabel::Table) {
      span.label = StructLabel::Body;
      span.heading_level = 0;
    }
    out.push_back(span);
    cur = next;
    first = false;
  }
}

std::vector<Span> chunk_fixed_size(const CpText& text, const ChunkerConfig& cfg) {
  std::vector<Span> spans;
  size_t n = text.size();
  size_t cur = 0;
  bool first = true;
  while (cur < n) {
    size_t core = first ? cfg.chunk_size : cfg.chunk_size - cfg.chunk_overlap;
    size_t next = std::min(cur + core, n);
    spans.push_back({cur, next, StructLabel::Body, 0, !first && cfg.chunk_overlap > 0});
    cur = next;
    first = false;
  }
  return spans;
}

std::vector<Span> chunk_semantic(const CpText& text, const ChunkerConfig& cfg) {
  std::vector<Span> spans;
  size_t n = text.size();
  size_t cur = 0;
  while (cur < n) {
    size_t next;
    if (n - cur <= cfg.chunk_size) {
      next = n;
    } else {
      next = last_sentence_boundary(text, cur, cfg.chunk_size, n);
      if (next == 0) next = cur + cfg.chunk_size;
    }
    spans.push_back({cur, next, StructLabel::Body, 0, false});
    cur = next;
  }
  return spans;
}

// Paragraph boundaries fall after each maximal run of >= 2 newlines; the
// delimiter run stays with the preceding paragraph. Whitespace-only spans
// fold into the next paragraph (or the previous one at end of text).
std::vector<std::pair<size_t, size_t>> paragraph_spans(const CpText& text) {
  size_t n = text.size();
  std::vector<std::pair<size_t, size_t>> raw;
  size_t begin = 0;
  size_t i = 0;
  while (i < n) {
    if (text.cps[i] == U'\n') {
      size_t run_end = i;
      while (run_end < n && text.cps[run_end] == U'\n') ++run_end;
      if (run_end - i >= 2 && run_end < n) {
        raw.push_back({begin, run_end});
        begin = run_end;
      }
      i = run_end;
    } else {
      ++i;
    }
  }
  if (begin < n) raw.push_back({begin, n});

  auto is_blank = [&](const std::pair<size_t, size_t>& span) {
    for (size_t j = span.first; j < span.second; ++j) {
      if (!utf8::is_space(text.cps[j])) return false;
    }
    return true;
  };

  std::vector<std::pair<size_t, size_t>> spans;
  size_t carry = kNone;  // start of a pending blank prefix
  for (const auto& span : raw) {
    if (is_blank(span)) {
      if (carry == kNone) carry = span.first;
      continue;
    }
    spans.push_back({carry == kNone ? span.first : carry, span.second});
    carry = kNone;
  }
  if (carry != kNone) {
    if (!spans.empty()) {
      spans.back().second = n;
    } else {
      spans.push_back({carry, n});
    }
  }
  return spans;
}

std::vector<Span> chunk_paragraph(const CpText& text, const ChunkerConfig& cfg) {
  std::vector<Span> spans;
  for (auto [begin, end] : paragraph_spans(text)) {
    if (end - begin > cfg.chunk_size) {
      secondary_split(text, begin, end, cfg.chunk_size, StructLabel::Body, 0, spans);
    } else {
      spans.push_back({begin, end, StructLabel::Body, 0, false});
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------
// STRUCTURAL: markdown-style headings, fenced code, pipe tables, list runs.
// ---------------------------------------------------------------------------

struct Line {
  enum Kind { Blank, Heading, Fence, TableRow, ListItem, Text };
  size_t begin = 0;
  size_t end = 0;  // past the trailing newline
  Kind kind = Text;
  int level = 0;
};

std::vector<Line> split_lines(const CpText& text) {
  std::vector<Line> lines;
  size_t n = text.size();
  size_t begin = 0;
  for (size_t i = 0; i <= n; ++i) {
    if (i == n || text.cps[i] == U'\n') {
      if (i == n && begin == n) break;
      Line line;
      line.begin = begin;
      line.end = (i == n) ? n : i + 1;

      size_t fs = begin;
      while (fs < i && (text.cps[fs] == U' ' || text.cps[fs] == U'\t')) ++fs;
      if (fs == i) {
        line.kind = Line::Blank;
      } else if (text.cps[fs] == U'#') {
        size_t h = fs;
        while (h < i && text.cps[h] == U'#') ++h;
        size_t hashes = h - fs;
        if (hashes <= 6 && (h == i || text.cps[h] == U' ' || text.cps[h] == U'\t')) {
          line.kind = Line::Heading;
          line.level = static_cast<int>(hashes);
        } else {
          line.kind = Line::Text;
        }
      } else if (i - fs >= 3 && text.cps[fs] == U'`' && text.cps[fs + 1] == U'`' &&
                 text.cps[fs + 2] == U'`') {
        line.kind = Line::Fence;
      } else if (text.cps[fs] == U'|') {
        line.kind = Line::TableRow;
      } else if ((text.cps[fs] == U'-' || text.cps[fs] == U'*' || text.cps[fs] == U'+') &&
                 fs + 1 < i && text.cps[fs + 1] == U' ') {
        line.kind = Line::ListItem;
      } else if (text.cps[fs] >= U'0' && text.cps[fs] <= U'9') {
        size_t d = fs;
        while (d < i && text.cps[d] >= U'0' && text.cps[d] <= U'9') ++d;
        if (d < i && text.cps[d] == U'.' && d + 1 < i && text.cps[d + 1] == U' ') {
          line.kind = Line::ListItem;
        } else {
          line.kind = Line::Text;
        }
      } else {
        line.kind = Line::Text;
      }
      lines.push_back(line);
      begin = i + 1;
    }
  }
  return lines;
}

struct Block {
  enum Kind { Heading, Code, Table, List, Para };
  Kind kind = Para;
  size_t begin = 0;
  size_t end = 0;
  int level = 0;
  bool closed = false;
};

std::vector<Block> parse_blocks(const CpText& text) {
  std::vector<Block> blocks;
  bool in_code = false;
  size_t pending = kNone;  // leading blank prefix for the next block

  auto open_block = [&](Block::Kind kind, const Line& line, int level) {
    Block block;
    block.kind = kind;
    block.begin = pending != kNone ? pending : line.begin;
    block.end = line.end;
    block.level = level;
    pending = kNone;
    blocks.push_back(block);
  };

  for (const Line& line : split_lines(text)) {
    if (in_code) {
      blocks.back().end = line.end;
      if (line.kind == Line::Fence) {
        in_code = false;
        blocks.back().closed = true;
      }
      continue;
    }
    switch (line.kind) {
      case Line::Fence:
        open_block(Block::Code, line, 0);
        in_code = true;
        break;
      case Line::Blank:
        if (!blocks.empty() && pending == kNone) {
          blocks.back().end = line.end;
          blocks.back().closed = true;
        } else if (pending == kNone) {
          pending = line.begin;
        }
        break;
      case Line::Heading:
        open_block(Block::Heading, line, line.level);
        blocks.back().closed = true;
        break;
      case Line::TableRow:
        if (!blocks.empty() && blocks.back().kind == Block::Table && !blocks.back().closed) {
          blocks.back().end = line.end;
        } else {
          open_block(Block::Table, line, 0);
        }
        break;
      case Line::ListItem:
        if (!blocks.empty() && blocks.back().kind == Block::List && !blocks.back().closed) {
          blocks.back().end = line.end;
        } else {
          open_block(Block::List, line, 0);
        }
        break;
      case Line::Text:
        if (!blocks.empty() && !blocks.back().closed &&
            (blocks.back().kind == Block::Para || blocks.back().kind == Block::List)) {
          blocks.back().end = line.end;
        } else {
          open_block(Block::Para, line, 0);
        }
        break;
    }
  }
  if (pending != kNone) {
    if (!blocks.empty()) {
      blocks.back().end = text.size();
    } else {
      blocks.push_back({Block::Para, pending, text.size(), 0, true});
    }
  }
  return blocks;
}

StructLabel block_label(Block::Kind kind) {
  switch (kind) {
    case Block::Heading: return StructLabel::Heading;
    case Block::Code: return StructLabel::CodeBlock;
    case Block::Table: return StructLabel::Table;
    case Block::List: return StructLabel::ListItem;
    case Block::Para: return StructLabel::Body;
  }
  return StructLabel::Body;
}

std::vector<Span> chunk_structural(const CpText& text, const ChunkerConfig& cfg) {
  std::vector<Block> blocks = parse_blocks(text);
  std::vector<Span> spans;
  std::vector<int> heading_stack;  // current section nesting

  size_t acc_begin = kNone;
  size_t acc_end = 0;
  StructLabel acc_label = StructLabel::Body;
  int acc_level = 0;

  auto flush = [&]() {
    if (acc_begin == kNone) return;
    if (acc_end - acc_begin > cfg.chunk_size) {
      secondary_split(text, acc_begin, acc_end, cfg.chunk_size, acc_label, acc_level, spans);
    } else {
      spans.push_back({acc_begin, acc_end, acc_label, acc_level, false});
    }
    acc_begin = kNone;
  };
  auto start_acc = [&](const Block& block) {
    acc_begin = block.begin;
    acc_end = block.end;
    acc_label = block_label(block.kind);
    acc_level = block.level;
  };

  for (const Block& block : blocks) {
    size_t block_len = block.end - block.begin;
    switch (block.kind) {
      case Block::Heading: {
        size_t pops = 0;
        while (!heading_stack.empty() && heading_stack.back() >= block.level) {
          heading_stack.pop_back();
          ++pops;
        }
        heading_stack.push_back(block.level);
        bool hard_boundary = block.level <= 2;
        bool soft_boundary = pops > 0 && acc_begin != kNone &&
                             (acc_end - acc_begin) + block_len > cfg.chunk_size;
        if (hard_boundary || soft_boundary) flush();
        if (acc_begin == kNone) {
          start_acc(block);
        } else {
          acc_end = block.end;
        }
        break;
      }
      case Block::Code:
      case Block::Table: {
        flush();
        if (block_len > cfg.chunk_size) {
          secondary_split(text, block.begin, block.end, cfg.chunk_size,
                          block_label(block.kind), 0, spans);
        } else {
          spans.push_back({block.begin, block.end, block_label(block.kind), 0, false});
        }
        break;
      }
      case Block::List:
      case Block::Para: {
        if (acc_begin == kNone) {
          start_acc(block);
        } else if ((acc_end - acc_begin) + block_len > cfg.chunk_size) {
          flush();
          start_acc(block);
        } else {
          acc_end = block.end;
        }
        break;
      }
    }
  }
  flush();
  return spans;
}

std::vector<Chunk> assemble(const Document& doc, const CpText& text, const std::vector<Span>& spans,
                            const ChunkerConfig& cfg) {
  std::vector<Chunk> chunks;
  chunks.reserve(spans.size());
  size_t prev_total_len = 0;
  for (size_t i = 0; i < spans.size(); ++i) {
    const Span& span = spans[i];
    if (span.begin >= span.end) continue;
    size_t overlap = 0;
    if (span.overlap_from_prev && cfg.chunk_overlap > 0 && !chunks.empty()) {
      overlap = std::min(cfg.chunk_overlap, prev_total_len);
    }
    Chunk chunk;
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "#c%04zu", chunks.size());
    chunk.chunk_id = doc.doc_id + suffix;
    chunk.doc_id = doc.doc_id;
    chunk.index = chunks.size();
    chunk.text = std::string(text.slice(span.begin - overlap, span.end));
    chunk.pos = span.begin;
    chunk.overlap_len = overlap;
    chunk.struct_label = span.label;
    chunk.heading_level = span.heading_level;
    chunk.state = ChunkState::Pending;
    prev_total_len = (span.end - span.begin) + overlap;
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

}  // namespace

std::string_view Chunk::core_text() const {
  if (overlap_len == 0) return text;
  auto offsets = utf8::code_point_offsets(text);
  size_t skip = std::min(overlap_len, offsets.size() - 1);
  return std::string_view(text).substr(offsets[skip]);
}

const char* to_string(StructLabel label) {
  switch (label) {
    case StructLabel::Heading: return "HEADING";
    case StructLabel::Body: return "BODY";
    case StructLabel::ListItem: return "LIST_ITEM";
    case StructLabel::CodeBlock: return "CODE_BLOCK";
    case StructLabel::Table: return "TABLE";
  }
  return "BODY";
}

const char* to_string(ChunkState state) {
  switch (state) {
    case ChunkState::Pending: return "PENDING";
    case ChunkState::Reading: return "READING";
    case ChunkState::Verified: return "VERIFIED";
    case ChunkState::Archived: return "ARCHIVED";
  }
  return "PENDING";
}

const char* to_string(ChunkStrategy strategy) {
  switch (strategy) {
    case ChunkStrategy::FixedSize: return "FIXED_SIZE";
    case ChunkStrategy::Semantic: return "SEMANTIC";
    case ChunkStrategy::Paragraph: return "PARAGRAPH";
    case ChunkStrategy::Structural: return "STRUCTURAL";
  }
  return "STRUCTURAL";
}

ChunkStrategy strategy_from_string(std::string_view name) {
  if (name == "FIXED_SIZE") return ChunkStrategy::FixedSize;
  if (name == "SEMANTIC") return ChunkStrategy::Semantic;
  if (name == "PARAGRAPH") return ChunkStrategy::Paragraph;
  if (name == "STRUCTURAL") return ChunkStrategy::Structural;
  throw Error(ErrorCode::InvalidConfig, "unknown chunk strategy '" + std::string(name) + "'");
}

ChunkState chunk_state_from_string(std::string_view name) {
  if (name == "PENDING") return ChunkState::Pending;
  if (name == "READING") return ChunkState::Reading;
  if (name == "VERIFIED") return ChunkState::Verified;
  if (name == "ARCHIVED") return ChunkState::Archived;
  throw Error(ErrorCode::InvalidConfig, "unknown chunk state '" + std::string(name) + "'");
}

StructLabel struct_label_from_string(std::string_view name) {
  if (name == "HEADING") return StructLabel::Heading;
  if (name == "BODY") return StructLabel::Body;
  if (name == "LIST_ITEM") return StructLabel::ListItem;
  if (name == "CODE_BLOCK") return StructLabel::CodeBlock;
  if (name == "TABLE") return StructLabel::Table;
  throw Error(ErrorCode::InvalidConfig, "unknown struct label '" + std::string(name) + "'");
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkerConfig& cfg) {
  if (doc.body.empty()) {
    throw Error(ErrorCode::EmptyDocument, "document '" + doc.doc_id + "' has an empty body");
  }
  if (cfg.chunk_size == 0 || cfg.chunk_overlap >= cfg.chunk_size) {
    throw Error(ErrorCode::InvalidConfig, "require 0 <= chunk_overlap < chunk_size, chunk_size > 0");
  }

  CpText text(doc.body);
  std::vector<Span> spans;
  switch (cfg.strategy) {
    case ChunkStrategy::FixedSize: spans = chunk_fixed_size(text, cfg); break;
    case ChunkStrategy::Semantic: spans = chunk_semantic(text, cfg); break;
    case ChunkStrategy::Paragraph: spans = chunk_paragraph(text, cfg); break;
    case ChunkStrategy::Structural: spans = chunk_structural(text, cfg); break;
  }
  return assemble(doc, text, spans, cfg);
}

std::vector<Document> load_corpus(const std::filesystem::path& manifest_path) {
  std::error_code ec;
  if (!std::filesystem::exists(manifest_path, ec) || ec) {
    throw Error(ErrorCode::ManifestNotFound, manifest_path.string());
  }
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::ManifestNotFound, manifest_path.string());

  std::vector<Document> docs;
  std::set<std::string> seen;
  std::filesystem::path base = manifest_path.parent_path();
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::UnreadableFile,
                  manifest_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (record.contains("format")) continue;  // header record

    Document doc;
    doc.doc_id = record.value("doc_id", "");
    doc.title = record.value("title", "");
    std::string rel = record.value("path", "");
    if (doc.doc_id.empty() || rel.empty()) {
      throw Error(ErrorCode::UnreadableFile, manifest_path.string() + ":" +
                                                 std::to_string(line_no) +
                                                 ": record needs doc_id and path");
    }
    if (!seen.insert(doc.doc_id).second) {
      throw Error(ErrorCode::DuplicateDocId, doc.doc_id);
    }
    std::filesystem::path file = base / rel;
    std::ifstream body_in(file, std::ios::binary);
    if (!body_in) throw Error(ErrorCode::UnreadableFile, file.string());
    std::ostringstream buffer;
    buffer << body_in.rdbuf();
    doc.body = buffer.str();
    doc.source_uri = file.string();
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace kgfuse::corpus

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kgfuse::utf8 {

// Byte offset of every code point in `text`, plus a trailing sentinel equal
// to text.size(). Malformed bytes are treated as single-byte code points so
// offsets always cover the full input.
std::vector<size_t> code_point_offsets(std::string_view text);

// Number of code points in `text`.
size_t length(std::string_view text);

// Decodes the code point starting at byte `pos`; advances `pos` past it.
// Malformed sequences decode as U+FFFD and advance one byte.
char32_t decode(std::string_view text, size_t& pos);

bool is_space(char32_t cp);

// Printable for quality-gate purposes: excludes C0/C1 controls, DEL and the
// replacement character.
bool is_printable(char32_t cp);

}  // namespace kgfuse::utf8

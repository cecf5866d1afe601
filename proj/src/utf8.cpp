#include "kgfuse/utf8.hpp"

namespace kgfuse::utf8 {

namespace {

size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // malformed lead byte
}

}  // namespace

std::vector<size_t> code_point_offsets(std::string_view text) {
  std::vector<size_t> offsets;
  offsets.reserve(text.size() + 1);
  size_t i = 0;
  while (i < text.size()) {
    offsets.push_back(i);
    size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
  }
  offsets.push_back(text.size());
  return offsets;
}

size_t length(std::string_view text) {
  size_t count = 0;
  size_t i = 0;
  while (i < text.size()) {
    size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
    ++count;
  }
  return count;
}

char32_t decode(std::string_view text, size_t& pos) {
  unsigned char lead = static_cast<unsigned char>(text[pos]);
  size_t len = sequence_length(lead);
  if (pos + len > text.size()) {
    ++pos;
    return 0xFFFD;
  }
  char32_t cp = 0;
  switch (len) {
    case 1:
      cp = lead;
      break;
    case 2:
      cp = lead & 0x1F;
      break;
    case 3:
      cp = lead & 0x0F;
      break;
    case 4:
      cp = lead & 0x07;
      break;
  }
  for (size_t k = 1; k < len; ++k) {
    unsigned char cont = static_cast<unsigned char>(text[pos + k]);
    if ((cont >> 6) != 0x2) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  pos += len;
  return cp;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
         cp == U'\v' || cp == 0x00A0 || cp == 0x3000;
}

bool is_printable(char32_t cp) {
  if (cp < 0x20 && cp != U'\t') return false;  // C0 controls
  if (cp == 0x7F) return false;                // DEL
  if (cp >= 0x80 && cp <= 0x9F) return false;  // C1 controls
  if (cp == 0xFFFD) return false;              // replacement char
  return true;
}

}  // namespace kgfuse::utf8

#include "kgfuse/gate.hpp"

#include <algorithm>

#include "kgfuse/utf8.hpp"

namespace kgfuse::toolkit {

const char* to_string(GateRule rule) {
  switch (rule) {
    case GateRule::Length: return "LENGTH";
    case GateRule::PrintableRatio: return "PRINTABLE_RATIO";
    case GateRule::SentenceFragment: return "SENTENCE_FRAGMENT";
    case GateRule::CodeKeyword: return "CODE_KEYWORD";
    case GateRule::MathFormula: return "MATH_FORMULA";
    case GateRule::PunctuationFlood: return "PUNCTUATION_FLOOD";
    case GateRule::PdfGarbled: return "PDF_GARBLED";
    case GateRule::GenericHeading: return "GENERIC_HEADING";
  }
  return "LENGTH";
}

GateConfig GateConfig::defaults() {
  GateConfig config;
  config.fragment_starters = {"the", "a",  "an",  "this", "that",  "these", "those", "and",
                              "or",  "but", "because", "which", "when", "where", "it", "its",
                              "we",  "they", "is", "are", "was",  "were", "of",   "in",
                              "on",  "for", "with", "to",  "as"};
  config.code_markers = {"def ",    "return ", "import ",  "#include", "void ",  "int main",
                         "function ", "lambda ", "printf",  "print(",   "self.",  "();",
                         "{}",      "=>",      "&&",       "||",       "==",     "!=",
                         "</",      "/>",      "std::",    "nullptr",  "0x"};
  config.formula_markers = {"\\frac", "\\sum", "\\alpha", "\\beta", "\\cdot", "\\in",
                            "\\mathbb", "\\leq", "\\geq", "\\times", "∑", "∫",
                            "∂", "√", "≤", "≥", "≠", "±", "≈", "^{", "_{", "$$", "="};
  config.garbled_markers = {"\xEF\xBF\xBD", "(cid:", "\f"};  // U+FFFD, CID refs, form feed
  config.generic_headings = {"abstract",      "introduction",   "background",
                             "related work",  "method",         "methods",
                             "methodology",   "approach",       "experiments",
                             "experiment",    "evaluation",     "results",
                             "discussion",    "conclusion",     "conclusions",
                             "references",    "appendix",       "acknowledgments",
                             "acknowledgements", "future work", "overview",
                             "summary",       "contents",       "table of contents",
                             "preliminaries", "motivation",     "limitations"};
  return config;
}

namespace {

bool is_ascii_punct(char32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
         (cp >= 0x7B && cp <= 0x7E);
}

bool is_punct(char32_t cp) {
  if (is_ascii_punct(cp)) return true;
  if (cp >= 0x2000 && cp <= 0x206F) return true;  // general punctuation
  if (cp >= 0x3000 && cp <= 0x303F) return true;  // CJK symbols and punctuation
  return false;
}

std::vector<std::string> tokens_of(const std::string& name) {
  std::vector<std::string> tokens;
  std::string token;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!token.empty()) tokens.push_back(token);
      token.clear();
    } else {
      token.push_back(c);
    }
  }
  if (!token.empty()) tokens.push_back(token);
  return tokens;
}

std::string lower_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

// Strips leading section numbering ("1.", "2.3", "IV.", "#") and surrounding
// whitespace before the stoplist comparison.
std::string strip_heading_prefix(const std::string& name) {
  size_t i = 0;
  size_t n = name.size();
  while (i < n && (name[i] == ' ' || name[i] == '#')) ++i;
  size_t j = i;
  while (j < n && ((name[j] >= '0' && name[j] <= '9') || name[j] == '.' || name[j] == ' ' ||
                   name[j] == ')' || name[j] == 'I' || name[j] == 'V' || name[j] == 'X')) {
    ++j;
  }
  // only treat it as numbering if it ended at a word boundary
  if (j > i && j < n && (j == i || name[j - 1] == '.' || name[j - 1] == ' ' || name[j - 1] == ')')) {
    i = j;
  }
  size_t end = n;
  while (end > i && (name[end - 1] == ' ' || name[end - 1] == '\t')) --end;
  while (i < end && (name[i] == ' ' || name[i] == '\t')) ++i;
  return name.substr(i, end - i);
}

}  // namespace

GateResult quality_gate(const std::string& name, const GateConfig& config) {
  // decode once; every rule reads code points
  std::vector<char32_t> cps;
  {
    size_t pos = 0;
    while (pos < name.size()) cps.push_back(utf8::decode(name, pos));
  }

  // (1) length
  if (cps.size() > config.max_length) return {false, GateRule::Length};

  // (2) printable ratio
  if (!cps.empty()) {
    size_t printable = 0;
    for (char32_t cp : cps) printable += utf8::is_printable(cp) ? 1 : 0;
    if (static_cast<double>(printable) / static_cast<double>(cps.size()) <
        config.min_printable_ratio) {
      return {false, GateRule::PrintableRatio};
    }
  }

  // (3) sentence fragment
  {
    auto tokens = tokens_of(name);
    if (tokens.empty()) return {false, GateRule::SentenceFragment};
    if (tokens.size() > config.fragment_max_tokens) return {false, GateRule::SentenceFragment};
    if (tokens.size() >= 2) {
      char last = name.back();
      if (last == '.' || last == ',' || last == ';' || last == ':') {
        return {false, GateRule::SentenceFragment};
      }
    }
    for (const auto& starter : config.fragment_starters) {
      if (tokens.front() == starter) return {false, GateRule::SentenceFragment};
    }
  }

  // (4) code keywords
  for (const auto& marker : config.code_markers) {
    if (name.find(marker) != std::string::npos) return {false, GateRule::CodeKeyword};
  }

  // (5) mathematical formulas
  for (const auto& marker : config.formula_markers) {
    if (name.find(marker) != std::string::npos) return {false, GateRule::MathFormula};
  }

  // (6) punctuation flooding
  if (!cps.empty()) {
    size_t punct = 0;
    for (char32_t cp : cps) punct += is_punct(cp) ? 1 : 0;
    if (static_cast<double>(punct) / static_cast<double>(cps.size()) > config.max_punct_ratio) {
      return {false, GateRule::PunctuationFlood};
    }
  }

  // (7) PDF garbled markers
  for (const auto& marker : config.garbled_markers) {
    if (name.find(marker) != std::string::npos) return {false, GateRule::PdfGarbled};
  }
  if (config.garbled_repeat_run > 1 && cps.size() >= config.garbled_repeat_run) {
    size_t run = 1;
    for (size_t i = 1; i < cps.size(); ++i) {
      run = cps[i] == cps[i - 1] ? run + 1 : 1;
      bool wordish = (cps[i] >= U'a' && cps[i] <= U'z') || (cps[i] >= U'A' && cps[i] <= U'Z') ||
                     (cps[i] >= U'0' && cps[i] <= U'9') || cps[i] == U' ';
      if (run >= config.garbled_repeat_run && !wordish) return {false, GateRule::PdfGarbled};
    }
  }

  // (8) generic headings
  {
    std::string stripped = lower_ascii(strip_heading_prefix(name));
    for (const auto& heading : config.generic_headings) {
      if (stripped == heading) return {false, GateRule::GenericHeading};
    }
  }

  return {true, std::nullopt};
}

nlohmann::json GateConfig::to_json() const {
  return nlohmann::json{{"max_length", max_length},
                        {"min_printable_ratio", min_printable_ratio},
                        {"fragment_max_tokens", fragment_max_tokens},
                        {"fragment_starters", fragment_starters},
                        {"code_markers", code_markers},
                        {"formula_markers", formula_markers},
                        {"max_punct_ratio", max_punct_ratio},
                        {"garbled_markers", garbled_markers},
                        {"garbled_repeat_run", garbled_repeat_run},
                        {"generic_headings", generic_headings}};
}

GateConfig GateConfig::from_json(const nlohmann::json& j) {
  GateConfig config = defaults();
  config.max_length = j.value("max_length", config.max_length);
  config.min_printable_ratio = j.value("min_printable_ratio", config.min_printable_ratio);
  config.fragment_max_tokens = j.value("fragment_max_tokens", config.fragment_max_tokens);
  if (j.contains("fragment_starters")) config.fragment_starters = j["fragment_starters"];
  if (j.contains("code_markers")) config.code_markers = j["code_markers"];
  if (j.contains("formula_markers")) config.formula_markers = j["formula_markers"];
  config.max_punct_ratio = j.value("max_punct_ratio", config.max_punct_ratio);
  if (j.contains("garbled_markers")) config.garbled_markers = j["garbled_markers"];
  config.garbled_repeat_run = j.value("garbled_repeat_run", config.garbled_repeat_run);
  if (j.contains("generic_headings")) config.generic_headings = j["generic_headings"];
  return config;
}

}  // namespace kgfuse::toolkit

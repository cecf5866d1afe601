#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace kgfuse::toolkit {

// Rules run in this order (cheap to expensive); the first violation wins.
enum class GateRule {
  Length = 1,
  PrintableRatio,
  SentenceFragment,
  CodeKeyword,
  MathFormula,
  PunctuationFlood,
  PdfGarbled,
  GenericHeading,
};

const char* to_string(GateRule rule);

// Default pattern set for the heuristic rules; everything is data so
// deployments can tune it from one place.
struct GateConfig {
  size_t max_length = 60;  // Unicode code points
  double min_printable_ratio = 0.7;

  size_t fragment_max_tokens = 12;
  std::vector<std::string> fragment_starters;  // lowercase function words

  std::vector<std::string> code_markers;
  std::vector<std::string> formula_markers;

  double max_punct_ratio = 0.4;

  std::vector<std::string> garbled_markers;
  size_t garbled_repeat_run = 4;

  std::vector<std::string> generic_headings;

  static GateConfig defaults();
  static GateConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct GateResult {
  bool pass = true;
  std::optional<GateRule> rule;  // first violated rule when !pass

  explicit operator bool() const { return pass; }
};

GateResult quality_gate(const std::string& name, const GateConfig& config = GateConfig::defaults());

}  // namespace kgfuse::toolkit

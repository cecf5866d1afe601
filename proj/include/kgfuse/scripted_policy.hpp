#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/agent.hpp"

namespace kgfuse::agent {

// Deterministic fixture-driven policy: per chunk it searches each candidate
// concept, merges/updates when a synonymous entity already exists, creates
// when evidence passes the gate, defers with todos/reviews otherwise, then
// proposes relations and finally returns the paragraph summary. Every
// pipeline stage is testable without a language model.
class ScriptedPolicy : public DecisionPolicy {
 public:
  explicit ScriptedPolicy(nlohmann::json fixture);
  static ScriptedPolicy from_file(const std::filesystem::path& file);

  Decision decide(const PromptContext& context) override;
  std::optional<schema::CandidateSchema> propose_schema(
      const std::vector<std::string>& samples) override;
  Decision handle_todo(const toolkit::TodoItem& todo, const PromptContext& context) override;

 private:
  struct Progress {
    int phase = 0;
    std::vector<std::string> searched;     // candidate names in search order
    std::vector<std::string> entity_ops;   // names in phase-1 op order
    std::vector<nlohmann::json> relations; // fixture relations in emit order
  };

  const nlohmann::json* chunk_script(const std::string& chunk_id) const;
  static std::string lower(std::string s);

  nlohmann::json fixture_;
  std::map<std::string, Progress> progress_;
  uint64_t next_call_ = 0;
  std::string call_id() { return "sc" + std::to_string(next_call_++); }
};

}  // namespace kgfuse::agent

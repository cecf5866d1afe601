#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/corpus.hpp"
#include "kgfuse/embedder.hpp"

namespace kgfuse::schema {

enum class RelationState { Active, Proposed };

struct RelationType {
  std::string name;  // UPPER_SNAKE_CASE
  std::string domain_label;
  std::string range_label;
  double quality_score = 1.0;
  RelationState state = RelationState::Active;
};

struct SchemaProfile {
  std::string domain_label;
  std::vector<RelationType> relation_types;
  std::vector<std::string> entity_labels;
  std::vector<std::string> attribute_patterns;
  uint64_t version = 1;

  const RelationType* find_relation(const std::string& name) const;
  bool has_entity_label(const std::string& label) const;

  nlohmann::json to_json() const;
  static SchemaProfile from_json(const nlohmann::json& j);
};

struct CandidateRelation {
  std::string name;
  std::string domain_label;
  std::string range_label;
  double quality_score = 1.0;
};

struct CandidateSchema {
  std::string domain_label;
  std::vector<CandidateRelation> relations;
  std::vector<std::string> entity_labels;
  std::vector<std::string> attribute_patterns;
};

struct ValidationResult {
  std::vector<std::string> accepted;
  std::vector<std::pair<std::string, std::string>> merged;    // candidate -> existing
  std::vector<std::pair<std::string, std::string>> rejected;  // name -> reason
  std::vector<std::string> candidates;                        // retained, pending validation
};

struct EvolveResult {
  std::string relation_name;
  bool reused = false;
  bool proposed = false;
};

struct SchemaLedgerEntry {
  uint64_t version = 0;
  std::string change;
  std::string detail;
  uint64_t timestamp = 0;
};

// Scripted/LLM discovery boundary: returns a candidate schema for the given
// document-prefix samples, or nullopt (treated like detection failure).
using DiscoveryFn =
    std::function<std::optional<CandidateSchema>(const std::vector<std::string>& samples)>;

struct OrchestratorConfig {
  double reuse_similarity = 0.9;      // Phase 0 domain-profile reuse
  double duplicate_similarity = 0.9;  // semantic-duplicate merge
  double quality_floor = 0.5;
  size_t sample_docs = 3;
  size_t sample_chars = 2000;  // code points per document prefix
  uint64_t cache_ttl_ticks = 1000;
};

// Phases 0-4: domain detection, discovery, validation, activation,
// evolution. Detection failure always falls back to a usable bootstrap
// profile. The cache mirrors the short-lived schema cache role with a
// deterministic logical TTL.
class SchemaOrchestrator {
 public:
  explicit SchemaOrchestrator(vec::EmbeddingProvider& embedder, OrchestratorConfig config = {})
      : embedder_(embedder), config_(config) {}

  // Registers a stored domain profile for Phase 0 reuse checks.
  void register_domain(const SchemaProfile& profile, const std::string& sample_text);

  SchemaProfile bootstrap(const std::vector<corpus::Document>& docs, const DiscoveryFn& discover);

  ValidationResult validate(const std::vector<CandidateRelation>& candidates,
                            SchemaProfile& profile);

  EvolveResult evolve(SchemaProfile& profile, const CandidateRelation& pattern);

  // Manual promotion is the only path from PROPOSED to ACTIVE.
  bool promote(SchemaProfile& profile, const std::string& relation_name);

  const std::vector<SchemaLedgerEntry>& activation_ledger() const { return ledger_; }
  // Line-delimited ledger export: one record per activation/evolution event.
  void export_ledger(const std::filesystem::path& file) const;

  void cache_put(const SchemaProfile& profile);
  std::optional<SchemaProfile> cache_get(const std::string& domain_label);

  // "works at" -> WORKS_AT; empty result means unnormalizable.
  static std::string normalize_relation_name(const std::string& raw);
  static bool is_upper_snake(const std::string& name);
  static SchemaProfile fallback_profile();

  double name_similarity(const std::string& a, const std::string& b) const;

 private:
  void record(uint64_t version, const std::string& change, const std::string& detail);
  std::vector<std::string> sample_prefixes(const std::vector<corpus::Document>& docs) const;

  vec::EmbeddingProvider& embedder_;
  OrchestratorConfig config_;
  std::vector<std::pair<SchemaProfile, std::vector<double>>> stored_domains_;
  std::vector<SchemaLedgerEntry> ledger_;
  uint64_t ledger_clock_ = 0;

  struct CacheEntry {
    SchemaProfile profile;
    uint64_t expires_at = 0;
  };
  std::map<std::string, CacheEntry> cache_;
  uint64_t cache_clock_ = 0;
};

}  // namespace kgfuse::schema

#include "kgfuse/schema.hpp"

#include <algorithm>
#include <fstream>

#include "kgfuse/errors.hpp"
#include "kgfuse/utf8.hpp"

namespace kgfuse::schema {

using json = nlohmann::json;

const RelationType* SchemaProfile::find_relation(const std::string& name) const {
  for (const auto& relation : relation_types) {
    if (relation.name == name) return &relation;
  }
  return nullptr;
}

bool SchemaProfile::has_entity_label(const std::string& label) const {
  return std::find(entity_labels.begin(), entity_labels.end(), label) != entity_labels.end();
}

json SchemaProfile::to_json() const {
  json relations = json::array();
  for (const auto& relation : relation_types) {
    relations.push_back({{"name", relation.name},
                         {"domain_label", relation.domain_label},
                         {"range_label", relation.range_label},
                         {"quality_score", relation.quality_score},
                         {"state", relation.state == RelationState::Active ? "ACTIVE" : "PROPOSED"}});
  }
  return json{{"format", "kgfuse.schema"},
              {"version", 1},
              {"domain_label", domain_label},
              {"profile_version", version},
              {"relation_types", relations},
              {"entity_labels", entity_labels},
              {"attribute_patterns", attribute_patterns}};
}

SchemaProfile SchemaProfile::from_json(const json& j) {
  SchemaProfile profile;
  profile.domain_label = j.at("domain_label").get<std::string>();
  profile.version = j.at("profile_version").get<uint64_t>();
  for (const json& r : j.at("relation_types")) {
    RelationType relation;
    relation.name = r.at("name").get<std::string>();
    relation.domain_label = r.at("domain_label").get<std::string>();
    relation.range_label = r.at("range_label").get<std::string>();
    relation.quality_score = r.at("quality_score").get<double>();
    relation.state =
        r.at("state").get<std::string>() == "ACTIVE" ? RelationState::Active : RelationState::Proposed;
    profile.relation_types.push_back(std::move(relation));
  }
  profile.entity_labels = j.at("entity_labels").get<std::vector<std::string>>();
  profile.attribute_patterns = j.at("attribute_patterns").get<std::vector<std::string>>();
  return profile;
}

std::string SchemaOrchestrator::normalize_relation_name(const std::string& raw) {
  std::string out;
  bool pending_sep = false;
  for (char c : raw) {
    bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (!alnum) {
      pending_sep = !out.empty();
      continue;
    }
    if (pending_sep) {
      out.push_back('_');
      pending_sep = false;
    }
    out.push_back((c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c);
  }
  if (out.empty() || !(out[0] >= 'A' && out[0] <= 'Z')) return "";
  return out;
}

bool SchemaOrchestrator::is_upper_snake(const std::string& name) {
  if (name.empty() || !(name[0] >= 'A' && name[0] <= 'Z')) return false;
  for (char c : name) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

SchemaProfile SchemaOrchestrator::fallback_profile() {
  SchemaProfile profile;
  profile.domain_label = "general";
  profile.entity_labels = {"Concept", "Method", "System", "Dataset", "Metric", "Person",
                           "Organization"};
  for (const char* name : {"RELATED_TO", "IS_A", "PART_OF"}) {
    profile.relation_types.push_back({name, "", "", 1.0, RelationState::Active});
  }
  profile.attribute_patterns = {"definition", "source"};
  profile.version = 1;
  return profile;
}

double SchemaOrchestrator::name_similarity(const std::string& a, const std::string& b) const {
  auto words = [](const std::string& name) {
    std::string out;
    for (char c : name) {
      out.push_back(c == '_' ? ' ' : static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
    }
    return out;
  };
  return vec::cosine(embedder_.embed(words(a)), embedder_.embed(words(b)));
}

void SchemaOrchestrator::record(uint64_t version, const std::string& change,
                                const std::string& detail) {
  ledger_.push_back({version, change, detail, ++ledger_clock_});
}

std::vector<std::string> SchemaOrchestrator::sample_prefixes(
    const std::vector<corpus::Document>& docs) const {
  std::vector<std::string> samples;
  for (const auto& doc : docs) {
    if (samples.size() >= config_.sample_docs) break;
    auto offsets = utf8::code_point_offsets(doc.body);
    size_t cp = std::min(config_.sample_chars, offsets.size() - 1);
    samples.push_back(doc.body.substr(0, offsets[cp]));
  }
  return samples;
}

void SchemaOrchestrator::register_domain(const SchemaProfile& profile,
                                         const std::string& sample_text) {
  stored_domains_.push_back({profile, embedder_.embed(sample_text)});
}

SchemaProfile SchemaOrchestrator::bootstrap(const std::vector<corpus::Document>& docs,
                                            const DiscoveryFn& discover) {
  std::vector<std::string> samples = sample_prefixes(docs);

  // Phase 0: domain detection / reuse
  if (!samples.empty() && !stored_domains_.empty()) {
    std::string joined;
    for (const auto& sample : samples) joined += sample;
    std::vector<double> probe = embedder_.embed(joined);
    for (const auto& [profile, embedding] : stored_domains_) {
      if (vec::cosine(probe, embedding) >= config_.reuse_similarity) {
        record(profile.version, "domain_reused", profile.domain_label);
        cache_put(profile);
        return profile;
      }
    }
  }

  // Phase 1: discovery (scripted fixture or LLM); failure falls back
  std::optional<CandidateSchema> discovered;
  if (discover) {
    try {
      discovered = discover(samples);
    } catch (const std::exception&) {
      discovered = std::nullopt;
    }
  }
  if (!discovered) {
    SchemaProfile fallback = fallback_profile();
    record(fallback.version, "bootstrap_fallback", fallback.domain_label);
    cache_put(fallback);
    return fallback;
  }

  // Phases 2-3: validation + activation
  SchemaProfile profile;
  profile.domain_label = discovered->domain_label.empty() ? "general" : discovered->domain_label;
  profile.entity_labels = discovered->entity_labels;
  if (profile.entity_labels.empty()) profile.entity_labels = fallback_profile().entity_labels;
  profile.attribute_patterns = discovered->attribute_patterns;
  profile.version = 1;
  validate(discovered->relations, profile);
  record(profile.version, "schema_activated", profile.domain_label);
  cache_put(profile);
  return profile;
}

ValidationResult SchemaOrchestrator::validate(const std::vector<CandidateRelation>& candidates,
                                              SchemaProfile& profile) {
  ValidationResult result;
  for (const auto& candidate : candidates) {
    std::string name = is_upper_snake(candidate.name) ? candidate.name
                                                      : normalize_relation_name(candidate.name);
    if (name.empty()) {
      result.rejected.push_back({candidate.name, "unnormalizable name"});
      continue;
    }
    if (candidate.quality_score < config_.quality_floor) {
      result.rejected.push_back({name, "quality score below floor"});
      continue;
    }
    if (!candidate.domain_label.empty() && !profile.has_entity_label(candidate.domain_label)) {
      result.rejected.push_back({name, "unresolvable domain label"});
      continue;
    }
    if (!candidate.range_label.empty() && !profile.has_entity_label(candidate.range_label)) {
      result.rejected.push_back({name, "unresolvable range label"});
      continue;
    }

    const RelationType* existing = profile.find_relation(name);
    if (existing) {
      if (existing->state == RelationState::Active) {
        result.merged.push_back({name, existing->name});
      } else {
        result.candidates.push_back(name);
      }
      continue;
    }
    // semantic duplicate of an ACTIVE relation merges into it
    bool merged = false;
    for (const auto& relation : profile.relation_types) {
      if (relation.state != RelationState::Active) continue;
      if (name_similarity(name, relation.name) >= config_.duplicate_similarity) {
        result.merged.push_back({name, relation.name});
        merged = true;
        break;
      }
    }
    if (merged) continue;

    profile.relation_types.push_back(
        {name, candidate.domain_label, candidate.range_label, candidate.quality_score,
         RelationState::Active});
    record(profile.version, "relation_activated", name);
    result.accepted.push_back(name);
  }
  return result;
}

EvolveResult SchemaOrchestrator::evolve(SchemaProfile& profile, const CandidateRelation& pattern) {
  std::string name = is_upper_snake(pattern.name) ? pattern.name
                                                  : normalize_relation_name(pattern.name);
  if (name.empty()) name = "RELATED_TO";

  if (const RelationType* existing = profile.find_relation(name)) {
    return {existing->name, existing->state == RelationState::Active,
            existing->state == RelationState::Proposed};
  }
  for (const auto& relation : profile.relation_types) {
    if (relation.state != RelationState::Active) continue;
    if (name_similarity(name, relation.name) >= config_.duplicate_similarity) {
      return {relation.name, true, false};
    }
  }
  profile.relation_types.push_back(
      {name, pattern.domain_label, pattern.range_label, pattern.quality_score,
       RelationState::Proposed});
  profile.version += 1;
  record(profile.version, "relation_proposed", name);
  cache_put(profile);
  return {name, false, true};
}

bool SchemaOrchestrator::promote(SchemaProfile& profile, const std::string& relation_name) {
  for (auto& relation : profile.relation_types) {
    if (relation.name == relation_name && relation.state == RelationState::Proposed) {
      relation.state = RelationState::Active;
      profile.version += 1;
      record(profile.version, "relation_promoted", relation_name);
      cache_put(profile);
      return true;
    }
  }
  return false;
}

void SchemaOrchestrator::export_ledger(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << json{{"format", "kgfuse.schema_ledger"}, {"version", 1}}.dump() << "\n";
  for (const auto& entry : ledger_) {
    out << json{{"version", entry.version},
                {"change", entry.change},
                {"detail", entry.detail},
                {"timestamp", entry.timestamp}}
               .dump()
        << "\n";
  }
}

void SchemaOrchestrator::cache_put(const SchemaProfile& profile) {
  ++cache_clock_;
  cache_[profile.domain_label] = {profile, cache_clock_ + config_.cache_ttl_ticks};
}

std::optional<SchemaProfile> SchemaOrchestrator::cache_get(const std::string& domain_label) {
  ++cache_clock_;
  auto it = cache_.find(domain_label);
  if (it == cache_.end()) return std::nullopt;
  if (it->second.expires_at < cache_clock_) {
    cache_.erase(it);
    return std::nullopt;
  }
  return it->second.profile;
}

}  // namespace kgfuse::schema

#include "kgfuse/scripted_policy.hpp"

#include <fstream>

#include "kgfuse/errors.hpp"

namespace kgfuse::agent {

using json = nlohmann::json;

ScriptedPolicy::ScriptedPolicy(json fixture) : fixture_(std::move(fixture)) {
  if (!fixture_.is_object() || fixture_.value("format", "") != "kgfuse.script") {
    throw Error(ErrorCode::InvalidConfig, "scripted fixture must carry format kgfuse.script");
  }
}

ScriptedPolicy ScriptedPolicy::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  return ScriptedPolicy(json::parse(in));
}

std::string ScriptedPolicy::lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

const json* ScriptedPolicy::chunk_script(const std::string& chunk_id) const {
  auto chunks = fixture_.find("chunks");
  if (chunks == fixture_.end() || !chunks->is_object()) return nullptr;
  auto it = chunks->find(chunk_id);
  return it == chunks->end() ? nullptr : &*it;
}

std::optional<schema::CandidateSchema> ScriptedPolicy::propose_schema(
    const std::vector<std::string>&) {
  if (!fixture_.contains("schema")) return std::nullopt;
  const json& s = fixture_.at("schema");
  schema::CandidateSchema candidate;
  candidate.domain_label = s.value("domain_label", "general");
  candidate.entity_labels = s.value("entity_labels", std::vector<std::string>{});
  candidate.attribute_patterns = s.value("attribute_patterns", std::vector<std::string>{});
  for (const json& r : s.value("relations", json::array())) {
    candidate.relations.push_back({r.value("name", ""), r.value("domain_label", ""),
                                   r.value("range_label", ""), r.value("quality_score", 1.0)});
  }
  return candidate;
}

Decision ScriptedPolicy::handle_todo(const toolkit::TodoItem& todo, const PromptContext&) {
  return {true, "todo '" + todo.task + "' acknowledged", {}};
}

Decision ScriptedPolicy::decide(const PromptContext& context) {
  const json* script = chunk_script(context.chunk_id);
  if (!script) {
    return {true, "no durable knowledge in this paragraph", {}};
  }
  Progress& progress = progress_[context.chunk_id];
  const json candidates = script->value("candidates", json::array());
  const json relations = script->value("relations", json::array());

  while (true) {
    switch (progress.phase) {
      case 0: {  // Search: check the graph for every candidate concept
        progress.phase = 1;
        std::vector<toolkit::ToolCall> calls;
        for (const json& candidate : candidates) {
          std::string name = candidate.at("name").get<std::string>();
          progress.searched.push_back(name);
          calls.push_back({"search_kg",
                           json{{"query", name}, {"search_type", "fuzzy"}, {"limit", 5}},
                           call_id()});
          calls.push_back(
              {"explore_fusion", json{{"query", name}, {"top_k", 3}}, call_id()});
        }
        if (!calls.empty()) return {false, "", std::move(calls)};
        break;
      }
      case 1: {  // Verify + Construct entities
        progress.phase = 2;
        std::vector<toolkit::ToolCall> calls;

        // the tail of the observation list holds our search results in order
        std::map<std::string, const json*> search_results;
        if (context.observations) {
          size_t expect = progress.searched.size() * 2;
          const auto& obs = *context.observations;
          size_t start = obs.size() >= expect ? obs.size() - expect : 0;
          size_t searched_i = 0;
          for (size_t i = start; i < obs.size() && searched_i < progress.searched.size(); ++i) {
            if (obs[i].value("tool", "") != "search_kg") continue;
            search_results[progress.searched[searched_i]] = &obs[i];
            ++searched_i;
          }
        }

        for (const json& candidate : candidates) {
          std::string name = candidate.at("name").get<std::string>();
          // synonymous entity present? (exact name/alias hit in the search)
          std::string synonym;
          auto it = search_results.find(name);
          if (it != search_results.end() && it->second->value("ok", false)) {
            for (const json& match : it->second->at("result").at("matches")) {
              if (match.value("kind", "") != "entity") continue;
              if (lower(match.value("label", "")) == lower(name)) {
                synonym = match.value("label", "");
                break;
              }
              for (const json& alias : match.value("aliases", json::array())) {
                if (lower(alias.get<std::string>()) == lower(name)) {
                  synonym = match.value("label", "");
                  break;
                }
              }
              if (!synonym.empty()) break;
            }
          }

          if (!synonym.empty()) {
            json updates = json::object();
            if (candidate.contains("description")) updates["description"] = candidate["description"];
            if (candidate.contains("aliases")) updates["aliases"] = candidate["aliases"];
            if (updates.empty()) updates["last_seen_chunk"] = context.chunk_id;
            calls.push_back({"update_entity",
                             json{{"entity_name", synonym},
                                  {"updates", updates},
                                  {"reason", "supplemented from " + context.chunk_id},
                                  {"source_chunk", context.chunk_id},
                                  {"evidence", candidate.value("evidence", "")}},
                             call_id()});
            progress.entity_ops.push_back(name);
          } else if (!candidate.value("evidence", "").empty()) {
            json args{{"name", name},
                      {"entity_type", candidate.value("entity_type", "Concept")},
                      {"source_chunk", context.chunk_id},
                      {"evidence", candidate.at("evidence").get<std::string>()},
                      {"certainty", candidate.value("certainty", 1.0)}};
            if (candidate.contains("description")) args["description"] = candidate["description"];
            if (candidate.contains("aliases")) args["aliases"] = candidate["aliases"];
            if (candidate.contains("properties")) args["properties"] = candidate["properties"];
            calls.push_back({"create_entity", std::move(args), call_id()});
            progress.entity_ops.push_back(name);
          } else {
            calls.push_back({"create_todo",
                             json{{"task", "gather evidence for candidate '" + name + "'"},
                                  {"todo_type", "verify"},
                                  {"related_entity", name}},
                             call_id()});
          }
        }
        for (const json& merge : script->value("merges", json::array())) {
          json args{{"target_name", merge.at("target_name").get<std::string>()},
                    {"source_name", merge.at("source_name").get<std::string>()}};
          if (merge.contains("evidence")) {
            args["evidence"] = merge["evidence"];
            args["source_chunk"] = context.chunk_id;
          }
          calls.push_back({"merge_entity", std::move(args), call_id()});
        }
        if (!calls.empty()) return {false, "", std::move(calls)};
        break;
      }
      case 2: {  // Construct relations; queue fixture todos/reviews
        progress.phase = 3;
        std::vector<toolkit::ToolCall> calls;
        for (const json& relation : relations) {
          progress.relations.push_back(relation);
          calls.push_back({"create_relation",
                           json{{"head", relation.at("head").get<std::string>()},
                                {"relation_type", relation.at("relation_type").get<std::string>()},
                                {"tail", relation.at("tail").get<std::string>()},
                                {"evidence", relation.value("evidence", "")},
                                {"source_chunk", context.chunk_id},
                                {"certainty", relation.value("certainty", 1.0)}},
                           call_id()});
        }
        for (const json& todo : script->value("todos", json::array())) {
          calls.push_back({"create_todo",
                           json{{"task", todo.at("task").get<std::string>()},
                                {"todo_type", todo.value("todo_type", "follow_up")},
                                {"related_entity", todo.value("related_entity", "")},
                                {"priority", todo.value("priority", 0)}},
                           call_id()});
        }
        for (const json& review : script->value("reviews", json::array())) {
          calls.push_back({"mark_for_review",
                           json{{"subject", review.at("subject").get<std::string>()},
                                {"reason", review.value("reason", "scripted review")},
                                {"priority", review.value("priority", 0)}},
                           call_id()});
        }
        if (!calls.empty()) return {false, "", std::move(calls)};
        break;
      }
      case 3: {  // react to failed relation writes: unresolved endpoints defer
        progress.phase = 4;
        std::vector<toolkit::ToolCall> calls;
        if (context.observations && !progress.relations.empty()) {
          std::vector<const json*> relation_obs;
          for (const json& o : *context.observations) {
            if (o.value("tool", "") == "create_relation") relation_obs.push_back(&o);
          }
          // pair the most recent relation observations with the most recent
          // emitted relations (older ones may have left the bounded window)
          size_t n = progress.relations.size();
          size_t use = std::min(relation_obs.size(), n);
          for (size_t k = 0; k < use; ++k) {
            const json& observation = *relation_obs[relation_obs.size() - use + k];
            const json& relation = progress.relations[n - use + k];
            if (observation.value("ok", false)) continue;
            std::string code = observation.at("error").value("code", "");
            if (code == "NotFound" || code == "AmbiguousEndpoint") {
              calls.push_back(
                  {"create_todo",
                   json{{"task", "resolve endpoints for relation '" +
                                     relation.at("head").get<std::string>() + " -" +
                                     relation.at("relation_type").get<std::string>() + "-> " +
                                     relation.at("tail").get<std::string>() + "'"},
                        {"todo_type", "disambiguate"},
                        {"related_entity", relation.at("head").get<std::string>()}},
                   call_id()});
            }
          }
        }
        if (!calls.empty()) return {false, "", std::move(calls)};
        break;
      }
      default:
        return {true, script->value("summary", "paragraph processed"), {}};
    }
  }
}

}  // namespace kgfuse::agent

#include "kgfuse/llm_policy.hpp"

#include <httplib.h>

#include "kgfuse/errors.hpp"

namespace kgfuse::agent {

using json = nlohmann::json;

HttpChatPolicy::HttpChatPolicy(LlmPolicyConfig config, Transport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

json HttpChatPolicy::build_request(const PromptContext& context, const LlmPolicyConfig& config) {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", context.to_text()}});
  if (context.observations) {
    for (const json& observation : *context.observations) {
      messages.push_back({{"role", "tool"},
                          {"tool_call_id", observation.value("call_id", "")},
                          {"content", observation.dump()}});
    }
  }
  messages.push_back(
      {{"role", "user"},
       {"content", "Continue the Read-Search-Verify-Construct loop. Either call tools or reply "
                   "with JSON {\"chunk_complete\": true, \"summary\": \"...\"}."}});

  json tools = json::array();
  json schemas = toolkit::Toolkit::tool_schemas();
  for (const auto& [name, schema] : schemas.items()) {
    tools.push_back({{"type", "function"},
                     {"function", {{"name", name}, {"parameters", schema}}}});
  }
  return json{{"model", config.model},
              {"temperature", config.temperature},
              {"messages", messages},
              {"tools", tools},
              {"tool_choice", "auto"}};
}

Decision HttpChatPolicy::parse_response(const json& response) {
  const json& choices = response.at("choices");
  if (choices.empty()) throw Error(ErrorCode::SchemaViolation, "empty choices in LLM response");
  const json& message = choices.at(0).at("message");

  Decision decision;
  if (message.contains("tool_calls") && !message.at("tool_calls").empty()) {
    for (const json& call : message.at("tool_calls")) {
      toolkit::ToolCall tool_call;
      tool_call.call_id = call.value("id", "");
      tool_call.tool_name = call.at("function").at("name").get<std::string>();
      const json& arguments = call.at("function").at("arguments");
      tool_call.args = arguments.is_string() ? json::parse(arguments.get<std::string>())
                                             : arguments;
      decision.tool_calls.push_back(std::move(tool_call));
    }
    return decision;
  }

  std::string content = message.value("content", "");
  json parsed = json::parse(content, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_object() && parsed.value("chunk_complete", false)) {
    decision.chunk_complete = true;
    decision.summary = parsed.value("summary", "");
  } else {
    // paragraph-completion text without the JSON wrapper still terminates
    decision.chunk_complete = true;
    decision.summary = content;
  }
  return decision;
}

json HttpChatPolicy::post(const json& request) {
  httplib::Client client(config_.host, config_.port);
  client.set_connection_timeout(static_cast<time_t>(config_.llm_timeout.count()), 0);
  client.set_read_timeout(static_cast<time_t>(config_.llm_timeout.count()), 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.insert({"Authorization", "Bearer " + config_.api_key});

  auto result = client.Post(config_.path, headers, request.dump(), "application/json");
  if (!result) {
    throw TransientError(ErrorCode::ConnectionLost, "LLM endpoint unreachable");
  }
  if (result->status == 429) {
    throw TransientError(ErrorCode::RateLimited, "LLM endpoint rate-limited the call");
  }
  if (result->status < 200 || result->status >= 300) {
    throw Error(ErrorCode::Internal, "LLM endpoint returned HTTP " + std::to_string(result->status));
  }
  return json::parse(result->body);
}

Decision HttpChatPolicy::decide(const PromptContext& context) {
  json request = build_request(context, config_);
  json response = transport_ ? transport_(request) : post(request);
  return parse_response(response);
}

}  // namespace kgfuse::agent

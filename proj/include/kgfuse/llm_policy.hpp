#pragma once

#include <chrono>
#include <functional>
#include <string>

#include <json.hpp>

#include "kgfuse/agent.hpp"

namespace kgfuse::agent {

// Chat-with-tools adapter speaking an OpenAI-style wire format over HTTP.
// Off the acceptance-test path; the transport is injectable so request
// building and response parsing stay unit-testable without a network.
struct LlmPolicyConfig {
  std::string host = "localhost";
  int port = 8000;
  std::string path = "/v1/chat/completions";
  std::string model = "deepseek-v4-flash";
  std::string api_key;
  double temperature = 0.3;  // tool calling / JSON generation
  std::chrono::seconds llm_timeout{120};
  std::chrono::seconds llm_total_timeout{240};
};

class HttpChatPolicy : public DecisionPolicy {
 public:
  using Transport = std::function<nlohmann::json(const nlohmann::json& request)>;

  explicit HttpChatPolicy(LlmPolicyConfig config, Transport transport = {});

  Decision decide(const PromptContext& context) override;

  static nlohmann::json build_request(const PromptContext& context, const LlmPolicyConfig& config);
  static Decision parse_response(const nlohmann::json& response);

 private:
  nlohmann::json post(const nlohmann::json& request);

  LlmPolicyConfig config_;
  Transport transport_;
};

}  // namespace kgfuse::agent

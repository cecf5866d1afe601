#pragma once

#include <json.hpp>

#include "kgfuse/scope.hpp"

namespace kgfuse {

inline nlohmann::json scope_to_json(const IsolationScope& scope) {
  return nlohmann::json{{"tenant_id", scope.tenant_id},
                        {"run_id", scope.run_id},
                        {"dataset", scope.dataset},
                        {"document_id", scope.document_id}};
}

inline IsolationScope scope_from_json(const nlohmann::json& j) {
  IsolationScope scope;
  scope.tenant_id = j.value("tenant_id", "default");
  scope.run_id = j.value("run_id", "");
  scope.dataset = j.value("dataset", "");
  scope.document_id = j.value("document_id", "");
  return scope;
}

}  // namespace kgfuse

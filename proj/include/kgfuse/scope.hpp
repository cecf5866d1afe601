#pragma once

#include <string>

namespace kgfuse {

// Tenant/run/dataset/document isolation fields carried by every stored
// object. Reads filter on a query scope; objects from different run_ids are
// never co-retrieved.
struct IsolationScope {
  std::string tenant_id = "default";
  std::string run_id;
  std::string dataset;
  std::string document_id;

  // A stored object matches a query scope when tenant and run_id are equal
  // and every non-empty optional field (dataset, document_id) of the query
  // matches. Query scopes must carry a run_id.
  bool matches(const IsolationScope& object) const {
    if (tenant_id != object.tenant_id) return false;
    if (run_id != object.run_id) return false;
    if (!dataset.empty() && dataset != object.dataset) return false;
    if (!document_id.empty() && document_id != object.document_id) return false;
    return true;
  }

  bool operator==(const IsolationScope& other) const = default;

  std::string key() const {
    return tenant_id + "\x1f" + run_id + "\x1f" + dataset + "\x1f" + document_id;
  }
};

// Monotonic per-run logical clock. Every persisted timestamp (provenance,
// alerts, schema ledger) ticks this clock so snapshots are byte-identical
// across reruns; the counter is saved and restored with store snapshots.
class LogicalClock {
 public:
  uint64_t tick() { return ++now_; }
  uint64_t now() const { return now_; }
  void restore(uint64_t value) { now_ = value; }

 private:
  uint64_t now_ = 0;
};

}  // namespace kgfuse

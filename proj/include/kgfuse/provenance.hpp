#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/scope.hpp"

namespace kgfuse::toolkit {

enum class ProvOperation { Create, Update, Merge, Delete };

const char* to_string(ProvOperation op);
ProvOperation prov_operation_from_string(std::string_view name);

// One record per write: the reverse-traceability unit. evidence_snippet is a
// verbatim substring of the source chunk's text (callers validate before
// appending; empty snippets are allowed for merges/deletes without fresh
// evidence).
struct ProvenanceRecord {
  std::string prov_id;
  std::string object_id;
  std::string object_kind;  // entity | relation | hypernode | chunk
  std::string doc_id;
  std::string source_chunk_id;
  std::string evidence_snippet;
  ProvOperation operation = ProvOperation::Create;
  double confidence = 1.0;
  uint64_t timestamp = 0;  // logical clock
  std::string detail;      // merge basis, update reason, PROPOSED-schema flag
};

// Synchronization alert: compensation actions and preserved write-back
// failures, consumed by the consistency checker.
struct AlertRecord {
  uint64_t seq = 0;
  uint64_t timestamp = 0;
  std::string object_id;
  std::string phase;   // EMBED | VECTOR_INSERT | WRITE_BACK | HYPER_VECTOR
  std::string action;  // COMPENSATED_DELETE | COMPENSATED_MARK | PRESERVED
  std::string message;
};

struct TraceFilter {
  std::optional<std::string> doc_id;
  std::optional<std::string> chunk_id;
  std::optional<std::string> object_id;  // entity or relation id
  std::optional<ProvOperation> operation;
};

// Append-only episodic store: provenance records plus the alert log, sharing
// one logical clock. Nothing is ever modified or removed.
class ProvenanceLedger {
 public:
  std::string append(ProvenanceRecord record);  // assigns prov_id + timestamp
  uint64_t alert(const std::string& object_id, const std::string& phase,
                 const std::string& action, const std::string& message);

  std::vector<ProvenanceRecord> trace(const TraceFilter& filter) const;

  const std::vector<ProvenanceRecord>& records() const { return records_; }
  const std::vector<AlertRecord>& alerts() const { return alerts_; }

  bool has_record_for(const std::string& object_id) const;
  bool has_alert_for(const std::string& object_id) const;

  LogicalClock& clock() { return clock_; }

  // Line-delimited export of provenance records (External Interfaces).
  void export_records(const std::filesystem::path& file) const;
  void export_alerts(const std::filesystem::path& file) const;

  // Full snapshot (records + alerts + clock) for crash recovery.
  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  std::vector<ProvenanceRecord> records_;
  std::vector<AlertRecord> alerts_;
  LogicalClock clock_;
  uint64_t next_prov_ = 0;
  uint64_t next_alert_ = 0;
};

nlohmann::json to_json(const ProvenanceRecord& record);
nlohmann::json to_json(const AlertRecord& record);

}  // namespace kgfuse::toolkit

#include "kgfuse/provenance.hpp"

#include <fstream>

#include "kgfuse/errors.hpp"

namespace kgfuse::toolkit {

using json = nlohmann::json;

const char* to_string(ProvOperation op) {
  switch (op) {
    case ProvOperation::Create: return "CREATE";
    case ProvOperation::Update: return "UPDATE";
    case ProvOperation::Merge: return "MERGE";
    case ProvOperation::Delete: return "DELETE";
  }
  return "CREATE";
}

ProvOperation prov_operation_from_string(std::string_view name) {
  if (name == "CREATE") return ProvOperation::Create;
  if (name == "UPDATE") return ProvOperation::Update;
  if (name == "MERGE") return ProvOperation::Merge;
  if (name == "DELETE") return ProvOperation::Delete;
  throw Error(ErrorCode::InvalidConfig, "unknown provenance operation '" + std::string(name) + "'");
}

std::string ProvenanceLedger::append(ProvenanceRecord record) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "p%05llu", static_cast<unsigned long long>(next_prov_++));
  record.prov_id = buf;
  record.timestamp = clock_.tick();
  records_.push_back(std::move(record));
  return records_.back().prov_id;
}

uint64_t ProvenanceLedger::alert(const std::string& object_id, const std::string& phase,
                                 const std::string& action, const std::string& message) {
  AlertRecord record;
  record.seq = next_alert_++;
  record.timestamp = clock_.tick();
  record.object_id = object_id;
  record.phase = phase;
  record.action = action;
  record.message = message;
  alerts_.push_back(std::move(record));
  return alerts_.back().seq;
}

std::vector<ProvenanceRecord> ProvenanceLedger::trace(const TraceFilter& filter) const {
  std::vector<ProvenanceRecord> result;
  for (const auto& record : records_) {
    if (filter.doc_id && *filter.doc_id != record.doc_id) continue;
    if (filter.chunk_id && *filter.chunk_id != record.source_chunk_id) continue;
    if (filter.object_id && *filter.object_id != record.object_id) continue;
    if (filter.operation && *filter.operation != record.operation) continue;
    result.push_back(record);
  }
  return result;  // records_ is already chronological
}

bool ProvenanceLedger::has_record_for(const std::string& object_id) const {
  for (const auto& record : records_) {
    if (record.object_id == object_id) return true;
  }
  return false;
}

bool ProvenanceLedger::has_alert_for(const std::string& object_id) const {
  for (const auto& alert : alerts_) {
    if (alert.object_id == object_id) return true;
  }
  return false;
}

json to_json(const ProvenanceRecord& record) {
  return json{{"prov_id", record.prov_id},
              {"object_id", record.object_id},
              {"object_kind", record.object_kind},
              {"doc_id", record.doc_id},
              {"source_chunk_id", record.source_chunk_id},
              {"evidence_snippet", record.evidence_snippet},
              {"operation", to_string(record.operation)},
              {"confidence", record.confidence},
              {"timestamp", record.timestamp},
              {"detail", record.detail}};
}

json to_json(const AlertRecord& record) {
  return json{{"seq", record.seq},         {"timestamp", record.timestamp},
              {"object_id", record.object_id}, {"phase", record.phase},
              {"action", record.action},   {"message", record.message}};
}

void ProvenanceLedger::export_records(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << json{{"format", "kgfuse.provenance"}, {"version", 1}}.dump() << "\n";
  for (const auto& record : records_) out << to_json(record).dump() << "\n";
}

void ProvenanceLedger::export_alerts(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << json{{"format", "kgfuse.alerts"}, {"version", 1}}.dump() << "\n";
  for (const auto& alert : alerts_) out << to_json(alert).dump() << "\n";
}

void ProvenanceLedger::save(const std::filesystem::path& file) const {
  json root{{"format", "kgfuse.ledger"},
            {"version", 1},
            {"clock", clock_.now()},
            {"next_prov", next_prov_},
            {"next_alert", next_alert_}};
  json records = json::array();
  for (const auto& record : records_) records.push_back(to_json(record));
  json alerts = json::array();
  for (const auto& alert : alerts_) alerts.push_back(to_json(alert));
  root["records"] = records;
  root["alerts"] = alerts;
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << root.dump(2) << "\n";
}

void ProvenanceLedger::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  json root = json::parse(in);
  records_.clear();
  alerts_.clear();
  clock_.restore(root.at("clock").get<uint64_t>());
  next_prov_ = root.at("next_prov").get<uint64_t>();
  next_alert_ = root.at("next_alert").get<uint64_t>();
  for (const json& j : root.at("records")) {
    ProvenanceRecord record;
    record.prov_id = j.at("prov_id");
    record.object_id = j.at("object_id");
    record.object_kind = j.at("object_kind");
    record.doc_id = j.at("doc_id");
    record.source_chunk_id = j.at("source_chunk_id");
    record.evidence_snippet = j.at("evidence_snippet");
    record.operation = prov_operation_from_string(j.at("operation").get<std::string>());
    record.confidence = j.at("confidence");
    record.timestamp = j.at("timestamp");
    record.detail = j.at("detail");
    records_.push_back(std::move(record));
  }
  for (const json& j : root.at("alerts")) {
    AlertRecord alert;
    alert.seq = j.at("seq");
    alert.timestamp = j.at("timestamp");
    alert.object_id = j.at("object_id");
    alert.phase = j.at("phase");
    alert.action = j.at("action");
    alert.message = j.at("message");
    alerts_.push_back(std::move(alert));
  }
}

}  // namespace kgfuse::toolkit

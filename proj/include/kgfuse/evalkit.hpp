#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace kgfuse::eval {

// The literal gold answer for unanswerable questions; tokenizes to the
// empty multiset so unanswerable-vs-unanswerable scores 1.
inline constexpr const char* kUnanswerable = "UNANSWERABLE";

struct AnnotatorGold {
  std::string gold_answer;
  std::set<std::string> gold_evidence;  // paragraph (chunk) ids
};

struct QAInstance {
  std::string question_id;
  std::string question;
  std::vector<AnnotatorGold> annotators;
  std::string doc_id;
};

struct PredictionRecord {
  std::string question_id;
  std::string predicted_answer;
  std::vector<std::string> retrieved_paragraph_ids;  // raw retrieval, pre-rerank
  std::vector<std::string> evidence_paragraph_ids;   // final evidence list
  std::string doc_id;
};

// Lowercase, strip punctuation, split on whitespace, drop articles.
std::vector<std::string> tokenize(const std::string& text);

// Token-level F1 with clipped multiset counts; both-empty = 1, one-empty = 0.
double answer_f1(const std::string& pred, const std::string& gold);

// Paragraph-set F1; both-empty = 1, one-empty = 0.
double evidence_f1(const std::set<std::string>& pred, const std::set<std::string>& gold);

struct DatasetScores {
  double answer_f1_mean = 0.0;
  double evidence_f1_mean = 0.0;
  double retrieved_evidence_f1_mean = 0.0;
  size_t question_count = 0;

  nlohmann::json to_json() const;
};

// Per-question max over annotators, mean over questions. Retrieved Evidence
// F1 is computed on retrieved_paragraph_ids. Throws MissingPrediction when
// an instance lacks a prediction (or a prediction lacks an instance).
DatasetScores score_dataset(const std::vector<PredictionRecord>& predictions,
                            const std::vector<QAInstance>& instances);

// JSONL fixture formats (header line with "format", then one record per line)
std::vector<QAInstance> load_instances(const std::filesystem::path& file);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& file);
void save_predictions(const std::vector<PredictionRecord>& predictions,
                      const std::filesystem::path& file);

nlohmann::json to_json(const PredictionRecord& record);
nlohmann::json to_json(const QAInstance& instance);

}  // namespace kgfuse::eval

#include "kgfuse/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "kgfuse/errors.hpp"

namespace kgfuse::eval {

using json = nlohmann::json;

std::vector<std::string> tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (c >= 'A' && c <= 'Z') {
      cleaned.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      bool punct = (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
                   (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
      if (!punct) cleaned.push_back(c);
    }
  }
  std::vector<std::string> tokens;
  std::string token;
  auto flush = [&]() {
    if (!token.empty() && token != "a" && token != "an" && token != "the") {
      tokens.push_back(token);
    }
    token.clear();
  };
  for (char c : cleaned) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return tokens;
}

double answer_f1(const std::string& pred, const std::string& gold) {
  auto tokens_of = [](const std::string& text) {
    if (text == kUnanswerable) return std::vector<std::string>{};
    return tokenize(text);
  };
  std::vector<std::string> pred_tokens = tokens_of(pred);
  std::vector<std::string> gold_tokens = tokens_of(gold);
  if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
  if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;

  std::map<std::string, size_t> pred_counts, gold_counts;
  for (const auto& t : pred_tokens) pred_counts[t] += 1;
  for (const auto& t : gold_tokens) gold_counts[t] += 1;
  size_t overlap = 0;
  for (const auto& [token, count] : pred_counts) {
    auto it = gold_counts.find(token);
    if (it != gold_counts.end()) overlap += std::min(count, it->second);
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

double evidence_f1(const std::set<std::string>& pred, const std::set<std::string>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  size_t overlap = 0;
  for (const auto& id : pred) overlap += gold.count(id);
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

DatasetScores score_dataset(const std::vector<PredictionRecord>& predictions,
                            const std::vector<QAInstance>& instances) {
  std::map<std::string, const PredictionRecord*> by_question;
  for (const auto& prediction : predictions) {
    by_question[prediction.question_id] = &prediction;
  }
  std::map<std::string, const QAInstance*> known;
  for (const auto& instance : instances) known[instance.question_id] = &instance;
  for (const auto& prediction : predictions) {
    if (!known.count(prediction.question_id)) {
      throw Error(ErrorCode::MissingPrediction,
                  "prediction '" + prediction.question_id + "' matches no instance");
    }
  }

  DatasetScores scores;
  double answer_sum = 0.0, evidence_sum = 0.0, retrieved_sum = 0.0;
  for (const auto& instance : instances) {
    auto it = by_question.find(instance.question_id);
    if (it == by_question.end()) {
      throw Error(ErrorCode::MissingPrediction,
                  "no prediction for question '" + instance.question_id + "'");
    }
    const PredictionRecord& prediction = *it->second;
    std::set<std::string> final_ids(prediction.evidence_paragraph_ids.begin(),
                                    prediction.evidence_paragraph_ids.end());
    std::set<std::string> retrieved_ids(prediction.retrieved_paragraph_ids.begin(),
                                        prediction.retrieved_paragraph_ids.end());

    double best_answer = 0.0, best_evidence = 0.0, best_retrieved = 0.0;
    for (const auto& annotator : instance.annotators) {
      best_answer = std::max(best_answer, answer_f1(prediction.predicted_answer,
                                                    annotator.gold_answer));
      best_evidence = std::max(best_evidence, evidence_f1(final_ids, annotator.gold_evidence));
      best_retrieved = std::max(best_retrieved, evidence_f1(retrieved_ids, annotator.gold_evidence));
    }
    answer_sum += best_answer;
    evidence_sum += best_evidence;
    retrieved_sum += best_retrieved;
    scores.question_count += 1;
  }
  if (scores.question_count > 0) {
    double n = static_cast<double>(scores.question_count);
    scores.answer_f1_mean = answer_sum / n;
    scores.evidence_f1_mean = evidence_sum / n;
    scores.retrieved_evidence_f1_mean = retrieved_sum / n;
  }
  return scores;
}

json DatasetScores::to_json() const {
  return json{{"format", "kgfuse.metrics"},
              {"version", 1},
              {"answer_f1_mean", answer_f1_mean},
              {"evidence_f1_mean", evidence_f1_mean},
              {"retrieved_evidence_f1_mean", retrieved_evidence_f1_mean},
              {"question_count", question_count}};
}

json to_json(const QAInstance& instance) {
  json annotators = json::array();
  for (const auto& annotator : instance.annotators) {
    annotators.push_back(
        {{"gold_answer", annotator.gold_answer}, {"gold_evidence", annotator.gold_evidence}});
  }
  return json{{"question_id", instance.question_id},
              {"question", instance.question},
              {"annotators", annotators},
              {"doc_id", instance.doc_id}};
}

json to_json(const PredictionRecord& record) {
  return json{{"question_id", record.question_id},
              {"predicted_answer", record.predicted_answer},
              {"retrieved_paragraph_ids", record.retrieved_paragraph_ids},
              {"evidence_paragraph_ids", record.evidence_paragraph_ids},
              {"doc_id", record.doc_id}};
}

std::vector<QAInstance> load_instances(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  std::vector<QAInstance> instances;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line);
    if (j.contains("format")) continue;
    QAInstance instance;
    instance.question_id = j.at("question_id").get<std::string>();
    instance.question = j.value("question", "");
    instance.doc_id = j.value("doc_id", "");
    for (const json& a : j.at("annotators")) {
      AnnotatorGold gold;
      gold.gold_answer = a.at("gold_answer").get<std::string>();
      gold.gold_evidence = a.at("gold_evidence").get<std::set<std::string>>();
      instance.annotators.push_back(std::move(gold));
    }
    if (instance.annotators.empty()) {
      throw Error(ErrorCode::UnreadableFile,
                  "instance '" + instance.question_id + "' has no annotators");
    }
    instances.push_back(std::move(instance));
  }
  return instances;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingArtifacts, file.string());
  std::vector<PredictionRecord> predictions;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line);
    if (j.contains("format")) continue;
    PredictionRecord record;
    record.question_id = j.at("question_id").get<std::string>();
    record.predicted_answer = j.value("predicted_answer", "");
    record.retrieved_paragraph_ids =
        j.value("retrieved_paragraph_ids", std::vector<std::string>{});
    record.evidence_paragraph_ids = j.value("evidence_paragraph_ids", std::vector<std::string>{});
    record.doc_id = j.value("doc_id", "");
    predictions.push_back(std::move(record));
  }
  return predictions;
}

void save_predictions(const std::vector<PredictionRecord>& predictions,
                      const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableFile, file.string());
  out << json{{"format", "kgfuse.predictions"}, {"version", 1}}.dump() << "\n";
  for (const auto& record : predictions) out << to_json(record).dump() << "\n";
}

}  // namespace kgfuse::eval

#include "kgfuse/embedder.hpp"

#include <cmath>
#include <cstdint>

namespace kgfuse::vec {

namespace {

uint64_t fnv1a(const char* data, size_t len) {
  uint64_t hash = 1469598103934665603ull;
  for (size_t i = 0; i < len; ++i) {
    hash ^= static_cast<unsigned char>(data[i]);
    hash *= 1099511628211ull;
  }
  return hash;
}

char fold(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<double> NgramEmbedder::embed(const std::string& text) {
  std::vector<double> v(dimension_, 0.0);
  if (text.empty()) return v;  // degenerate by contract

  std::string folded;
  folded.reserve(text.size());
  for (char c : text) folded.push_back(fold(c));

  const size_t n = 3;
  if (folded.size() < n) {
    v[fnv1a(folded.data(), folded.size()) % dimension_] += 1.0;
  } else {
    for (size_t i = 0; i + n <= folded.size(); ++i) {
      v[fnv1a(folded.data() + i, n) % dimension_] += 1.0;
    }
  }

  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

bool is_degenerate(const std::vector<double>& v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace kgfuse::vec

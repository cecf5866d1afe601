#pragma once

#include <string>
#include <vector>

namespace kgfuse::vec {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual size_t dimension() const = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual bool deterministic() const { return true; }
};

// Deterministic reference embedder: hashed character-trigram frequencies,
// L2-normalized, case-folded. The empty string maps to the zero vector,
// which downstream code treats as degenerate.
class NgramEmbedder : public EmbeddingProvider {
 public:
  explicit NgramEmbedder(size_t dimension = 64) : dimension_(dimension) {}
  size_t dimension() const override { return dimension_; }
  std::vector<double> embed(const std::string& text) override;

 private:
  size_t dimension_;
};

bool is_degenerate(const std::vector<double>& v);

double l2_distance(const std::vector<double>& a, const std::vector<double>& b);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace kgfuse::vec

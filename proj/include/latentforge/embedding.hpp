#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace latentforge {

/// Face-recognition feature vector. Finite with nonzero norm.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double norm() const noexcept { return norm_; }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace latentforge

#include "latentforge/embedding.hpp"

#include <algorithm>
#include <string>

#include "latentforge/errors.hpp"
#include "latentforge/vecmath.hpp"

namespace latentforge {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InputError("embedding must have dimension >= 1");
  if (!vecmath::all_finite(values_)) throw InputError("embedding has non-finite entries");
  norm_ = vecmath::norm(values_);
  if (!(norm_ > 0.0)) throw InputError("embedding is the zero vector");
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw DimensionError("embedding dims differ: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  const double c = vecmath::dot(a.values(), b.values()) / (a.norm() * b.norm());
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace latentforge

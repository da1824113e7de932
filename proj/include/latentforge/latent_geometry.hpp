#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace latentforge {

/// A point in the generator's latent space. Entries are always finite.
class LatentVector {
 public:
  LatentVector() = default;
  explicit LatentVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;

 private:
  std::vector<double> values_;
};

struct BoundaryMeta {
  std::size_t n_train = 0;
  double validation_accuracy = 0.0;
  double average_distance = 0.0;

  friend bool operator==(const BoundaryMeta&, const BoundaryMeta&) = default;
};

/// Separating hyperplane {w : w.normal + bias = 0} for one attribute.
///
/// The public constructor normalizes the normal and rejects zero vectors.
/// `verbatim` keeps the stored normal untouched so that a tampered or
/// hand-written file is caught by the unit-norm check in `neutralize`.
class AttributeBoundary {
 public:
  AttributeBoundary(std::string attribute, std::vector<double> normal, double bias = 0.0,
                    BoundaryMeta meta = {});

  static AttributeBoundary verbatim(std::string attribute, std::vector<double> normal,
                                    double bias = 0.0, BoundaryMeta meta = {});

  const std::string& attribute() const noexcept { return attribute_; }
  std::span<const double> normal() const noexcept { return normal_; }
  double bias() const noexcept { return bias_; }
  const BoundaryMeta& meta() const noexcept { return meta_; }
  std::size_t dim() const noexcept { return normal_.size(); }

  nlohmann::json to_json() const;
  static AttributeBoundary from_json(const nlohmann::json& doc);

  friend bool operator==(const AttributeBoundary&, const AttributeBoundary&) = default;

 private:
  AttributeBoundary() = default;
  void validate_meta() const;

  std::string attribute_;
  std::vector<double> normal_;
  double bias_ = 0.0;
  BoundaryMeta meta_;
};

/// One step of an edit chain: a signed shift along a boundary normal, or a
/// projection onto the boundary hyperplane when `alpha` is empty.
struct EditStep {
  std::reference_wrapper<const AttributeBoundary> boundary;
  std::optional<double> alpha;

  static EditStep shift(const AttributeBoundary& b, double alpha) { return {b, alpha}; }
  static EditStep neutralize(const AttributeBoundary& b) { return {b, std::nullopt}; }
  bool is_neutralize() const noexcept { return !alpha.has_value(); }
};

inline constexpr double kUnitNormTolerance = 1e-9;

/// w + alpha * n
LatentVector transform(const LatentVector& w, const AttributeBoundary& b, double alpha);

/// w - (w.n) n. Projects onto the hyperplane through the origin; the bias is
/// deliberately not applied.
LatentVector neutralize(const LatentVector& w, const AttributeBoundary& b);

/// w.n + bias
double signed_distance(const LatentVector& w, const AttributeBoundary& b);

/// Applies `steps` left to right. An empty chain returns `w`.
LatentVector compose_edits(const LatentVector& w, std::span<const EditStep> steps);

}  // namespace latentforge

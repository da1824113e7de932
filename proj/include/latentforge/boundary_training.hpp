#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "latentforge/latent_geometry.hpp"

namespace latentforge {

/// Latents paired with one attribute score each (from an external labeler).
struct LabeledPool {
  std::string attribute;
  std::vector<LatentVector> latents;
  std::vector<double> scores;

  void validate() const;
};

struct SvmConfig {
  std::size_t max_train = 100'000;
  double holdout_fraction = 0.1;
  double l2_lambda = 1e-4;
  std::size_t epochs = 50;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExtremeSplit {
  std::vector<std::size_t> positives;  // pool indices, highest score first
  std::vector<std::size_t> negatives;  // pool indices, lowest score first
};

/// Picks `per_side` highest-scoring and `per_side` lowest-scoring latents.
/// Ties are broken by ascending pool index; a latent is never on both sides.
ExtremeSplit select_extremes(const LabeledPool& pool, std::size_t per_side);

/// 25% of the pool per side, capped at max_train / 2 and at least 1.
std::size_t default_per_side(std::size_t pool_size, const SvmConfig& cfg);

/// Linear max-margin separator trained by seeded subgradient descent on the
/// L2-regularized hinge loss. The returned normal is unit length and oriented
/// so the positives lie on the positive side on average.
AttributeBoundary train_linear_boundary(const std::string& attribute,
                                        std::span<const LatentVector> positives,
                                        std::span<const LatentVector> negatives,
                                        const SvmConfig& cfg);

struct BoundaryEvaluation {
  double accuracy = 0.0;
  double average_distance = 0.0;
};

BoundaryEvaluation evaluate_boundary(const AttributeBoundary& b,
                                     std::span<const LatentVector> positives,
                                     std::span<const LatentVector> negatives);

enum class SuiteScheme { binary, one_vs_one_vs_neutral, one_vs_all };

SuiteScheme parse_suite_scheme(const std::string& name);

/// Trains a family of boundaries:
///  - binary: one pool, extremes of its score distribution;
///  - one_vs_one_vs_neutral: every pool except `neutral` against `neutral`;
///  - one_vs_all: every pool against the union of the others, the union
///    subsampled (seeded) to the size of the positive side.
/// For the categorical schemes each pool holds the latents labeled with that
/// class, and the side is formed from its highest-scoring members.
std::vector<AttributeBoundary> train_attribute_suite(const std::map<std::string, LabeledPool>& pools,
                                                     SuiteScheme scheme, const SvmConfig& cfg);

}  // namespace latentforge

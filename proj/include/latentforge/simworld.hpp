#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "latentforge/embedding.hpp"
#include "latentforge/identity_factory.hpp"
#include "latentforge/latent_geometry.hpp"

namespace latentforge {

struct WorldConfig {
  std::size_t dim = 64;
  std::size_t embed_dim = 32;
  std::vector<std::string> attributes;  // empty = taxonomy::default_attribute_names()
  double noise_sigma = 0.0;
  double child_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Analytic backend: orthonormal planted attribute directions, scores that
/// are projections onto them, and an embedding that ignores every planted
/// component so attribute edits never change identity.
class World : public CandidateBackend {
 public:
  static World create(const WorldConfig& cfg);

  std::size_t dim() const override { return cfg_.dim; }
  std::size_t embed_dim() const noexcept { return cfg_.embed_dim; }
  const WorldConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& attributes() const noexcept { return cfg_.attributes; }

  /// Planted unit direction for a named attribute.
  std::span<const double> direction(const std::string& name) const;
  AttributeBoundary planted_boundary(const std::string& name) const;

  /// Noise-free score w . u.
  double score(const LatentVector& w, const std::string& name) const;

  /// Labeled standard-normal latent for pool position `index`.
  CandidateSample draw(std::size_t index, std::uint64_t seed) const override;

  /// normalize(P r(w)); DegenerateError when r(w) vanishes.
  EmbeddingVector embed(const LatentVector& w) const;

  /// Component of `w` orthogonal to every planted direction.
  std::vector<double> residual(const LatentVector& w) const;

 private:
  World() = default;

  WorldConfig cfg_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<double>> directions_;
  std::vector<std::vector<double>> projection_;  // embed_dim x dim
  std::vector<double> age_cuts_;                 // ascending score cut points between age bins
  std::vector<std::string> age_labels_;          // youngest first
};

World create_world(const WorldConfig& cfg);

std::vector<CandidateSample> sample_labeled_latents(const World& world, std::size_t n, std::uint64_t seed);

struct PersonalizationSimConfig {
  double outlier_fraction = 0.1;
  double no_face_fraction = 0.0;
  double gender_flip_fraction = 0.0;
};

struct SimulatedSample {
  EmbeddingVector embedding;
  bool outlier = false;
  int face_count = 1;
  bool gender_flipped = false;
};

/// One sample per entry of `sigma`: normalize(embed(identity) + sigma_i * g),
/// or, for outliers, the same built around a fresh random identity.
std::vector<SimulatedSample> simulate_personalization(const World& world, const LatentVector& identity_latent,
                                                      std::span<const double> sigma,
                                                      const PersonalizationSimConfig& cfg, std::uint64_t seed);

/// Modified Gram-Schmidt with one reorthogonalization pass. Throws
/// DegenerateError when a vector is (numerically) dependent on earlier ones.
std::vector<std::vector<double>> orthonormalize(std::vector<std::vector<double>> vectors);

}  // namespace latentforge

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latentforge/latent_geometry.hpp"

namespace latentforge {

using BoundarySet = std::map<std::string, AttributeBoundary>;

/// Looks up `name`, raising ConfigError that names the missing boundary.
const AttributeBoundary& require_boundary(const BoundarySet& set, const std::string& name);

struct SampleLabels {
  std::string race;
  std::string gender;
  std::string age_bin;
  std::string expression;
  double yaw = 0.0;
  double pitch = 0.0;
  double illumination = 0.0;
};

struct CandidateSample {
  std::size_t index = 0;
  LatentVector latent;
  SampleLabels labels;
  double quality = 0.0;
  // Continuous per-attribute labeler outputs keyed by boundary name
  // ("yaw", "race:White", "expression:happy", "neutral", ...).
  std::map<std::string, double> scores;
};

/// Source of labeled candidates, addressed by sample index so that sampling
/// can be partitioned and results are independent of worker order.
class CandidateBackend {
 public:
  virtual ~CandidateBackend() = default;
  virtual std::size_t dim() const = 0;
  virtual CandidateSample draw(std::size_t index, std::uint64_t seed) const = 0;
};

struct PoolProvenance {
  std::size_t n_sampled = 0;
  std::size_t n_quality_dropped = 0;
  std::size_t n_age_dropped = 0;
};

struct CandidatePool {
  std::vector<CandidateSample> samples;  // ascending index
  PoolProvenance provenance;
};

/// Draws `n` candidates, drops the floor(quality_percentile * n) lowest
/// quality ones (ties: lower index dropped first), then drops child age bins.
CandidatePool build_candidate_pool(const CandidateBackend& backend, std::size_t n,
                                   double quality_percentile, std::uint64_t seed);

/// Same filtering applied to an already materialized sample list.
CandidatePool filter_candidates(std::vector<CandidateSample> sampled, double quality_percentile);

/// Left-minus-right mean intensity over 255. Odd widths skip the middle column.
double illumination_score(std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Binary PGM (P5) with maxval <= 255.
GrayImage parse_pgm(std::span<const std::byte> bytes);

struct DemographicGroup {
  std::string race;
  std::string age_bin;
  std::string gender;
  int group_id = 0;

  friend bool operator==(const DemographicGroup&, const DemographicGroup&) = default;
};

struct GroupPlan {
  std::vector<DemographicGroup> groups;
  std::size_t per_group = 0;
  std::vector<std::string> age_bins;  // youngest first
  std::vector<std::string> genders;   // genders[0] is the gender boundary's positive side

  std::size_t quota() const noexcept { return groups.size() * per_group; }
};

/// Race-major cross product of the three vocabularies.
GroupPlan plan_demographic_groups(const std::vector<std::string>& races,
                                  const std::vector<std::string>& age_bins,
                                  const std::vector<std::string>& genders, std::size_t per_group);

/// Ranks by number of matching (race, gender, age) fields, then quality
/// descending, then pool index.
std::vector<CandidateSample> select_seed_candidates(std::span<const CandidateSample> pool,
                                                    const DemographicGroup& group, std::size_t k);

struct EditAlphas {
  double yaw = 1.39;
  double pitch = 0.98;
  double expression = 1.0;
  double race = 1.0;
  double age = 1.0;
  double gender = 1.0;
};

struct VariationRecipe {
  std::string tag;
  std::vector<std::pair<std::string, double>> edits;  // (boundary name, alpha), applied in order
};

struct VariationSpec {
  std::vector<VariationRecipe> recipes;

  static constexpr std::size_t kCount = 6;

  /// frontal, yaw+, yaw-, pitch+, happy+, yaw+ then happy+.
  static VariationSpec default_spec(const EditAlphas& alphas);
  void validate() const;
};

enum class IdentityStatus { planned, synthesized, personalized, curated };

const char* to_string(IdentityStatus s);
IdentityStatus parse_identity_status(const std::string& s);

struct Variation {
  std::string tag;
  LatentVector latent;
};

struct IdentityRecord {
  std::string identity_id;
  DemographicGroup group;
  std::size_t seed_index = 0;
  std::string seed_expression;
  LatentVector seed_latent;
  LatentVector pose_neutral_latent;
  LatentVector neutral_latent;
  LatentVector demographic_latent;
  std::vector<Variation> variations;
  IdentityStatus status = IdentityStatus::planned;

  /// Image reference for variation `i`: "{identity_id}_gan_{tag}.png".
  std::string variation_image(std::size_t i) const;
};

/// Pose neutralization, expression neutralization, then demographic shifts
/// along race (one-vs-all), age and gender. Age moves toward the target bin
/// by sign(target - current) and not at all when already in it; gender moves
/// +alpha for plan.genders[0] and -alpha otherwise.
IdentityRecord synthesize_identity(std::string identity_id, const CandidateSample& seed,
                                   const DemographicGroup& group, const GroupPlan& plan,
                                   const BoundarySet& boundaries, const EditAlphas& alphas);

/// variation i = compose_edits(demographic_latent, recipe i).
IdentityRecord generate_variations(IdentityRecord rec, const VariationSpec& spec,
                                   const BoundarySet& boundaries);

/// Fills every group of `plan` with distinct seeds from `pool`. Raises
/// DataError listing the groups that could not be filled.
std::vector<IdentityRecord> synthesize_population(std::span<const CandidateSample> pool,
                                                  const GroupPlan& plan, const BoundarySet& boundaries,
                                                  const EditAlphas& alphas);

/// Identity manifest. Latents are referenced by row in a companion LATV file.
struct IdentityRows {
  std::uint32_t seed = 0, pose_neutral = 0, neutral = 0, demographic = 0;
  std::vector<std::uint32_t> variations;
};

nlohmann::json identity_to_json(const IdentityRecord& rec, const IdentityRows& rows);

}  // namespace latentforge

namespace latentforge {
class VectorStore;
IdentityRecord identity_from_json(const nlohmann::json& doc, const VectorStore& latents);
}  // namespace latentforge

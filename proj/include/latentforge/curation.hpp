#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentforge/embedding.hpp"
#include "latentforge/sample_record.hpp"

namespace latentforge {

struct FilterConfig {
  double t_ip = 0.3;

  void validate() const;
};

inline constexpr std::size_t kGanReferenceImages = 6;

/// Mean cosine similarity between a generated sample and the six GAN images
/// of its identity. Only cross-domain comparisons are defined: a gan-stage
/// sample is rejected with InvariantError.
double identity_preservation_score(const EmbeddingVector& sample, std::span<const EmbeddingVector> gan_embeddings,
                                   Stage stage = Stage::diffusion);

/// Stage 1. A missing detections entry counts as zero faces. Only pending
/// samples are touched.
void detection_gate(std::vector<SampleRecord>& samples, const std::map<std::string, int>& face_counts);

/// The six GAN images of one identity: embeddings plus their gender labels,
/// which must agree.
struct GanReference {
  std::vector<EmbeddingVector> embeddings;
  std::vector<std::string> genders;

  const std::string& gender() const;
};

struct FilterInputs {
  std::map<std::string, int> face_counts;                  // sample_id -> faces
  std::map<std::string, EmbeddingVector> embeddings;       // embedding_ref -> vector
  std::map<std::string, std::string> gender_labels;        // sample_id -> gender
  std::map<std::string, GanReference> gan;                 // identity_id -> reference set
};

struct IdentityFilterCounts {
  std::size_t total = 0;
  std::size_t dropped_detection = 0;
  std::size_t dropped_identity = 0;
  std::size_t dropped_gender = 0;
  std::size_t kept = 0;
};

struct FilterReport {
  double t_ip = 0.0;
  std::map<std::string, IdentityFilterCounts> per_identity;

  IdentityFilterCounts totals() const;
  nlohmann::json to_json() const;
};

/// Detection gate, then identity preservation (drop iff ip_score < t_ip),
/// then gender preservation against the identity's GAN label. Dropped and
/// kept samples are never re-evaluated, so the call is idempotent. The report
/// is recomputed from the final verdicts of all samples.
FilterReport apply_filters(std::vector<SampleRecord>& samples, const FilterInputs& inputs, const FilterConfig& cfg);

// File interfaces.
std::map<std::string, EmbeddingVector> load_embeddings(const std::filesystem::path& latv,
                                                       const std::filesystem::path& sidecar_csv);
void save_embeddings(const std::filesystem::path& latv, const std::filesystem::path& sidecar_csv,
                     const std::vector<std::pair<std::string, EmbeddingVector>>& rows);
std::map<std::string, int> load_face_counts(const std::filesystem::path& csv);
std::map<std::string, std::string> load_gender_labels(const std::filesystem::path& csv);

std::string samples_to_csv(std::span<const SampleRecord> samples);
std::vector<SampleRecord> samples_from_csv(const std::string& text);

}  // namespace latentforge

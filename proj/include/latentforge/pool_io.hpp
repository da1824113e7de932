#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "latentforge/identity_factory.hpp"

namespace latentforge {

// On-disk pool layout:
//   latents.latv            one row per candidate
//   labels.csv              index,race,gender,age_bin,expression,yaw,pitch,illumination,quality
//   scores/<attribute>.csv  index,score  (':' in attribute names stored as '.')
//
// Row i of latents.latv belongs to row i of labels.csv. Score files are keyed
// by the `index` column; a file of bare numbers (one per line) is read in
// latents.latv row order instead.

std::string score_file_name(const std::string& attribute);
std::string attribute_from_score_file(const std::filesystem::path& file);

void save_pool(const std::filesystem::path& dir, std::span<const CandidateSample> samples);
std::vector<CandidateSample> load_pool(const std::filesystem::path& dir);

/// Serves candidates from a stored pool; index i is row i.
class StoredPoolBackend : public CandidateBackend {
 public:
  explicit StoredPoolBackend(std::vector<CandidateSample> samples);

  std::size_t dim() const override;
  std::size_t size() const noexcept { return samples_.size(); }
  CandidateSample draw(std::size_t index, std::uint64_t seed) const override;

 private:
  std::vector<CandidateSample> samples_;
};

}  // namespace latentforge

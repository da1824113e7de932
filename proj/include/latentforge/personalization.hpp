#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentforge/identity_factory.hpp"
#include "latentforge/sample_record.hpp"

namespace latentforge {

inline constexpr const char* kDefaultNegativePrompt =
    "photo with the style of painting, comics, drawing, or containing text";

struct FinetuneConfig {
  std::size_t regularization_images = 200;
  std::size_t epochs = 1000;
  std::string token = "xyz";
  std::string class_name = "person";
  bool train_text_encoder = true;
};

struct FinetuneJob {
  std::string identity_id;
  std::vector<std::string> input_images;
  std::size_t regularization_images = 0;
  std::size_t epochs = 0;
  std::string token;
  std::string class_name;
  bool train_text_encoder = true;

  static constexpr std::size_t kInputImages = 6;

  std::string identity_phrase() const { return token + " " + class_name; }
  nlohmann::json to_json() const;
  static FinetuneJob from_json(const nlohmann::json& doc);
};

/// Builds the job for one synthesized identity. InvariantError unless the
/// record carries exactly six variation images.
FinetuneJob make_finetune_job(const IdentityRecord& rec, const FinetuneConfig& cfg);

/// make_finetune_job + atomic write of `{dir}/{identity_id}.json`.
FinetuneJob emit_finetune_job(const IdentityRecord& rec, const FinetuneConfig& cfg,
                              const std::filesystem::path& dir);

enum class PromptCategory { accessorization, advanced_poses, advanced_expressions, recontextualization };

const char* to_string(PromptCategory c);
PromptCategory parse_prompt_category(const std::string& s);

struct PromptTemplate {
  PromptCategory category;
  std::string text;  // contains "{subject}"
};

struct PromptSpec {
  std::string prompt_id;
  PromptCategory category;
  std::string text;
  std::string negative_text;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

/// Four templates per category, including the four reference prompts.
std::vector<PromptTemplate> default_prompt_templates();

std::vector<PromptSpec> build_prompt_bank(const std::vector<PromptTemplate>& templates,
                                          const std::string& token, const std::string& class_name,
                                          const std::string& negative_text = kDefaultNegativePrompt);

struct ExpectedOutput {
  std::string file_name;  // {identity_id}_{prompt_id}_{k}.png
  std::string prompt_id;
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

struct InferenceManifest {
  std::string identity_id;
  std::vector<PromptSpec> prompts;
  std::size_t samples_per_prompt = 0;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::vector<ExpectedOutput> expected;

  nlohmann::json to_json() const;
  static InferenceManifest from_json(const nlohmann::json& doc);
};

InferenceManifest make_inference_manifest(const std::string& identity_id, const std::vector<PromptSpec>& bank,
                                          std::size_t samples_per_prompt, std::uint64_t seed,
                                          const std::string& output_dir = "");

/// make_inference_manifest + atomic write of `{dir}/{identity_id}.json`.
InferenceManifest emit_inference_manifest(const std::string& identity_id, const std::vector<PromptSpec>& bank,
                                          std::size_t samples_per_prompt, std::uint64_t seed,
                                          const std::filesystem::path& dir, const std::string& output_dir = "");

struct IngestReport {
  std::size_t expected = 0;
  std::size_t found = 0;
  std::vector<std::string> missing;
  std::vector<std::string> unexpected;  // files in the directory the manifest does not list

  bool complete() const noexcept { return missing.empty(); }
};

struct IngestResult {
  std::vector<SampleRecord> samples;
  IngestReport report;
};

/// One diffusion-stage SampleRecord per expected file present in `dir`.
/// Partial directories are not an error; an unreadable one is IoError.
IngestResult ingest_generated_samples(const InferenceManifest& manifest, const std::filesystem::path& dir);

}  // namespace latentforge

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentforge/boundary_training.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/evaluation.hpp"
#include "latentforge/identity_factory.hpp"
#include "latentforge/personalization.hpp"

namespace latentforge {

struct SimworldSettings {
  std::size_t dim = 64;
  std::size_t embed_dim = 32;
  double noise_sigma = 0.0;
  double child_fraction = 0.1;
  // Per-prompt embedding noise, swept linearly across the prompt bank.
  double sigma_d_min = 0.05;
  double sigma_d_max = 0.3;
  double outlier_fraction = 0.1;
  double no_face_fraction = 0.02;
  double gender_flip_fraction = 0.02;
};

/// Directories holding model outputs produced outside the toolkit.
struct BridgeSettings {
  std::filesystem::path pool_dir;       // latents.latv, labels.csv, scores/
  std::filesystem::path gan_dir;        // embeddings.latv, embeddings.csv, genders.csv
  std::filesystem::path diffusion_dir;  // images/<identity>/, embeddings.*, detections.csv, genders.csv
};

struct ReferenceSpec {
  std::string name;
  std::filesystem::path scores;  // empty: a dataset evaluated in this run
};

struct EvalSettings {
  SamplingParams sampling;
  std::size_t gan_per_identity = 6;
  std::size_t bins = 100;
  double epsilon = 1e-6;
  std::vector<ReferenceSpec> references;
};

struct RunConfig {
  std::string backend = "simworld";
  std::uint64_t seed = 0;
  std::size_t pool_size = 2560;
  double quality_percentile = 0.10;
  std::vector<std::string> races;
  std::vector<std::string> age_bins;
  std::vector<std::string> genders;
  std::size_t per_group = 10;
  EditAlphas alphas;
  VariationSpec variation_spec;
  SvmConfig svm;
  FinetuneConfig finetune;
  std::vector<PromptTemplate> prompt_templates;
  std::size_t samples_per_prompt = 4;
  double t_ip = 0.3;
  std::vector<double> t_ip_sweep = {0.4, 0.3, 0.2};
  EvalSettings eval;
  double quality_threshold = 24.45;
  SimworldSettings sim;
  BridgeSettings bridge;

  /// Effective configuration with every default spelled out.
  nlohmann::json to_json() const;
  void validate() const;
};

/// ConfigError names the offending line (syntax) or field path (content).
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"pool",            "boundaries", "identities", "variations",
                                                  "personalize-emit", "ingest",     "filter",     "eval"};
  return stages;
}

struct RunSummary {
  std::vector<std::string> executed;
  std::vector<std::string> up_to_date;
};

/// Runs `stages` (all when empty) in canonical order inside `run_dir`,
/// recording per-stage input and output digests in `run_dir/manifest.json`.
/// A stage already recorded with matching digests is skipped. A run
/// directory is bound to one effective configuration.
RunSummary execute(const RunConfig& config, const std::filesystem::path& run_dir,
                   const std::vector<std::string>& stages = {});

/// Exit status for the CLI: 2 config, 3 dependency, 4 data, 1 otherwise.
int exit_code_for(const Error& e);

}  // namespace latentforge

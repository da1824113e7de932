#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentforge/embedding.hpp"
#include "latentforge/sample_record.hpp"

namespace latentforge {

struct ComparisonPair {
  std::string a;
  std::string b;

  friend bool operator==(const ComparisonPair&, const ComparisonPair&) = default;
};

struct ComparisonSet {
  std::string dataset_id;
  std::uint64_t seed = 0;
  std::vector<ComparisonPair> mated;
  std::vector<ComparisonPair> nonmated;
  std::vector<std::string> identities;  // eligible identities, sorted
  std::size_t skipped_identities = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct SamplingParams {
  std::size_t per_identity = 10;
  std::size_t mated_per_id = 20;
  std::size_t nonmated_per_id = 20;
};

/// Per identity (sorted by id): a seeded choice of `per_identity` images,
/// `mated_per_id` distinct pairs among them (capped at C(n,2)) and
/// `nonmated_per_id` pairs against images of uniformly drawn other
/// identities. Identities with too few images are skipped with a warning.
/// Every record passed in is eligible; filter verdicts beforehand.
ComparisonSet sample_comparisons(std::span<const SampleRecord> dataset, const SamplingParams& params,
                                 std::uint64_t seed, const std::string& dataset_id = "");

struct Histogram {
  std::vector<double> edges;          // bins + 1
  std::vector<double> probabilities;  // sums to 1

  std::vector<double> centers() const;
};

/// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram make_histogram(std::span<const double> scores, std::size_t bins, double lo = -1.0, double hi = 1.0);

struct ScoreDistribution {
  std::vector<double> scores;
  double mean = 0.0;
  double std = 0.0;  // population
  Histogram histogram;

  static ScoreDistribution from_scores(std::vector<double> scores, std::size_t bins = 100);
};

struct ScoredComparisons {
  ScoreDistribution mated;
  ScoreDistribution nonmated;
};

ScoredComparisons score_comparisons(const ComparisonSet& set, const std::map<std::string, EmbeddingVector>& embeddings,
                                    std::size_t bins = 100);

/// KL(p || q) in nats from shared-edge histograms over [-1, 1], each bin mass
/// smoothed by +epsilon and renormalized.
double kl_divergence(const ScoreDistribution& p, const ScoreDistribution& q, std::size_t bins = 100,
                     double epsilon = 1e-6);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// FMR(t) = share of nonmated >= t, FNMR(t) = share of mated < t, evaluated
/// at every distinct score; the crossing is linearly interpolated between
/// the two candidate thresholds that bracket it.
EerResult compute_eer(std::span<const double> mated, std::span<const double> nonmated);

struct DatasetScores {
  std::string name;
  std::size_t n_identities = 0;
  ScoreDistribution mated;
  ScoreDistribution nonmated;
};

struct ReportOptions {
  std::size_t bins = 100;
  double epsilon = 1e-6;
};

struct DistributionReport {
  std::string csv;       // one row per dataset
  std::string table;     // mean ± std presentation
  std::map<std::string, std::string> histograms;  // dataset -> bin_center,probability,series CSV
};

/// "0.67 ± 0.14"
std::string format_mean_std(double mean, double std);

DistributionReport distribution_report(std::span<const DatasetScores> datasets,
                                       const std::vector<std::string>& reference_names,
                                       const ReportOptions& options = {});

void write_distribution_report(const DistributionReport& report, const std::filesystem::path& dir);

}  // namespace latentforge

#include "latentforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"
#include "latentforge/random.hpp"

namespace latentforge {

nlohmann::json ComparisonSet::to_json() const {
  auto pairs = [](const std::vector<ComparisonPair>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : v) out.push_back({p.a, p.b});
    return out;
  };
  return {{"dataset_id", dataset_id},
          {"seed", seed},
          {"identities", identities},
          {"skipped_identities", skipped_identities},
          {"warnings", warnings},
          {"mated", pairs(mated)},
          {"nonmated", pairs(nonmated)}};
}

ComparisonSet sample_comparisons(std::span<const SampleRecord> dataset, const SamplingParams& params,
                                 std::uint64_t seed, const std::string& dataset_id) {
  if (params.per_identity < 2) throw InputError("sample_comparisons: per_identity must be >= 2");

  std::map<std::string, std::vector<std::string>> by_identity;
  for (const auto& s : dataset) by_identity[s.identity_id].push_back(s.sample_id);

  ComparisonSet set;
  set.dataset_id = dataset_id;
  set.seed = seed;
  Rng rng(seed);

  std::map<std::string, std::vector<std::string>> selected;
  for (auto& [id, images] : by_identity) {
    std::sort(images.begin(), images.end());
    if (images.size() < params.per_identity) {
      ++set.skipped_identities;
      set.warnings.push_back("identity " + id + " skipped: " + std::to_string(images.size()) + " images < " +
                             std::to_string(params.per_identity));
      continue;
    }
    seeded_shuffle(images.begin(), images.end(), rng);
    selected[id].assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(params.per_identity));
    set.identities.push_back(id);
  }
  if (set.identities.size() < 2)
    throw InputError("sample_comparisons: need >= 2 eligible identities, have " + std::to_string(set.identities.size()));

  const std::size_t n = params.per_identity;
  const std::size_t possible = n * (n - 1) / 2;
  const std::size_t mated_k = std::min(params.mated_per_id, possible);
  if (mated_k < params.mated_per_id)
    set.warnings.push_back("mated pairs per identity capped at " + std::to_string(possible));

  std::set<std::pair<std::string, std::string>> seen_nonmated;
  for (std::size_t ii = 0; ii < set.identities.size(); ++ii) {
    const auto& id = set.identities[ii];
    const auto& own = selected[id];

    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
    seeded_shuffle(all.begin(), all.end(), rng);
    for (std::size_t k = 0; k < mated_k; ++k) set.mated.push_back({own[all[k].first], own[all[k].second]});

    std::size_t made = 0, attempts = 0;
    const std::size_t max_attempts = 100 * std::max<std::size_t>(1, params.nonmated_per_id);
    while (made < params.nonmated_per_id && attempts++ < max_attempts) {
      const auto& a = own[rng() % own.size()];
      std::size_t other = rng() % (set.identities.size() - 1);
      if (other >= ii) ++other;
      const auto& pool = selected[set.identities[other]];
      const auto& b = pool[rng() % pool.size()];
      auto key = std::minmax(a, b);
      if (!seen_nonmated.emplace(key.first, key.second).second) continue;
      set.nonmated.push_back({a, b});
      ++made;
    }
    if (made < params.nonmated_per_id)
      set.warnings.push_back("identity " + id + ": only " + std::to_string(made) + " distinct non-mated pairs");
  }
  return set;
}

std::vector<double> Histogram::centers() const {
  std::vector<double> c;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c.push_back(0.5 * (edges[i] + edges[i + 1]));
  return c;
}

namespace {

std::vector<double> bin_counts(std::span<const double> scores, std::size_t bins, double lo, double hi) {
  std::vector<double> counts(bins, 0.0);
  const double width = (hi - lo) / double(bins);
  for (double s : scores) {
    auto b = static_cast<long long>(std::floor((s - lo) / width));
    b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return counts;
}

std::vector<double> smoothed_masses(std::span<const double> scores, std::size_t bins, double epsilon) {
  auto m = bin_counts(scores, bins, -1.0, 1.0);
  double total = 0.0;
  for (double& v : m) {
    v = v / double(scores.size()) + epsilon;
    total += v;
  }
  for (double& v : m) v /= total;
  return m;
}

}  // namespace

Histogram make_histogram(std::span<const double> scores, std::size_t bins, double lo, double hi) {
  if (bins < 1) throw InputError("histogram needs >= 1 bin");
  if (scores.empty()) throw InputError("histogram of an empty score list");
  Histogram h;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * double(i) / double(bins));
  h.probabilities = bin_counts(scores, bins, lo, hi);
  for (double& p : h.probabilities) p /= double(scores.size());
  return h;
}

ScoreDistribution ScoreDistribution::from_scores(std::vector<double> scores, std::size_t bins) {
  if (scores.empty()) throw InputError("score distribution needs at least one score");
  ScoreDistribution d;
  d.scores = std::move(scores);
  double sum = 0.0;
  for (double s : d.scores) sum += s;
  d.mean = sum / double(d.scores.size());
  double ss = 0.0;
  for (double s : d.scores) ss += (s - d.mean) * (s - d.mean);
  d.std = std::sqrt(ss / double(d.scores.size()));
  d.histogram = make_histogram(d.scores, bins);
  return d;
}

ScoredComparisons score_comparisons(const ComparisonSet& set, const std::map<std::string, EmbeddingVector>& embeddings,
                                    std::size_t bins) {
  auto lookup = [&](const std::string& id) -> const EmbeddingVector& {
    const auto it = embeddings.find(id);
    if (it == embeddings.end()) throw DataError("no embedding for sample '" + id + "'");
    return it->second;
  };
  auto score = [&](const std::vector<ComparisonPair>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(cosine_similarity(lookup(p.a), lookup(p.b)));
    return ScoreDistribution::from_scores(std::move(out), bins);
  };
  return {score(set.mated), score(set.nonmated)};
}

double kl_divergence(const ScoreDistribution& p, const ScoreDistribution& q, std::size_t bins, double epsilon) {
  if (bins < 2) throw InputError("kl_divergence: bins must be >= 2");
  if (p.scores.empty() || q.scores.empty()) throw InputError("kl_divergence: empty distribution");
  if (!(epsilon >= 0.0)) throw InputError("kl_divergence: epsilon must be >= 0");
  const auto pm = smoothed_masses(p.scores, bins, epsilon);
  const auto qm = smoothed_masses(q.scores, bins, epsilon);
  double kl = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    if (pm[i] == 0.0) continue;
    if (qm[i] == 0.0) return INFINITY;
    kl += pm[i] * std::log(pm[i] / qm[i]);
  }
  return std::max(0.0, kl);
}

EerResult compute_eer(std::span<const double> mated, std::span<const double> nonmated) {
  if (mated.empty() || nonmated.empty()) throw InputError("compute_eer: empty score list");
  std::vector<double> m(mated.begin(), mated.end()), nm(nonmated.begin(), nonmated.end());
  std::sort(m.begin(), m.end());
  std::sort(nm.begin(), nm.end());
  std::vector<double> thresholds(m);
  thresholds.insert(thresholds.end(), nm.begin(), nm.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  // Above every score: FNMR = 1, FMR = 0.
  thresholds.push_back(std::nextafter(thresholds.back(), INFINITY));

  auto fnmr = [&](double t) {
    return double(std::lower_bound(m.begin(), m.end(), t) - m.begin()) / double(m.size());
  };
  auto fmr = [&](double t) {
    return double(nm.end() - std::lower_bound(nm.begin(), nm.end(), t)) / double(nm.size());
  };

  double prev_t = thresholds.front();
  double prev_fnmr = fnmr(prev_t), prev_fmr = fmr(prev_t);
  for (double t : thresholds) {
    const double a = fnmr(t), b = fmr(t);
    if (a >= b) {
      if (t == prev_t) return {0.5 * (a + b), t};
      // Solve prev_fnmr + l*(a - prev_fnmr) == prev_fmr + l*(b - prev_fmr).
      const double denom = (a - prev_fnmr) - (b - prev_fmr);
      const double l = denom > 0.0 ? (prev_fmr - prev_fnmr) / denom : 1.0;
      return {prev_fnmr + l * (a - prev_fnmr), prev_t + l * (t - prev_t)};
    }
    prev_t = t;
    prev_fnmr = a;
    prev_fmr = b;
  }
  return {0.5, thresholds.back()};
}

std::string format_mean_std(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean, std);
  return buf;
}

DistributionReport distribution_report(std::span<const DatasetScores> datasets,
                                       const std::vector<std::string>& reference_names,
                                       const ReportOptions& options) {
  std::map<std::string, const DatasetScores*> by_name;
  for (const auto& d : datasets)
    if (!by_name.emplace(d.name, &d).second) throw ConfigError("duplicate dataset name '" + d.name + "'");
  for (const auto& r : reference_names)
    if (!by_name.count(r)) throw ConfigError("unknown reference dataset '" + r + "'");

  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };

  std::ostringstream csv, table;
  csv << "# kl_bins=" << options.bins << " kl_epsilon=" << format_double(options.epsilon)
      << " std=population eer=interpolated\n";
  csv << "dataset,n_identities,mated_mean,mated_std,nonmated_mean,nonmated_std,eer";
  for (const auto& r : reference_names) csv << ",kl_mated_vs_" << r;
  for (const auto& r : reference_names) csv << ",kl_nonmated_vs_" << r;
  csv << '\n';
  table << "| Dataset | Identities | Mated scores | Non-mated scores | EER |\n";
  table << "|---|---|---|---|---|\n";

  DistributionReport report;
  for (const auto& d : datasets) {
    const auto eer = compute_eer(d.mated.scores, d.nonmated.scores);
    csv << d.name << ',' << d.n_identities << ',' << num(d.mated.mean) << ',' << num(d.mated.std) << ','
        << num(d.nonmated.mean) << ',' << num(d.nonmated.std) << ',' << num(eer.eer);
    for (const auto& r : reference_names)
      csv << ',' << num(kl_divergence(d.mated, by_name.at(r)->mated, options.bins, options.epsilon));
    for (const auto& r : reference_names)
      csv << ',' << num(kl_divergence(d.nonmated, by_name.at(r)->nonmated, options.bins, options.epsilon));
    csv << '\n';

    char eer_pct[32];
    std::snprintf(eer_pct, sizeof eer_pct, "%.2f%%", 100.0 * eer.eer);
    table << "| " << d.name << " | " << d.n_identities << " | " << format_mean_std(d.mated.mean, d.mated.std)
          << " | " << format_mean_std(d.nonmated.mean, d.nonmated.std) << " | " << eer_pct << " |\n";

    std::ostringstream hist;
    hist << "bin_center,probability,series\n";
    const auto hm = make_histogram(d.mated.scores, options.bins);
    const auto hn = make_histogram(d.nonmated.scores, options.bins);
    const auto centers = hm.centers();
    for (std::size_t i = 0; i < centers.size(); ++i) hist << num(centers[i]) << ',' << num(hm.probabilities[i]) << ",mated\n";
    for (std::size_t i = 0; i < centers.size(); ++i) hist << num(centers[i]) << ',' << num(hn.probabilities[i]) << ",nonmated\n";
    report.histograms[d.name] = hist.str();
  }
  report.csv = csv.str();
  report.table = table.str();
  return report;
}

void write_distribution_report(const DistributionReport& report, const std::filesystem::path& dir) {
  write_file_atomic(dir / "report.csv", report.csv);
  write_file_atomic(dir / "report.md", report.table);
  for (const auto& [name, hist] : report.histograms) write_file_atomic(dir / "histograms" / (name + ".csv"), hist);
}

}  // namespace latentforge

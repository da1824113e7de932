#include <doctest.h>

#include <set>
#include <sstream>

#include "latentforge/errors.hpp"
#include "latentforge/evaluation.hpp"
#include "test_support.hpp"

using namespace latentforge;
using namespace testsupport;

namespace {

std::vector<SampleRecord> dataset(std::size_t identities, std::size_t images) {
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < identities; ++i)
    for (std::size_t k = 0; k < images; ++k) {
      SampleRecord s;
      s.identity_id = "id" + std::to_string(i);
      s.sample_id = s.identity_id + "_" + std::to_string(k);
      s.embedding_ref = s.sample_id;
      out.push_back(s);
    }
  return out;
}

double share(const std::vector<double>& v, auto pred) {
  return double(std::count_if(v.begin(), v.end(), pred)) / double(v.size());
}

// Independent oracle: evaluate FMR/FNMR at every midpoint between distinct
// scores (and beyond both ends), take the threshold where they are closest.
double sweep_eer(const std::vector<double>& mated, const std::vector<double>& nonmated) {
  std::vector<double> all(mated);
  all.insert(all.end(), nonmated.begin(), nonmated.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> cuts = {all.front() - 1.0, all.back() + 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) cuts.push_back(0.5 * (all[i] + all[i + 1]));
  double best_gap = 2.0, best = 0.5;
  for (double t : cuts) {
    const double fnmr = share(mated, [&](double s) { return s < t; });
    const double fmr = share(nonmated, [&](double s) { return s >= t; });
    if (std::abs(fnmr - fmr) < best_gap) {
      best_gap = std::abs(fnmr - fmr);
      best = 0.5 * (fnmr + fmr);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("comparison sampling protocol") {
  const auto data = dataset(5, 12);
  const auto set = sample_comparisons(data, SamplingParams{}, 3, "d");
  CHECK(set.identities.size() == 5);
  CHECK(set.mated.size() == 100);
  CHECK(set.nonmated.size() == 100);

  std::set<std::pair<std::string, std::string>> mated;
  for (const auto& p : set.mated) {
    CHECK(p.a.substr(0, p.a.find('_')) == p.b.substr(0, p.b.find('_')));
    CHECK(p.a != p.b);
    mated.insert(std::minmax(p.a, p.b));
  }
  CHECK(mated.size() == 100);

  std::set<std::pair<std::string, std::string>> nonmated;
  for (const auto& p : set.nonmated) {
    CHECK(p.a.substr(0, p.a.find('_')) != p.b.substr(0, p.b.find('_')));
    nonmated.insert(std::minmax(p.a, p.b));
  }
  CHECK(nonmated.size() == 100);

  // only 10 images per identity participate
  std::map<std::string, std::set<std::string>> used;
  for (const auto& p : set.mated) {
    used[p.a.substr(0, p.a.find('_'))].insert(p.a);
    used[p.b.substr(0, p.b.find('_'))].insert(p.b);
  }
  for (const auto& [id, imgs] : used) CHECK(imgs.size() <= 10);
}

TEST_CASE("sampling edge cases") {
  const auto exhaust = sample_comparisons(dataset(3, 2), SamplingParams{2, 1, 1}, 1);
  CHECK(exhaust.mated.size() == 3);

  const auto capped = sample_comparisons(dataset(3, 10), SamplingParams{10, 46, 5}, 1);
  CHECK(capped.mated.size() == 3 * 45);
  CHECK_FALSE(capped.warnings.empty());

  auto uneven = dataset(4, 10);
  for (int k = 0; k < 5; ++k) uneven.pop_back();
  const auto skipped = sample_comparisons(uneven, SamplingParams{}, 1);
  CHECK(skipped.skipped_identities == 1);
  CHECK(skipped.identities.size() == 3);

  CHECK_THROWS_AS(sample_comparisons(dataset(1, 20), SamplingParams{}, 1), InputError);
}

TEST_CASE("sampling is deterministic") {
  const auto data = dataset(8, 15);
  const auto a = sample_comparisons(data, SamplingParams{}, 77);
  const auto b = sample_comparisons(data, SamplingParams{}, 77);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_json() != sample_comparisons(data, SamplingParams{}, 78).to_json());
}

TEST_CASE("scoring") {
  ComparisonSet set;
  set.mated = {{"a", "b"}, {"a", "a"}};
  set.nonmated = {{"a", "c"}};
  std::map<std::string, EmbeddingVector> emb = {
      {"a", EmbeddingVector({1, 0})}, {"b", EmbeddingVector({0, 1})}, {"c", EmbeddingVector({1, 0})}};
  const auto scored = score_comparisons(set, emb);
  CHECK(scored.mated.scores == std::vector<double>{0.0, 1.0});
  CHECK(scored.nonmated.scores == std::vector<double>{1.0});

  set.mated.push_back({"a", "zz"});
  CHECK_THROWS_AS(score_comparisons(set, emb), DataError);

  const auto d = ScoreDistribution::from_scores({0.5, 0.7});
  CHECK(d.mean == doctest::Approx(0.6));
  CHECK(d.std == doctest::Approx(0.1));
}

TEST_CASE("histograms conserve mass") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<double> s(1000);
  for (auto& x : s) x = u(rng);
  const auto h = make_histogram(s, 100);
  CHECK(h.edges.size() == 101);
  double sum = 0.0;
  for (double p : h.probabilities) sum += p;
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK(h.centers().front() == doctest::Approx(-0.99));
}

TEST_CASE("KL divergence") {
  const auto p = ScoreDistribution::from_scores({-0.5, 0.5}, 2);
  const auto q = ScoreDistribution::from_scores({-0.5, 0.5, 0.5, 0.5}, 2);
  const double forward = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  const double reverse = 0.25 * std::log(0.25 / 0.5) + 0.75 * std::log(0.75 / 0.5);
  CHECK(std::abs(kl_divergence(p, q, 2) - 0.14384) < 1e-4);
  CHECK(std::abs(kl_divergence(p, q, 2) - forward) < 1e-5);
  CHECK(std::abs(kl_divergence(q, p, 2) - reverse) < 1e-5);
  CHECK(kl_divergence(p, p, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(kl_divergence(p, q, 1), InputError);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.2, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(200), b(150);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng) - 0.3;
    const auto da = ScoreDistribution::from_scores(a), db = ScoreDistribution::from_scores(b);
    CHECK(kl_divergence(da, db) >= 0.0);
    CHECK(std::abs(kl_divergence(da, da)) < 1e-9);
  }
}

TEST_CASE("EER examples") {
  CHECK(compute_eer(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}).eer == 0.0);
  CHECK(compute_eer(std::vector<double>{0.6, 0.4}, std::vector<double>{0.5, 0.3}).eer == doctest::Approx(0.5));
  CHECK(sweep_eer({0.6, 0.4}, {0.5, 0.3}) == doctest::Approx(0.5));
  const std::vector<double> same = {0.1, 0.4, 0.7};
  CHECK(compute_eer(same, same).eer == doctest::Approx(0.5));
  CHECK_THROWS_AS(compute_eer(std::vector<double>{}, same), InputError);
}

TEST_CASE("EER agrees with the sweep oracle and swaps symmetrically") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(1, 100);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(size(rng)), n(size(rng));
    const double shift = 2.0 * (trial % 5) / 4.0;
    for (auto& x : m) x = g(rng) + shift;
    for (auto& x : n) x = g(rng);
    const double tol = 1.0 / (2.0 * double(std::min(m.size(), n.size())));
    const double eer = compute_eer(m, n).eer;
    CHECK(eer >= 0.0);
    CHECK(std::abs(eer - sweep_eer(m, n)) <= tol + 1e-12);
    CHECK(std::abs(compute_eer(n, m).eer - (1.0 - eer)) < 1e-9);
  }
}

TEST_CASE("EER with tied scores stays within one tie group of the sweep") {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> size(5, 100);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(size(rng)), n(size(rng));
    for (auto& x : m) x = std::round((g(rng) + 0.5) * 4) / 4;
    for (auto& x : n) x = std::round(g(rng) * 4) / 4;
    // a tie group of k scores moves a rate by k/size in one step
    std::map<double, std::size_t> tm, tn;
    for (double x : m) ++tm[x];
    for (double x : n) ++tn[x];
    double step = 0.0;
    for (const auto& [v, k] : tm) step = std::max(step, double(k) / double(m.size()));
    for (const auto& [v, k] : tn) step = std::max(step, double(k) / double(n.size()));
    const double eer = compute_eer(m, n).eer;
    CHECK(eer >= 0.0);
    CHECK(eer <= 1.0);
    CHECK(std::abs(eer - sweep_eer(m, n)) <= step / 2 + 1e-12);
  }
}

TEST_CASE("distribution report") {
  std::vector<DatasetScores> ds = {
      {"gan", 10, ScoreDistribution::from_scores({0.6, 0.7, 0.8}), ScoreDistribution::from_scores({0.0, 0.1})},
      {"real", 12, ScoreDistribution::from_scores({0.5, 0.55}), ScoreDistribution::from_scores({-0.1, 0.05})},
      {"other", 3, ScoreDistribution::from_scores({0.3}), ScoreDistribution::from_scores({0.2})},
  };
  const auto r = distribution_report(ds, {"gan", "real"});
  CHECK(r.csv.rfind("# kl_bins=100", 0) == 0);
  CHECK(r.csv.find("kl_mated_vs_gan") != std::string::npos);
  CHECK(r.csv.find("kl_nonmated_vs_real") != std::string::npos);
  CHECK(r.table.find("0.70 ± 0.08") != std::string::npos);
  CHECK(r.histograms.size() == 3);
  CHECK(r.histograms.at("gan").rfind("bin_center,probability,series", 0) == 0);

  // row for "gan" against itself has zero KL
  const auto row = r.csv.substr(r.csv.find("\ngan,") + 1);
  const auto line = row.substr(0, row.find('\n'));
  std::vector<std::string> cells;
  std::stringstream in(line);
  for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 11);
  CHECK(std::stod(cells[7]) == 0.0);
  CHECK(std::stod(cells[9]) == 0.0);

  CHECK(format_mean_std(0.67, 0.14) == "0.67 ± 0.14");
  CHECK_THROWS_AS(distribution_report(ds, {"missing"}), ConfigError);
}

#include <doctest.h>

#include "latentforge/embedding.hpp"
#include "latentforge/errors.hpp"
#include "latentforge/identity_factory.hpp"
#include "latentforge/simworld.hpp"
#include "latentforge/taxonomy.hpp"
#include "test_support.hpp"

using namespace latentforge;
using namespace testsupport;

namespace {

World make_world(std::uint64_t seed, double child_fraction = 0.1) {
  WorldConfig wc;
  wc.seed = seed;
  wc.child_fraction = child_fraction;
  return World::create(wc);
}

}  // namespace

TEST_CASE("world creation") {
  const auto w = make_world(1);
  CHECK(w.attributes().size() == 18);
  CHECK(w.dim() == 64);
  CHECK(w.embed_dim() == 32);

  const auto again = make_world(1);
  for (const auto& a : w.attributes()) {
    const auto u = w.direction(a), v = again.direction(a);
    CHECK(std::equal(u.begin(), u.end(), v.begin()));
  }

  WorldConfig small;
  small.dim = 8;
  CHECK_THROWS_AS(World::create(small), ConfigError);
  WorldConfig dup;
  dup.attributes = {"yaw", "yaw"};
  CHECK_THROWS_AS(World::create(dup), ConfigError);
  CHECK_THROWS_AS(w.direction("tail"), ConfigError);
}

TEST_CASE("planted directions are orthonormal") {
  const auto w = make_world(2);
  for (const auto& a : w.attributes())
    for (const auto& b : w.attributes()) {
      const double d = dotp(w.direction(a), w.direction(b));
      CHECK(std::abs(d - (a == b ? 1.0 : 0.0)) < 1e-12);
    }
}

TEST_CASE("orthonormalize rejects dependent vectors") {
  CHECK_THROWS_AS(orthonormalize({{1, 0}, {2, 0}}), DegenerateError);
}

TEST_CASE("noiseless scores are exact projections") {
  const auto w = make_world(3);
  for (const auto& s : sample_labeled_latents(w, 50, 9)) {
    CHECK(s.scores.at("yaw") == dotp(s.latent.values(), w.direction("yaw")));
    CHECK(s.labels.yaw == s.scores.at("yaw"));
    CHECK(s.labels.gender == (s.scores.at("gender") >= 0 ? "Male" : "Female"));
  }
  CHECK(sample_labeled_latents(w, 2560, 1).size() == 2560);
}

TEST_CASE("race labels are uniform (chi-square)") {
  const auto w = make_world(4);
  std::map<std::string, int> counts;
  const int n = 10000;
  for (const auto& s : sample_labeled_latents(w, n, 17)) ++counts[s.labels.race];
  CHECK(counts.size() == 7);
  double chi2 = 0.0;
  const double expected = n / 7.0;
  for (const auto& [r, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 6 degrees of freedom, p = 0.01 critical value
  CHECK(chi2 < 16.812);
}

TEST_CASE("planted child fraction shows up in the age filter") {
  const auto w = make_world(5, 0.3);
  const auto pool = build_candidate_pool(w, 10000, 0.0, 21);
  const double frac = double(pool.provenance.n_age_dropped) / 10000.0;
  // binomial standard error is about 0.0046
  CHECK(std::abs(frac - 0.3) < 0.02);
  for (const auto& s : pool.samples) CHECK_FALSE(taxonomy::is_child_age_bin(s.labels.age_bin));
}

TEST_CASE("embedding ignores attribute edits") {
  const auto w = make_world(6);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto latent = lv(gaussian(rng, 64));
    const auto base = w.embed(latent);
    for (const auto& a : w.attributes()) {
      const auto edited = w.embed(transform(latent, w.planted_boundary(a), 3.7));
      for (std::size_t k = 0; k < base.dim(); ++k) CHECK(std::abs(edited.values()[k] - base.values()[k]) < 1e-9);
    }
  }
}

TEST_CASE("embedding degenerates on the attribute subspace") {
  const auto w = make_world(7);
  const auto u = w.direction("yaw");
  CHECK_THROWS_AS(w.embed(lv({u.begin(), u.end()})), DegenerateError);
}

TEST_CASE("small residual perturbations barely move the embedding") {
  const auto w = make_world(8);
  std::mt19937_64 rng(2);
  const auto latent = lv(gaussian(rng, 64));
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    auto d = w.residual(lv(gaussian(rng, 64)));
    const double n = std::sqrt(dotp(d, d));
    std::vector<double> moved(latent.values().begin(), latent.values().end());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += eps * d[i] / n;
    const double c = cosine_similarity(w.embed(latent), w.embed(lv(moved)));
    CHECK(1.0 - c < 10.0 * eps * eps);
  }
}

TEST_CASE("personalization simulation") {
  const auto w = make_world(9);
  std::mt19937_64 rng(3);
  const auto identity = lv(gaussian(rng, 64));
  const auto ref = w.embed(identity);

  SUBCASE("zero noise and no outliers reproduce the identity") {
    const std::vector<double> sigma(10, 0.0);
    for (const auto& s : simulate_personalization(w, identity, sigma, {0.0, 0.0, 0.0}, 1))
      CHECK(cosine_similarity(s.embedding, ref) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("outliers land near zero similarity") {
    const std::vector<double> sigma(2000, 0.0);
    const auto out = simulate_personalization(w, identity, sigma, {1.0, 0.0, 0.0}, 2);
    double mean = 0.0;
    for (const auto& s : out) {
      CHECK(s.outlier);
      mean += cosine_similarity(s.embedding, ref);
    }
    mean /= double(out.size());
    CHECK(std::abs(mean) < 0.03);
  }

  SUBCASE("outlier count follows the binomial law") {
    const std::size_t n = 5000;
    const double f = 0.1;
    const std::vector<double> sigma(n, 0.0);
    std::size_t k = 0;
    for (const auto& s : simulate_personalization(w, identity, sigma, {f, 0.0, 0.0}, 3)) k += s.outlier;
    const double z = (double(k) - n * f) / std::sqrt(n * f * (1 - f));
    CHECK(std::abs(z) < 2.576);
  }

  SUBCASE("larger noise lowers the mean similarity") {
    double previous = 2.0;
    for (double s : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      const std::vector<double> sigma(3000, s);
      double mean = 0.0;
      for (const auto& x : simulate_personalization(w, identity, sigma, {0.0, 0.0, 0.0}, 4))
        mean += cosine_similarity(x.embedding, ref);
      mean /= 3000.0;
      CHECK(mean < previous);
      previous = mean;
    }
  }

  SUBCASE("negative sigma is rejected") {
    const std::vector<double> sigma = {-0.1};
    CHECK_THROWS_AS(simulate_personalization(w, identity, sigma, {}, 1), InputError);
  }

  SUBCASE("seeded and deterministic") {
    const std::vector<double> sigma(20, 0.3);
    const auto a = simulate_personalization(w, identity, sigma, {0.2, 0.1, 0.1}, 5);
    const auto b = simulate_personalization(w, identity, sigma, {0.2, 0.1, 0.1}, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::equal(a[i].embedding.values().begin(), a[i].embedding.values().end(),
                       b[i].embedding.values().begin()));
      CHECK(a[i].outlier == b[i].outlier);
    }
  }
}

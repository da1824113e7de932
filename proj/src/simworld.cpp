#include "latentforge/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latentforge/errors.hpp"
#include "latentforge/random.hpp"
#include "latentforge/taxonomy.hpp"
#include "latentforge/vecmath.hpp"

namespace latentforge {

namespace {

// Inverse of the standard normal CDF by bisection; only used for a handful of
// cut points at world creation.
double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> gaussian_vector(std::size_t n, Rng& rng, NormalSampler& normal) {
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

}  // namespace

std::vector<std::vector<double>> orthonormalize(std::vector<std::vector<double>> vectors) {
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& v = vectors[i];
    const double original = vecmath::norm(v);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) vecmath::axpy(-vecmath::dot(v, vectors[j]), vectors[j], v);
    const double n = vecmath::norm(v);
    if (!(n > 1e-10 * std::max(1.0, original)))
      throw DegenerateError("orthonormalize: vector " + std::to_string(i) + " is linearly dependent");
    for (double& x : v) x /= n;
  }
  return vectors;
}

World World::create(const WorldConfig& cfg_in) {
  World w;
  w.cfg_ = cfg_in;
  if (w.cfg_.attributes.empty()) w.cfg_.attributes = taxonomy::default_attribute_names();
  const auto& cfg = w.cfg_;
  if (cfg.dim == 0 || cfg.embed_dim == 0) throw ConfigError("world: dim and embed_dim must be >= 1");
  if (cfg.attributes.size() + cfg.embed_dim > cfg.dim)
    throw ConfigError("world: " + std::to_string(cfg.attributes.size()) + " attributes + embed_dim " +
                      std::to_string(cfg.embed_dim) + " exceed dim " + std::to_string(cfg.dim));
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("world: noise_sigma must be >= 0");
  if (!(cfg.child_fraction >= 0.0 && cfg.child_fraction < 1.0))
    throw ConfigError("world: child_fraction must be in [0, 1)");

  for (std::size_t i = 0; i < cfg.attributes.size(); ++i)
    if (!w.index_.emplace(cfg.attributes[i], i).second)
      throw ConfigError("world: duplicate attribute '" + cfg.attributes[i] + "'");

  Rng rng(mix_seed(cfg.seed, 0));
  NormalSampler normal;
  std::vector<std::vector<double>> raw;
  for (std::size_t i = 0; i < cfg.attributes.size(); ++i) raw.push_back(gaussian_vector(cfg.dim, rng, normal));
  w.directions_ = orthonormalize(std::move(raw));

  const double scale = 1.0 / std::sqrt(double(cfg.dim));
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) {
    auto row = gaussian_vector(cfg.dim, rng, normal);
    for (double& x : row) x *= scale;
    w.projection_.push_back(std::move(row));
  }

  // Age score ~ N(0, 1 + sigma^2). Child bins share child_fraction; the
  // adult bins split the rest evenly.
  for (auto b : taxonomy::kChildAgeBins) w.age_labels_.emplace_back(b);
  for (auto b : taxonomy::kAdultAgeBins) w.age_labels_.emplace_back(b);
  const double sd = std::sqrt(1.0 + cfg.noise_sigma * cfg.noise_sigma);
  double cumulative = 0.0;
  const std::size_t n_child = taxonomy::kChildAgeBins.size(), n_adult = taxonomy::kAdultAgeBins.size();
  for (std::size_t i = 0; i + 1 < w.age_labels_.size(); ++i) {
    cumulative += i < n_child ? cfg.child_fraction / double(n_child) : (1.0 - cfg.child_fraction) / double(n_adult);
    w.age_cuts_.push_back(cumulative <= 0.0 ? -INFINITY : sd * normal_quantile(cumulative));
  }
  return w;
}

World create_world(const WorldConfig& cfg) { return World::create(cfg); }

std::span<const double> World::direction(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("world has no attribute '" + name + "'");
  return directions_[it->second];
}

AttributeBoundary World::planted_boundary(const std::string& name) const {
  const auto u = direction(name);
  return AttributeBoundary(name, {u.begin(), u.end()});
}

double World::score(const LatentVector& w, const std::string& name) const {
  if (w.dim() != cfg_.dim) throw DimensionError("latent dim " + std::to_string(w.dim()) + " != world dim");
  return vecmath::dot(w.values(), direction(name));
}

CandidateSample World::draw(std::size_t index, std::uint64_t seed) const {
  Rng rng(mix_seed(seed, index));
  NormalSampler normal;
  CandidateSample s;
  s.index = index;
  s.latent = LatentVector(gaussian_vector(cfg_.dim, rng, normal));
  for (std::size_t k = 0; k < cfg_.attributes.size(); ++k) {
    const double noise = cfg_.noise_sigma > 0.0 ? cfg_.noise_sigma * normal(rng) : 0.0;
    s.scores[cfg_.attributes[k]] = vecmath::dot(s.latent.values(), directions_[k]) + noise;
  }
  s.quality = 25.0 * std::exp(0.1 * normal(rng));

  auto score_or = [&](const std::string& name, double fallback) {
    const auto it = s.scores.find(name);
    return it == s.scores.end() ? fallback : it->second;
  };
  s.labels.yaw = score_or(std::string(taxonomy::kYaw), 0.0);
  s.labels.pitch = score_or(std::string(taxonomy::kPitch), 0.0);
  s.labels.illumination = score_or(std::string(taxonomy::kIllumination), 0.0);
  s.labels.gender = score_or(std::string(taxonomy::kGender), 0.0) >= 0.0 ? std::string(taxonomy::kGenders[0])
                                                                          : std::string(taxonomy::kGenders[1]);
  const double age = score_or(std::string(taxonomy::kAge), 0.0);
  const auto bin = std::upper_bound(age_cuts_.begin(), age_cuts_.end(), age) - age_cuts_.begin();
  s.labels.age_bin = age_labels_[static_cast<std::size_t>(bin)];

  // argmax with the first class winning ties
  std::string race(taxonomy::kRaces[0]);
  double best = -INFINITY;
  for (auto r : taxonomy::kRaces) {
    const double v = score_or(taxonomy::race_boundary(r), -INFINITY);
    if (v > best) {
      best = v;
      race = std::string(r);
    }
  }
  s.labels.race = race;

  std::string expression(taxonomy::kNeutral);
  double best_expr = 0.0;  // neutral pseudo-score
  double strongest = -INFINITY;
  for (auto e : taxonomy::kExpressions) {
    const double v = score_or(taxonomy::expression_boundary(e), -INFINITY);
    strongest = std::max(strongest, v);
    if (v > best_expr) {
      best_expr = v;
      expression = std::string(e);
    }
  }
  s.labels.expression = expression;
  // Neutral confidence: margin of the neutral pseudo-score over the best expression.
  s.scores[std::string(taxonomy::kNeutral)] = std::isfinite(strongest) ? -strongest : 0.0;
  return s;
}

std::vector<double> World::residual(const LatentVector& w) const {
  if (w.dim() != cfg_.dim) throw DimensionError("latent dim " + std::to_string(w.dim()) + " != world dim");
  std::vector<double> r(w.values().begin(), w.values().end());
  for (const auto& u : directions_) vecmath::axpy(-vecmath::dot(r, u), u, r);
  return r;
}

EmbeddingVector World::embed(const LatentVector& w) const {
  const auto r = residual(w);
  if (!(vecmath::norm(r) > 1e-9 * std::max(1.0, vecmath::norm(w.values()))))
    throw DegenerateError("embed: latent lies inside the attribute subspace");
  std::vector<double> e(cfg_.embed_dim);
  for (std::size_t i = 0; i < cfg_.embed_dim; ++i) e[i] = vecmath::dot(projection_[i], r);
  const double n = vecmath::norm(e);
  if (!(n > 0.0)) throw DegenerateError("embed: residual lies in the projection kernel");
  for (double& x : e) x /= n;
  return EmbeddingVector(std::move(e));
}

std::vector<CandidateSample> sample_labeled_latents(const World& world, std::size_t n, std::uint64_t seed) {
  std::vector<CandidateSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(world.draw(i, seed));
  return out;
}

std::vector<SimulatedSample> simulate_personalization(const World& world, const LatentVector& identity_latent,
                                                      std::span<const double> sigma,
                                                      const PersonalizationSimConfig& cfg, std::uint64_t seed) {
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("simulate_personalization: sigma must be >= 0");
  const EmbeddingVector identity = world.embed(identity_latent);
  std::vector<SimulatedSample> out;
  out.reserve(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    NormalSampler normal;
    SimulatedSample s;
    s.outlier = NormalSampler::uniform01(rng) < cfg.outlier_fraction;
    s.face_count = NormalSampler::uniform01(rng) < cfg.no_face_fraction ? 0 : 1;
    s.gender_flipped = NormalSampler::uniform01(rng) < cfg.gender_flip_fraction;
    std::vector<double> base;
    if (s.outlier) {
      const auto other = world.embed(LatentVector(gaussian_vector(world.dim(), rng, normal)));
      base.assign(other.values().begin(), other.values().end());
    } else {
      base.assign(identity.values().begin(), identity.values().end());
    }
    for (double& x : base) x += sigma[i] * normal(rng);
    const double n = vecmath::norm(base);
    for (double& x : base) x /= n;
    s.embedding = EmbeddingVector(std::move(base));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace latentforge

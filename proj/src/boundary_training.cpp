#include "latentforge/boundary_training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "latentforge/errors.hpp"
#include "latentforge/random.hpp"
#include "latentforge/vecmath.hpp"

namespace latentforge {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void require_common_dim(std::span<const LatentVector> a, std::span<const LatentVector> b,
                        std::size_t dim) {
  for (auto set : {a, b})
    for (const auto& w : set)
      if (w.dim() != dim)
        throw DimensionError("training latents have mixed dimensions (" + std::to_string(dim) +
                             " vs " + std::to_string(w.dim()) + ")");
}

// Indices of the `k` highest-scoring entries, ties by ascending index.
std::vector<std::size_t> top_by_score(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

std::vector<LatentVector> gather(const std::vector<LatentVector>& from,
                                 const std::vector<std::size_t>& idx) {
  std::vector<LatentVector> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(from[i]);
  return out;
}

}  // namespace

void LabeledPool::validate() const {
  if (latents.size() != scores.size())
    throw InputError("pool '" + attribute + "': " + std::to_string(latents.size()) +
                     " latents but " + std::to_string(scores.size()) + " scores");
  for (double s : scores)
    if (!std::isfinite(s)) throw InputError("pool '" + attribute + "': non-finite score");
}

void SvmConfig::validate() const {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 0.5))
    throw ConfigError("svm: holdout_fraction must be in (0, 0.5)");
  if (max_train < 2) throw ConfigError("svm: max_train must be >= 2");
  if (epochs == 0) throw ConfigError("svm: epochs must be >= 1");
  if (!(learning_rate > 0.0) || !(l2_lambda >= 0.0))
    throw ConfigError("svm: learning_rate must be > 0 and l2_lambda >= 0");
}

ExtremeSplit select_extremes(const LabeledPool& pool, std::size_t per_side) {
  pool.validate();
  if (per_side == 0) throw InputError("select_extremes: per_side must be >= 1");
  if (2 * per_side > pool.latents.size())
    throw InputError("select_extremes: 2*" + std::to_string(per_side) + " exceeds pool of " +
                     std::to_string(pool.latents.size()));

  std::vector<std::size_t> order(pool.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ExtremeSplit split;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pool.scores[a] > pool.scores[b]; });
  split.positives.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(per_side));

  std::vector<bool> taken(order.size(), false);
  for (auto i : split.positives) taken[i] = true;
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pool.scores[a] < pool.scores[b]; });
  for (auto i : order) {
    if (split.negatives.size() == per_side) break;
    if (!taken[i]) split.negatives.push_back(i);
  }
  return split;
}

std::size_t default_per_side(std::size_t pool_size, const SvmConfig& cfg) {
  return std::max<std::size_t>(1, std::min(pool_size / 4, cfg.max_train / 2));
}

AttributeBoundary train_linear_boundary(const std::string& attribute,
                                        std::span<const LatentVector> positives,
                                        std::span<const LatentVector> negatives,
                                        const SvmConfig& cfg) {
  cfg.validate();
  if (positives.empty() || negatives.empty())
    throw InputError("train '" + attribute + "': both sides need at least one latent");
  const std::size_t dim = positives.front().dim();
  require_common_dim(positives, negatives, dim);

  Rng rng(cfg.seed);
  struct Side {
    std::vector<std::size_t> train, holdout;
  };
  auto split_side = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    seeded_shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, cfg.max_train / 2));
    const auto holdout = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * double(idx.size())));
    Side s;
    s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(holdout));
    s.holdout.assign(idx.end() - static_cast<std::ptrdiff_t>(holdout), idx.end());
    return s;
  };
  const Side pos = split_side(positives.size());
  const Side neg = split_side(negatives.size());

  struct Example {
    const LatentVector* x;
    double y;
  };
  std::vector<Example> train;
  for (auto i : pos.train) train.push_back({&positives[i], 1.0});
  for (auto i : neg.train) train.push_back({&negatives[i], -1.0});

  bool degenerate = true;
  const auto first = train.front().x->values();
  auto differs = [&](const LatentVector& w) {
    return !std::equal(first.begin(), first.end(), w.values().begin());
  };
  for (const auto& e : train) degenerate = degenerate && !differs(*e.x);
  for (auto i : pos.holdout) degenerate = degenerate && !differs(positives[i]);
  for (auto i : neg.holdout) degenerate = degenerate && !differs(negatives[i]);
  if (degenerate) throw TrainingError("train '" + attribute + "': all training points are identical");

  // Pegasos-style subgradient descent with step lr / (1 + lr*lambda*t). The
  // bias is unregularized. Iterates of the second half are averaged.
  std::vector<double> w(dim, 0.0), w_avg(dim, 0.0);
  double b = 0.0, b_avg = 0.0;
  std::size_t averaged = 0;
  std::uint64_t t = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t average_from = cfg.epochs / 2;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    seeded_shuffle(order.begin(), order.end(), rng);
    for (auto k : order) {
      const Example& ex = train[k];
      const double eta = cfg.learning_rate / (1.0 + cfg.learning_rate * cfg.l2_lambda * double(t));
      ++t;
      const double margin = ex.y * (vecmath::dot(w, ex.x->values()) + b);
      const double shrink = 1.0 - eta * cfg.l2_lambda;
      for (double& v : w) v *= shrink;
      if (margin < 1.0) {
        vecmath::axpy(eta * ex.y, ex.x->values(), w);
        b += eta * ex.y;
      }
      if (epoch >= average_from) {
        ++averaged;
        const double mix = 1.0 / double(averaged);
        for (std::size_t j = 0; j < dim; ++j) w_avg[j] += mix * (w[j] - w_avg[j]);
        b_avg += mix * (b - b_avg);
      }
    }
  }

  const double wn = vecmath::norm(w_avg);
  if (!(wn > 0.0) || !std::isfinite(wn))
    throw TrainingError("train '" + attribute + "': solver produced a zero or non-finite normal");
  for (double& v : w_avg) v /= wn;
  b_avg /= wn;

  double pos_mean = 0.0;
  for (auto i : pos.train) pos_mean += vecmath::dot(w_avg, positives[i].values()) + b_avg;
  if (pos_mean < 0.0) {
    for (double& v : w_avg) v = -v;
    b_avg = -b_avg;
  }

  AttributeBoundary unit(attribute, w_avg, b_avg);

  BoundaryMeta meta;
  meta.n_train = pos.train.size() + pos.holdout.size() + neg.train.size() + neg.holdout.size();
  double dist = 0.0;
  for (const auto& e : train) dist += std::abs(signed_distance(*e.x, unit));
  meta.average_distance = dist / double(train.size());

  std::size_t correct = 0, total = 0;
  auto score_side = [&](std::span<const LatentVector> set, const std::vector<std::size_t>& idx, bool positive) {
    for (auto i : idx) {
      const double d = signed_distance(set[i], unit);
      correct += positive ? (d > 0.0) : (d < 0.0);
      ++total;
    }
  };
  if (!pos.holdout.empty() || !neg.holdout.empty()) {
    score_side(positives, pos.holdout, true);
    score_side(negatives, neg.holdout, false);
  } else {
    score_side(positives, pos.train, true);
    score_side(negatives, neg.train, false);
  }
  meta.validation_accuracy = double(correct) / double(total);

  return AttributeBoundary(attribute, std::vector<double>(unit.normal().begin(), unit.normal().end()),
                           unit.bias(), meta);
}

BoundaryEvaluation evaluate_boundary(const AttributeBoundary& b,
                                     std::span<const LatentVector> positives,
                                     std::span<const LatentVector> negatives) {
  if (positives.empty() || negatives.empty())
    throw InputError("evaluate_boundary: both sets must be nonempty");
  BoundaryEvaluation out;
  std::size_t correct = 0;
  double dist = 0.0;
  for (const auto& w : positives) {
    const double d = signed_distance(w, b);
    correct += d > 0.0;
    dist += std::abs(d);
  }
  for (const auto& w : negatives) {
    const double d = signed_distance(w, b);
    correct += d < 0.0;
    dist += std::abs(d);
  }
  const double n = double(positives.size() + negatives.size());
  out.accuracy = double(correct) / n;
  out.average_distance = dist / n;
  return out;
}

SuiteScheme parse_suite_scheme(const std::string& name) {
  if (name == "binary") return SuiteScheme::binary;
  if (name == "one_vs_one_vs_neutral") return SuiteScheme::one_vs_one_vs_neutral;
  if (name == "one_vs_all") return SuiteScheme::one_vs_all;
  throw ConfigError("unknown boundary scheme '" + name + "'");
}

std::vector<AttributeBoundary> train_attribute_suite(const std::map<std::string, LabeledPool>& pools,
                                                     SuiteScheme scheme, const SvmConfig& cfg) {
  cfg.validate();
  for (const auto& [name, pool] : pools) pool.validate();

  auto cfg_for = [&](const std::string& name) {
    SvmConfig c = cfg;
    c.seed = mix_seed(cfg.seed, fnv1a(name));
    return c;
  };

  std::vector<AttributeBoundary> out;
  switch (scheme) {
    case SuiteScheme::binary: {
      if (pools.empty()) throw ConfigError("binary scheme needs at least one pool");
      for (const auto& [name, pool] : pools) {
        const auto split = select_extremes(pool, default_per_side(pool.latents.size(), cfg));
        out.push_back(train_linear_boundary(name, gather(pool.latents, split.positives),
                                            gather(pool.latents, split.negatives), cfg_for(name)));
      }
      break;
    }
    case SuiteScheme::one_vs_one_vs_neutral: {
      const auto neutral = pools.find("neutral");
      if (neutral == pools.end())
        throw ConfigError("one_vs_one_vs_neutral scheme requires a pool named 'neutral'");
      for (const auto& [name, pool] : pools) {
        if (name == "neutral") continue;
        const std::size_t k = std::min({pool.latents.size(), neutral->second.latents.size(), cfg.max_train / 2});
        if (k == 0) throw InputError("pool '" + name + "' or 'neutral' is empty");
        out.push_back(train_linear_boundary(
            name, gather(pool.latents, top_by_score(pool.scores, k)),
            gather(neutral->second.latents, top_by_score(neutral->second.scores, k)), cfg_for(name)));
      }
      break;
    }
    case SuiteScheme::one_vs_all: {
      if (pools.size() < 2) throw ConfigError("one_vs_all scheme requires at least two pools");
      for (const auto& [name, pool] : pools) {
        std::vector<LatentVector> rest;
        for (const auto& [other, other_pool] : pools)
          if (other != name) rest.insert(rest.end(), other_pool.latents.begin(), other_pool.latents.end());
        const std::size_t k = std::min({pool.latents.size(), rest.size(), cfg.max_train / 2});
        if (k == 0) throw InputError("pool '" + name + "' or its complement is empty");
        const SvmConfig c = cfg_for(name);
        Rng rng(mix_seed(c.seed, 1));
        std::vector<std::size_t> idx(rest.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        seeded_shuffle(idx.begin(), idx.end(), rng);
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        out.push_back(train_linear_boundary(name, gather(pool.latents, top_by_score(pool.scores, k)),
                                            gather(rest, idx), c));
      }
      break;
    }
  }
  return out;
}

}  // namespace latentforge
